use serde::{Deserialize, Serialize};

use super::{ComplexitySignature, Metric, ScopeError};

/// Dyads × (variable, metric) z-scored features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: Vec<String>,
    pub columns: Vec<(String, Metric)>,
    pub values: Vec<Vec<f64>>,
    pub means: Vec<f64>,
    /// Population standard deviations (divide by N).
    pub std_devs: Vec<f64>,
    pub dropped_columns: Vec<(String, Metric)>,
    /// Dyads with at least one missing feature.
    pub excluded_rows: Vec<String>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
}

/// Builds one row per dyad with every variable's clustering metrics,
/// standardizes each column, and drops zero-variance columns.
pub fn zscore_features(sigs: &[ComplexitySignature]) -> Result<FeatureMatrix, ScopeError> {
    let mut variables: Vec<&str> = Vec::new();
    let mut dyads: Vec<&str> = Vec::new();
    for s in sigs {
        if !variables.contains(&s.variable.as_str()) {
            variables.push(&s.variable);
        }
        if !dyads.contains(&s.dyad_id.as_str()) {
            dyads.push(&s.dyad_id);
        }
    }
    let all_columns: Vec<(String, Metric)> = variables
        .iter()
        .flat_map(|v| Metric::ALL.into_iter().map(move |m| (v.to_string(), m)))
        .collect();

    let mut rows = Vec::new();
    let mut raw = Vec::new();
    let mut excluded_rows = Vec::new();
    for dyad in dyads {
        let row: Option<Vec<f64>> = all_columns
            .iter()
            .map(|(var, m)| {
                sigs.iter()
                    .find(|s| s.dyad_id == dyad && &s.variable == var)
                    .and_then(|s| s.metric(*m))
            })
            .collect();
        match row {
            Some(r) => {
                rows.push(dyad.to_string());
                raw.push(r);
            }
            None => excluded_rows.push(dyad.to_string()),
        }
    }
    if raw.len() < 2 {
        return Err(ScopeError::NoCompleteRows(raw.len()));
    }

    let n = raw.len() as f64;
    let mut columns = Vec::new();
    let mut dropped_columns = Vec::new();
    let mut means = Vec::new();
    let mut std_devs = Vec::new();
    let mut keep = Vec::new();
    for (j, col) in all_columns.into_iter().enumerate() {
        let mean = raw.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = raw.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        if sd <= 1e-12 * mean.abs().max(1.0) {
            dropped_columns.push(col);
        } else {
            columns.push(col);
            means.push(mean);
            std_devs.push(sd);
            keep.push(j);
        }
    }
    let values = raw
        .iter()
        .map(|r| {
            keep.iter()
                .enumerate()
                .map(|(c, &j)| (r[j] - means[c]) / std_devs[c])
                .collect()
        })
        .collect();
    Ok(FeatureMatrix {
        rows,
        columns,
        values,
        means,
        std_devs,
        dropped_columns,
        excluded_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn sig(dyad: &str, h: Option<f64>, lz: f64) -> ComplexitySignature {
        ComplexitySignature {
            dyad_id: dyad.into(),
            variable: "efforts".into(),
            n: 300,
            h_mu: h,
            c_mu: Some(0.1),
            e: Some(0.1),
            l_selected: Some(0),
            n_states: Some(1),
            l_block: Some(1),
            lz78_phrases: 1,
            lz78_normalized: lz,
            bps: BTreeMap::new(),
            bps_min: 0.1,
            trivial: false,
            low_confidence: false,
        }
    }

    #[test]
    fn population_zscore() {
        let sigs = vec![
            sig("A", Some(1.0), 0.5),
            sig("B", Some(2.0), 0.5),
            sig("C", Some(3.0), 0.5),
        ];
        let fm = zscore_features(&sigs).unwrap();
        assert_eq!(fm.columns, vec![("efforts".to_string(), Metric::HMu)]);
        let z: Vec<f64> = fm.values.iter().map(|r| r[0]).collect();
        let expected = 1.0 / (2.0f64 / 3.0).sqrt();
        assert!((z[0] + expected).abs() < 1e-12);
        assert!(z[1].abs() < 1e-12);
        assert!((z[2] - expected).abs() < 1e-12);
        assert!((expected - 1.2247).abs() < 1e-4);
        assert_eq!(fm.dropped_columns.len(), 4);
    }

    #[test]
    fn null_rows_excluded() {
        let sigs = vec![
            sig("A", Some(1.0), 0.1),
            sig("B", None, 0.2),
            sig("C", Some(3.0), 0.3),
        ];
        let fm = zscore_features(&sigs).unwrap();
        assert_eq!(fm.rows, vec!["A", "C"]);
        assert_eq!(fm.excluded_rows, vec!["B"]);
    }

    #[test]
    fn fewer_than_two_complete_rows() {
        let sigs = vec![sig("A", Some(1.0), 0.1), sig("B", None, 0.2)];
        assert_eq!(zscore_features(&sigs), Err(ScopeError::NoCompleteRows(1)));
    }
}
