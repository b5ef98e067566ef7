use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ComplexitySignature, Metric, ScopeError};
use crate::ingest::Dataset;

/// Numeric covariates with more distinct dyad-level values than this are
/// bucketed into terciles.
const MAX_RAW_NUMERIC_LEVELS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub count: usize,
    pub mean: Option<f64>,
    pub median: Option<f64>,
    pub iqr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumSummary {
    pub covariate: String,
    pub stratum_value: String,
    pub variable: String,
    pub n_dyads: usize,
    pub metrics: BTreeMap<Metric, MetricSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumReport {
    pub covariate: String,
    pub summaries: Vec<StratumSummary>,
    /// Stratum label per dyad.
    pub assignments: BTreeMap<String, String>,
    /// Dyads whose covariate value changed over time (modal value used).
    pub varying_dyads: Vec<String>,
    /// Tercile cut points when the covariate was bucketed.
    pub tercile_cuts: Option<(f64, f64)>,
}

/// Type-7 (linear interpolation) quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub(crate) fn summarize(values: &[f64]) -> MetricSummary {
    if values.is_empty() {
        return MetricSummary {
            count: 0,
            mean: None,
            median: None,
            iqr: None,
        };
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    MetricSummary {
        count: values.len(),
        mean: Some(values.iter().sum::<f64>() / values.len() as f64),
        median: Some(quantile_sorted(&sorted, 0.5)),
        iqr: Some(quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25)),
    }
}

/// Modal value of the covariate over a dyad's records (ties: smallest string).
fn modal_value(ds: &Dataset, dyad: &str, covariate: &str) -> (String, bool) {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in ds.dyad_records(dyad).unwrap_or_default() {
        let v = r.covariates.get(covariate).map_or("", String::as_str);
        *counts.entry(v).or_default() += 1;
    }
    let varies = counts.len() > 1;
    let mut best = ("", 0);
    for (v, c) in counts {
        if c > best.1 {
            best = (v, c);
        }
    }
    (best.0.to_string(), varies)
}

fn nearest_rank(sorted: &[f64], q_num: usize, q_den: usize) -> f64 {
    let i = (q_num * sorted.len()).div_ceil(q_den).max(1) - 1;
    sorted[i]
}

/// Groups signatures by the dyad's covariate value and summarizes each metric
/// per (stratum, variable).
pub fn stratify(
    sigs: &[ComplexitySignature],
    ds: &Dataset,
    covariate: &str,
) -> Result<StratumReport, ScopeError> {
    if !ds.covariate_names().iter().any(|c| c == covariate) {
        return Err(ScopeError::UnknownCovariate(covariate.to_string()));
    }
    let mut raw: BTreeMap<String, String> = BTreeMap::new();
    let mut varying_dyads = Vec::new();
    for dyad in ds.dyad_ids() {
        let (value, varies) = modal_value(ds, dyad, covariate);
        if varies {
            varying_dyads.push(dyad.to_string());
        }
        raw.insert(dyad.to_string(), value);
    }

    let numeric: Option<Vec<f64>> = raw.values().map(|v| v.parse::<f64>().ok()).collect();
    let mut tercile_cuts = None;
    let assignments = match numeric {
        Some(nums)
            if nums
                .iter()
                .map(|x| x.to_bits())
                .collect::<BTreeSet<_>>()
                .len()
                > MAX_RAW_NUMERIC_LEVELS =>
        {
            let mut sorted = nums.clone();
            sorted.sort_by(f64::total_cmp);
            let c1 = nearest_rank(&sorted, 1, 3);
            let c2 = nearest_rank(&sorted, 2, 3);
            tercile_cuts = Some((c1, c2));
            raw.keys()
                .zip(nums)
                .map(|(d, x)| {
                    let label = if x <= c1 {
                        format!("T1 (<= {c1})")
                    } else if x <= c2 {
                        format!("T2 ({c1}, {c2}]")
                    } else {
                        format!("T3 (> {c2})")
                    };
                    (d.clone(), label)
                })
                .collect()
        }
        _ => raw,
    };

    let mut variables: Vec<&str> = Vec::new();
    for s in sigs {
        if !variables.contains(&s.variable.as_str()) {
            variables.push(&s.variable);
        }
    }
    let strata: BTreeSet<&String> = assignments.values().collect();
    let mut summaries = Vec::new();
    for stratum in strata {
        for &variable in &variables {
            let rows: Vec<&ComplexitySignature> = sigs
                .iter()
                .filter(|s| s.variable == variable && assignments.get(&s.dyad_id) == Some(stratum))
                .collect();
            if rows.is_empty() {
                continue;
            }
            let metrics = Metric::ALL
                .into_iter()
                .map(|m| {
                    let values: Vec<f64> = rows.iter().filter_map(|s| s.metric(m)).collect();
                    (m, summarize(&values))
                })
                .collect();
            summaries.push(StratumSummary {
                covariate: covariate.to_string(),
                stratum_value: stratum.clone(),
                variable: variable.to_string(),
                n_dyads: rows.len(),
                metrics,
            });
        }
    }
    Ok(StratumReport {
        covariate: covariate.to_string(),
        summaries,
        assignments,
        varying_dyads,
        tercile_cuts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sig(dyad: &str, h: Option<f64>) -> ComplexitySignature {
        ComplexitySignature {
            dyad_id: dyad.into(),
            variable: "efforts".into(),
            n: 300,
            h_mu: h,
            c_mu: h.map(|_| 1.0),
            e: h.map(|_| 0.5),
            l_selected: Some(1),
            n_states: Some(2),
            l_block: Some(2),
            lz78_phrases: 10,
            lz78_normalized: 0.5,
            bps: BTreeMap::new(),
            bps_min: 1.0,
            trivial: false,
            low_confidence: false,
        }
    }

    fn ds(rows: &[(&str, &str)]) -> Dataset {
        let mut text = String::from("id_caregiver,tick,day,hour,efforts,mobility\n");
        for (i, (d, m)) in rows.iter().enumerate() {
            text.push_str(&format!("{d},{i},0,0,0.5,{m}\n"));
        }
        crate::ingest::parse_records(&text).unwrap()
    }

    #[test]
    fn two_strata() {
        let d = ds(&[("A", "low"), ("B", "low"), ("C", "high"), ("D", "high")]);
        let sigs: Vec<_> = ["A", "B", "C", "D"]
            .iter()
            .map(|x| sig(x, Some(0.5)))
            .collect();
        let r = stratify(&sigs, &d, "mobility").unwrap();
        assert_eq!(r.summaries.len(), 2);
        assert!(r
            .summaries
            .iter()
            .all(|s| s.metrics[&Metric::HMu].count == 2));
    }

    #[test]
    fn hand_computed_means() {
        let d = ds(&[("A", "x"), ("B", "x"), ("C", "x")]);
        let sigs = vec![
            sig("A", Some(0.2)),
            sig("B", Some(0.5)),
            sig("C", Some(1.1)),
        ];
        let r = stratify(&sigs, &d, "mobility").unwrap();
        let h = &r.summaries[0].metrics[&Metric::HMu];
        assert!((h.mean.unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(h.median, Some(0.5));
        // type-7 quartiles 0.35 and 0.8
        assert!((h.iqr.unwrap() - 0.45).abs() < 1e-12);
    }

    #[test]
    fn null_metrics_are_not_counted() {
        let d = ds(&[("A", "x"), ("B", "x")]);
        let sigs = vec![sig("A", Some(0.2)), sig("B", None)];
        let r = stratify(&sigs, &d, "mobility").unwrap();
        let s = &r.summaries[0];
        assert_eq!(s.metrics[&Metric::HMu].count, 1);
        assert_eq!(s.metrics[&Metric::Lz78].count, 2);
    }

    #[test]
    fn modal_value_and_flag() {
        let d = ds(&[("A", "low"), ("A", "high"), ("A", "high"), ("B", "low")]);
        let sigs = vec![sig("A", Some(0.1)), sig("B", Some(0.1))];
        let r = stratify(&sigs, &d, "mobility").unwrap();
        assert_eq!(r.assignments["A"], "high");
        assert_eq!(r.varying_dyads, vec!["A".to_string()]);
    }

    #[test]
    fn numeric_covariates_use_terciles() {
        let rows: Vec<(String, String)> = (0..6)
            .map(|i| (format!("D{i}"), format!("{}", 60 + 5 * i)))
            .collect();
        let borrowed: Vec<(&str, &str)> =
            rows.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let d = ds(&borrowed);
        let sigs: Vec<_> = rows.iter().map(|(d, _)| sig(d, Some(0.3))).collect();
        let r = stratify(&sigs, &d, "mobility").unwrap();
        assert_eq!(r.tercile_cuts, Some((65.0, 75.0)));
        assert_eq!(r.summaries.len(), 3);
        assert!(r.summaries.iter().all(|s| s.n_dyads == 2));
    }

    #[test]
    fn unknown_covariate() {
        let d = ds(&[("A", "x")]);
        assert_eq!(
            stratify(&[], &d, "age"),
            Err(ScopeError::UnknownCovariate("age".into()))
        );
    }
}
