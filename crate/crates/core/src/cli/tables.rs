//! CSV renderings of signatures, strata, clusters and heatmap rows. Metric
//! cells use six significant digits; missing values are empty cells.

use crate::proxies::Codec;
use crate::scopes::{heatmap_rows, ClusterAssignment, ComplexitySignature, Metric, StratumReport};

/// `%g`-style formatting with six significant digits.
pub fn fmt_g6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        trim_zeros(&format!("{:.*}", (5 - exp) as usize, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt_f(x: Option<f64>) -> String {
    x.map(fmt_g6).unwrap_or_default()
}

fn opt_u(x: Option<usize>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
}

pub fn signatures_csv(sigs: &[ComplexitySignature], codecs: &[Codec]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = [
        "dyad_id",
        "variable",
        "n",
        "h_mu",
        "C_mu",
        "E",
        "l_selected",
        "n_states",
        "l_block",
        "lz78_phrases",
        "lz78_normalized",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(codecs.iter().map(|c| format!("bps_{c}")));
    header.extend(["bps_min", "trivial", "low_confidence"].map(String::from));
    w.write_record(&header).expect("csv write");
    for s in sigs {
        let mut row = vec![
            s.dyad_id.clone(),
            s.variable.clone(),
            s.n.to_string(),
            opt_f(s.h_mu),
            opt_f(s.c_mu),
            opt_f(s.e),
            opt_u(s.l_selected),
            opt_u(s.n_states),
            opt_u(s.l_block),
            s.lz78_phrases.to_string(),
            fmt_g6(s.lz78_normalized),
        ];
        row.extend(codecs.iter().map(|c| opt_f(s.bps.get(c.name()).copied())));
        row.push(fmt_g6(s.bps_min));
        row.push(s.trivial.to_string());
        row.push(s.low_confidence.to_string());
        w.write_record(&row).expect("csv write");
    }
    finish(w)
}

pub fn strata_csv(reports: &[StratumReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "covariate",
        "stratum",
        "variable",
        "n_dyads",
        "metric",
        "count",
        "mean",
        "median",
        "iqr",
    ])
    .expect("csv write");
    for report in reports {
        for s in &report.summaries {
            for m in Metric::ALL {
                let summary = &s.metrics[&m];
                w.write_record([
                    s.covariate.clone(),
                    s.stratum_value.clone(),
                    s.variable.clone(),
                    s.n_dyads.to_string(),
                    m.name().to_string(),
                    summary.count.to_string(),
                    opt_f(summary.mean),
                    opt_f(summary.median),
                    opt_f(summary.iqr),
                ])
                .expect("csv write");
            }
        }
    }
    finish(w)
}

pub fn clusters_csv(assignment: Option<&ClusterAssignment>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["dyad_id", "cluster"]).expect("csv write");
    if let Some(a) = assignment {
        for (dyad, label) in &a.labels {
            w.write_record([dyad.clone(), label.to_string()])
                .expect("csv write");
        }
    }
    finish(w)
}

pub fn heatmap_csv(sigs: &[ComplexitySignature]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["dyad_id", "variable", "metric", "value"])
        .expect("csv write");
    for (dyad, variable, metric, value) in heatmap_rows(sigs) {
        w.write_record([dyad, variable, metric, opt_f(value)])
            .expect("csv write");
    }
    finish(w)
}
