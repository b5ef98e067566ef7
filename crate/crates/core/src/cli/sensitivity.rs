//! Parameter sweeps over alphabet size, L1 tolerance and maximum order.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::analyze::{codec_table, pretty_json, CodecInfo, Estimators, ToolInfo};
use super::config::{content_hash, sha256_hex, RunConfig, SEED_ENV};
use super::{tables, write_file, CliError};
use crate::ingest::Dataset;
use crate::scopes::{self, ComplexitySignature, Metric, ScopeError, SignatureRun};
use crate::symbolize::{BinningSpec, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    /// Alphabet size of every non-binary variable.
    K,
    Delta,
    LMax,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::K => "k",
            SweepParam::Delta => "delta",
            SweepParam::LMax => "l_max",
        }
    }

    /// The value this parameter has in `cfg`, as a label.
    pub fn current(self, cfg: &RunConfig) -> String {
        match self {
            SweepParam::K => cfg
                .variables
                .iter()
                .find(|v| v.strategy != Strategy::Binary)
                .map_or_else(|| "-".to_string(), |v| v.k.to_string()),
            SweepParam::Delta => cfg.machine.delta.to_string(),
            SweepParam::LMax => cfg.machine.l_max.to_string(),
        }
    }

    /// Returns `cfg` with this parameter set to `raw`, plus the value label.
    pub fn apply(self, cfg: &RunConfig, raw: &str) -> Result<(RunConfig, String), CliError> {
        let bad = |expected: &str| {
            CliError::config(
                Some("--values".into()),
                format!(
                    "cannot parse {raw:?} as {expected} for parameter {}",
                    self.name()
                ),
            )
        };
        let mut out = cfg.clone();
        let label = match self {
            SweepParam::K => {
                let k: usize = raw.trim().parse().map_err(|_| bad("an integer"))?;
                for v in out
                    .variables
                    .iter_mut()
                    .filter(|v| v.strategy != Strategy::Binary)
                {
                    v.k = k;
                }
                k.to_string()
            }
            SweepParam::Delta => {
                let d: f64 = raw.trim().parse().map_err(|_| bad("a number"))?;
                out.machine.delta = d;
                d.to_string()
            }
            SweepParam::LMax => {
                let l: usize = raw.trim().parse().map_err(|_| bad("an integer"))?;
                out.machine.l_max = l;
                l.to_string()
            }
        };
        out.validate()?;
        Ok((out, label))
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "k" => Ok(SweepParam::K),
            "delta" => Ok(SweepParam::Delta),
            "l_max" | "L_max" => Ok(SweepParam::LMax),
            other => Err(format!(
                "unknown sweep parameter `{other}` (expected k, delta or l_max)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledSummary {
    pub variable: String,
    pub l_selected: Option<usize>,
    pub n_states: Option<usize>,
    pub h_mu: Option<f64>,
    pub c_mu: Option<f64>,
    pub e: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub label: String,
    pub config: RunConfig,
    pub run: SignatureRun,
    pub pooled: Vec<PooledSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub value: String,
    pub dyad_id: String,
    pub variable: String,
    pub metric: String,
    pub baseline: Option<f64>,
    pub swept: Option<f64>,
    pub difference: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SensitivityReport {
    pub param: SweepParam,
    pub baseline: SweepPoint,
    pub points: Vec<SweepPoint>,
    pub deltas: Vec<DeltaRow>,
}

fn run_point(cfg: &RunConfig, label: String, ds: &Dataset) -> Result<SweepPoint, CliError> {
    let analysis = cfg.analysis();
    let run = scopes::build_signatures(ds, &analysis)?;
    let mut pooled = Vec::new();
    for var in &analysis.variables {
        let summary = match scopes::analyze_pooled(ds, var, &analysis) {
            Ok(p) => PooledSummary {
                variable: var.name.clone(),
                l_selected: Some(p.metrics.l_selected),
                n_states: Some(p.metrics.n_states),
                h_mu: Some(p.metrics.h_mu),
                c_mu: Some(p.metrics.c_mu),
                e: Some(p.metrics.e),
                note: None,
            },
            Err(e @ ScopeError::Machine { .. }) => PooledSummary {
                variable: var.name.clone(),
                l_selected: None,
                n_states: None,
                h_mu: None,
                c_mu: None,
                e: None,
                note: Some(e.to_string()),
            },
            Err(e) => return Err(e.into()),
        };
        pooled.push(summary);
    }
    Ok(SweepPoint {
        label,
        config: cfg.clone(),
        run,
        pooled,
    })
}

fn delta_metrics(s: &ComplexitySignature) -> Vec<(String, Option<f64>)> {
    let mut v: Vec<(String, Option<f64>)> = Metric::ALL
        .iter()
        .map(|&m| (m.name().to_string(), s.metric(m)))
        .collect();
    v.push(("n_states".into(), s.n_states.map(|x| x as f64)));
    v
}

/// Runs the baseline config and one analysis per swept value.
pub fn run_sensitivity(
    cfg: &RunConfig,
    ds: &Dataset,
    param: SweepParam,
    values: &[String],
) -> Result<SensitivityReport, CliError> {
    if values.is_empty() {
        return Err(CliError::config(
            Some("--values".into()),
            "at least one sweep value is required",
        ));
    }
    let swept: Vec<(RunConfig, String)> = values
        .iter()
        .map(|raw| param.apply(cfg, raw))
        .collect::<Result<_, _>>()?;
    let baseline = run_point(cfg, param.current(cfg), ds)?;
    let mut points = Vec::new();
    let mut deltas = Vec::new();
    for (point_cfg, label) in swept {
        let point = run_point(&point_cfg, label, ds)?;
        for (base, s) in baseline.run.signatures.iter().zip(&point.run.signatures) {
            for ((metric, b), (_, v)) in delta_metrics(base).into_iter().zip(delta_metrics(s)) {
                deltas.push(DeltaRow {
                    value: point.label.clone(),
                    dyad_id: s.dyad_id.clone(),
                    variable: s.variable.clone(),
                    metric,
                    baseline: b,
                    swept: v,
                    difference: b.zip(v).map(|(b, v)| v - b),
                });
            }
        }
        points.push(point);
    }
    Ok(SensitivityReport {
        param,
        baseline,
        points,
        deltas,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub value: String,
    pub config_hash: String,
    pub binning: BTreeMap<String, BinningSpec>,
    pub pooled: Vec<PooledSummary>,
    pub signatures_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityManifest {
    pub tool: ToolInfo,
    pub command: String,
    pub param: SweepParam,
    pub config: RunConfig,
    pub config_hash: String,
    pub input_sha256: String,
    pub estimators: Estimators,
    pub codecs: BTreeMap<String, CodecInfo>,
    pub cluster_seed: u64,
    pub seed_source: String,
    pub baseline: SweepEntry,
    pub sweep: Vec<SweepEntry>,
}

fn opt(x: Option<f64>) -> String {
    x.map(tables::fmt_g6).unwrap_or_default()
}

fn deltas_csv(param: SweepParam, rows: &[DeltaRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "param",
        "value",
        "dyad_id",
        "variable",
        "metric",
        "baseline",
        "swept",
        "difference",
    ])
    .expect("csv write");
    for r in rows {
        w.write_record([
            param.name().to_string(),
            r.value.clone(),
            r.dyad_id.clone(),
            r.variable.clone(),
            r.metric.clone(),
            opt(r.baseline),
            opt(r.swept),
            opt(r.difference),
        ])
        .expect("csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
}

fn pooled_csv(param: SweepParam, report: &SensitivityReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "param",
        "value",
        "variable",
        "l_selected",
        "n_states",
        "h_mu",
        "C_mu",
        "E",
    ])
    .expect("csv write");
    for point in &report.points {
        for p in &point.pooled {
            w.write_record([
                param.name().to_string(),
                point.label.clone(),
                p.variable.clone(),
                p.l_selected.map(|x| x.to_string()).unwrap_or_default(),
                p.n_states.map(|x| x.to_string()).unwrap_or_default(),
                opt(p.h_mu),
                opt(p.c_mu),
                opt(p.e),
            ])
            .expect("csv write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 csv")
}

fn entry(point: &SweepPoint, file: String) -> SweepEntry {
    SweepEntry {
        value: point.label.clone(),
        config_hash: content_hash(&point.config.echo()),
        binning: point.run.pooled_binning.clone(),
        pooled: point.pooled.clone(),
        signatures_file: file,
    }
}

pub fn write_sensitivity(
    dir: &Path,
    cfg: &RunConfig,
    seed_from_env: bool,
    input_bytes: &[u8],
    report: &SensitivityReport,
) -> Result<(), CliError> {
    let param = report.param;
    let codecs = &cfg.proxies.codecs;
    let baseline_file = "signatures_baseline.csv".to_string();
    write_file(
        &dir.join(&baseline_file),
        &tables::signatures_csv(&report.baseline.run.signatures, codecs),
    )?;
    let mut sweep = Vec::new();
    for point in &report.points {
        let file = format!("signatures_{}_{}.csv", param.name(), point.label);
        write_file(
            &dir.join(&file),
            &tables::signatures_csv(&point.run.signatures, codecs),
        )?;
        sweep.push(entry(point, file));
    }
    write_file(
        &dir.join("sensitivity_deltas.csv"),
        &deltas_csv(param, &report.deltas),
    )?;
    write_file(
        &dir.join("sensitivity_pooled.csv"),
        &pooled_csv(param, report),
    )?;

    let echo = cfg.echo();
    let manifest = SensitivityManifest {
        tool: ToolInfo::default(),
        command: "sensitivity".into(),
        param,
        config_hash: content_hash(&echo),
        config: echo,
        input_sha256: sha256_hex(input_bytes),
        estimators: Estimators::default(),
        codecs: codec_table(codecs),
        cluster_seed: cfg.cluster.seed,
        seed_source: if seed_from_env {
            SEED_ENV.into()
        } else {
            "config".into()
        },
        baseline: entry(&report.baseline, baseline_file),
        sweep,
    };
    write_file(&dir.join("manifest.json"), &pretty_json(&manifest))
}
