//! The three analytical levels: per-dyad signatures (micro), covariate strata
//! (meso) and the pooled machine (macro), plus feature standardization and
//! k-means clustering of dyads.

mod features;
mod kmeans;
mod stratify;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Dataset, IngestError};
use crate::machine::{self, EpsilonMachine, MachineError, MachineMetrics, MachineParams};
use crate::proxies::{self, Codec, ProxyError, ProxyMetrics};
use crate::symbolize::{self, BinningSpec, FitScope, Strategy, SymbolSeries, SymbolizeError};

pub use features::{zscore_features, FeatureMatrix};
pub use kmeans::{kmeans_cluster, ClusterAssignment, MAX_LLOYD_ITERATIONS};
pub use stratify::{stratify, MetricSummary, StratumReport, StratumSummary};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScopeError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("variable `{variable}`: {source}")]
    Symbolize {
        variable: String,
        source: SymbolizeError,
    },
    #[error("{scope}: {source}")]
    Machine { scope: String, source: MachineError },
    #[error("{scope}: {source}")]
    Proxy { scope: String, source: ProxyError },
    #[error("unknown covariate `{0}`")]
    UnknownCovariate(String),
    #[error("need at least 2 dyads with complete feature rows, found {0}")]
    NoCompleteRows(usize),
    #[error("k={k} exceeds the {rows} clusterable rows")]
    KTooLarge { k: usize, rows: usize },
    #[error("k must be at least 1")]
    InvalidK,
}

/// Metrics that enter signatures, strata, heatmaps and the feature matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "h_mu")]
    HMu,
    #[serde(rename = "C_mu")]
    CMu,
    #[serde(rename = "E")]
    E,
    #[serde(rename = "lz78_normalized")]
    Lz78,
    #[serde(rename = "bps_min")]
    BpsMin,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::HMu,
        Metric::CMu,
        Metric::E,
        Metric::Lz78,
        Metric::BpsMin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::HMu => "h_mu",
            Metric::CMu => "C_mu",
            Metric::E => "E",
            Metric::Lz78 => "lz78_normalized",
            Metric::BpsMin => "bps_min",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableConfig {
    pub name: String,
    pub strategy: Strategy,
    /// Alphabet size; ignored for binary.
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_k() -> usize {
    4
}

impl VariableConfig {
    pub fn new(name: &str, strategy: Strategy, k: usize) -> Self {
        VariableConfig {
            name: name.to_string(),
            strategy,
            k,
        }
    }

    pub fn defaults() -> Vec<VariableConfig> {
        vec![
            VariableConfig::new("efforts", Strategy::Quantile, 4),
            VariableConfig::new("wkb", Strategy::Quantile, 4),
            VariableConfig::new("hrsncared", Strategy::Hurdle, 4),
            VariableConfig::new("overwhelmed", Strategy::Binary, 2),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub variables: Vec<VariableConfig>,
    pub machine: MachineParams,
    pub codecs: Vec<Codec>,
    pub fit_scope: FitScope,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            variables: VariableConfig::defaults(),
            machine: MachineParams::default(),
            codecs: Codec::ALL.to_vec(),
            fit_scope: FitScope::Pooled,
        }
    }
}

/// One row per analyzed (dyad, variable). Machine fields are `None` when the
/// series is shorter than the minimum length or reconstruction failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexitySignature {
    pub dyad_id: String,
    pub variable: String,
    pub n: usize,
    pub h_mu: Option<f64>,
    pub c_mu: Option<f64>,
    pub e: Option<f64>,
    pub l_selected: Option<usize>,
    pub n_states: Option<usize>,
    pub l_block: Option<usize>,
    pub lz78_phrases: usize,
    pub lz78_normalized: f64,
    pub bps: BTreeMap<String, f64>,
    pub bps_min: f64,
    pub trivial: bool,
    pub low_confidence: bool,
}

impl ComplexitySignature {
    pub fn metric(&self, m: Metric) -> Option<f64> {
        let v = match m {
            Metric::HMu => self.h_mu,
            Metric::CMu => self.c_mu,
            Metric::E => self.e,
            Metric::Lz78 => Some(self.lz78_normalized),
            Metric::BpsMin => Some(self.bps_min),
        };
        v.filter(|x| x.is_finite())
    }
}

/// A per-series problem that did not stop the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesNote {
    pub dyad_id: String,
    pub variable: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DyadMachine {
    pub dyad_id: String,
    pub variable: String,
    pub machine: EpsilonMachine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignatureRun {
    pub signatures: Vec<ComplexitySignature>,
    /// Edges fitted on all dyads, per variable.
    pub pooled_binning: BTreeMap<String, BinningSpec>,
    /// Per-dyad edges, only populated under [`FitScope::PerSeries`].
    pub series_binning: BTreeMap<String, BTreeMap<String, BinningSpec>>,
    pub machines: Vec<DyadMachine>,
    pub notes: Vec<SeriesNote>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PooledResult {
    pub variable: String,
    pub binning: BinningSpec,
    pub series: SymbolSeries,
    pub machine: EpsilonMachine,
    pub metrics: MachineMetrics,
    pub proxies: ProxyMetrics,
    pub bic: Vec<f64>,
}

fn symbolize_err(variable: &str) -> impl Fn(SymbolizeError) -> ScopeError + '_ {
    move |source| ScopeError::Symbolize {
        variable: variable.to_string(),
        source,
    }
}

/// Fits one variable's binning on the pooled values of all dyads.
pub fn fit_pooled_binning(
    ds: &Dataset,
    var: &VariableConfig,
    fit_scope: FitScope,
) -> Result<BinningSpec, ScopeError> {
    let values = ds.pooled_values(&var.name)?;
    symbolize::fit(&values, var.strategy, var.k, fit_scope).map_err(symbolize_err(&var.name))
}

/// One segment per dyad (dyad id ascending), each symbolized with `spec`.
pub fn pooled_series(
    ds: &Dataset,
    variable: &str,
    spec: &BinningSpec,
) -> Result<SymbolSeries, ScopeError> {
    let mut segments = Vec::with_capacity(ds.n_dyads());
    for dyad in ds.dyad_ids() {
        let raw = ds.extract_series(dyad, variable)?;
        segments
            .push(symbolize::symbolize_values(&raw.values, spec).map_err(symbolize_err(variable))?);
    }
    SymbolSeries::new(spec.alphabet_size, segments, format!("pooled:{variable}"))
        .map_err(symbolize_err(variable))
}

/// Binning applied to one dyad's series under the configured fit scope.
fn series_spec(
    values: &[f64],
    var: &VariableConfig,
    pooled: &BinningSpec,
    fit_scope: FitScope,
) -> Result<BinningSpec, SymbolizeError> {
    match fit_scope {
        FitScope::Pooled => Ok(pooled.clone()),
        FitScope::PerSeries => symbolize::fit(values, var.strategy, var.k, FitScope::PerSeries),
    }
}

struct SeriesOutcome {
    signature: ComplexitySignature,
    spec: BinningSpec,
    machine: Option<EpsilonMachine>,
    note: Option<String>,
}

fn analyze_series(
    ds: &Dataset,
    dyad: &str,
    var: &VariableConfig,
    pooled: &BinningSpec,
    cfg: &AnalysisConfig,
) -> Result<SeriesOutcome, ScopeError> {
    let raw = ds.extract_series(dyad, &var.name)?;
    let spec =
        series_spec(&raw.values, var, pooled, cfg.fit_scope).map_err(symbolize_err(&var.name))?;
    let series = symbolize::apply_binning(&raw.values, &spec, format!("{dyad}/{}", var.name))
        .map_err(symbolize_err(&var.name))?;
    let scope = format!("{dyad}/{}", var.name);
    let prox =
        proxies::compute_proxies(&series, &cfg.codecs).map_err(|source| ScopeError::Proxy {
            scope: scope.clone(),
            source,
        })?;

    let (metrics, machine, note) = match machine::reconstruct(&series, &cfg.machine) {
        Ok(r) => (Some(r.metrics), Some(r.machine), None),
        Err(e @ MachineError::SeriesTooShort { .. }) => {
            (None, None, Some(format!("proxies only: {e}")))
        }
        Err(e) => (None, None, Some(format!("reconstruction failed: {e}"))),
    };

    let signature = ComplexitySignature {
        dyad_id: dyad.to_string(),
        variable: var.name.clone(),
        n: series.total_len(),
        h_mu: metrics.as_ref().map(|m| m.h_mu),
        c_mu: metrics.as_ref().map(|m| m.c_mu),
        e: metrics.as_ref().map(|m| m.e),
        l_selected: metrics.as_ref().map(|m| m.l_selected),
        n_states: metrics.as_ref().map(|m| m.n_states),
        l_block: metrics.as_ref().map(|m| m.l_block),
        lz78_phrases: prox.lz78_phrases,
        lz78_normalized: prox.lz78_normalized,
        bps_min: prox.bps_min,
        trivial: metrics
            .as_ref()
            .map_or(series.symbols_used() <= 1, |m| m.trivial),
        low_confidence: metrics.as_ref().is_none_or(|m| m.low_confidence) || prox.low_confidence,
        bps: prox.bps,
    };
    Ok(SeriesOutcome {
        signature,
        spec,
        machine,
        note,
    })
}

/// Signatures for every dyad × configured variable, sorted by dyad id then
/// variable order in the config. Per-series work runs in parallel.
pub fn build_signatures(ds: &Dataset, cfg: &AnalysisConfig) -> Result<SignatureRun, ScopeError> {
    let mut pooled_binning = BTreeMap::new();
    for var in &cfg.variables {
        pooled_binning.insert(
            var.name.clone(),
            fit_pooled_binning(ds, var, cfg.fit_scope)?,
        );
    }
    let jobs: Vec<(&str, &VariableConfig)> = ds
        .dyad_ids()
        .flat_map(|d| cfg.variables.iter().map(move |v| (d, v)))
        .collect();
    let outcomes: Vec<SeriesOutcome> = jobs
        .par_iter()
        .map(|&(dyad, var)| analyze_series(ds, dyad, var, &pooled_binning[&var.name], cfg))
        .collect::<Result<_, _>>()?;

    let mut run = SignatureRun {
        signatures: Vec::with_capacity(outcomes.len()),
        pooled_binning,
        series_binning: BTreeMap::new(),
        machines: Vec::new(),
        notes: Vec::new(),
    };
    for o in outcomes {
        let dyad = o.signature.dyad_id.clone();
        let variable = o.signature.variable.clone();
        if cfg.fit_scope == FitScope::PerSeries {
            run.series_binning
                .entry(variable.clone())
                .or_default()
                .insert(dyad.clone(), o.spec);
        }
        if let Some(machine) = o.machine {
            run.machines.push(DyadMachine {
                dyad_id: dyad.clone(),
                variable: variable.clone(),
                machine,
            });
        }
        if let Some(message) = o.note {
            run.notes.push(SeriesNote {
                dyad_id: dyad,
                variable,
                message,
            });
        }
        run.signatures.push(o.signature);
    }
    Ok(run)
}

/// Pooled (global) machine for one variable. Under per-series fitting each
/// segment uses its dyad's own edges and the alphabet is the largest one.
pub fn analyze_pooled(
    ds: &Dataset,
    var: &VariableConfig,
    cfg: &AnalysisConfig,
) -> Result<PooledResult, ScopeError> {
    let binning = fit_pooled_binning(ds, var, cfg.fit_scope)?;
    let series = match cfg.fit_scope {
        FitScope::Pooled => pooled_series(ds, &var.name, &binning)?,
        FitScope::PerSeries => {
            let mut segments = Vec::new();
            let mut k = 1;
            for dyad in ds.dyad_ids() {
                let raw = ds.extract_series(dyad, &var.name)?;
                let spec = series_spec(&raw.values, var, &binning, cfg.fit_scope)
                    .map_err(symbolize_err(&var.name))?;
                k = k.max(spec.alphabet_size);
                segments.push(
                    symbolize::symbolize_values(&raw.values, &spec)
                        .map_err(symbolize_err(&var.name))?,
                );
            }
            SymbolSeries::new(k, segments, format!("pooled:{}", var.name))
                .map_err(symbolize_err(&var.name))?
        }
    };
    let scope = format!("pooled/{}", var.name);
    let r = machine::reconstruct(&series, &cfg.machine).map_err(|source| ScopeError::Machine {
        scope: scope.clone(),
        source,
    })?;
    let proxies = proxies::compute_proxies(&series, &cfg.codecs)
        .map_err(|source| ScopeError::Proxy { scope, source })?;
    Ok(PooledResult {
        variable: var.name.clone(),
        binning,
        series,
        machine: r.machine,
        metrics: r.metrics,
        proxies,
        bic: r.order_selection.bic,
    })
}

/// Long-form `(dyad, variable, metric, value)` rows for heatmaps. Null
/// metrics are kept as `None`.
pub fn heatmap_rows(sigs: &[ComplexitySignature]) -> Vec<(String, String, String, Option<f64>)> {
    let mut rows = Vec::new();
    for s in sigs {
        for m in Metric::ALL {
            rows.push((
                s.dyad_id.clone(),
                s.variable.clone(),
                m.name().to_string(),
                s.metric(m),
            ));
        }
        for (codec, &v) in &s.bps {
            rows.push((
                s.dyad_id.clone(),
                s.variable.clone(),
                format!("bps_{codec}"),
                Some(v),
            ));
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{
        gen_dyad_dataset, DatasetSpec, ProcessKind, RegimeOverrides, VariableRegimes,
    };

    fn dataset(n_dyads: usize, ticks: usize) -> Dataset {
        let mut spec = DatasetSpec {
            n_dyads,
            ticks,
            seed: 5,
            default_regime: VariableRegimes::default(),
            dyad_regimes: BTreeMap::new(),
        };
        spec.dyad_regimes.insert(
            "D0001".into(),
            RegimeOverrides {
                efforts: Some(ProcessKind::Periodic {
                    pattern: vec![0, 3],
                }),
                ..Default::default()
            },
        );
        gen_dyad_dataset(&spec).unwrap()
    }

    #[test]
    fn one_signature_per_dyad_variable() {
        let ds = dataset(3, 400);
        let run = build_signatures(&ds, &AnalysisConfig::default()).unwrap();
        assert_eq!(run.signatures.len(), 12);
        assert!(run.signatures.iter().all(|s| s.h_mu.is_some()));
        let order: Vec<_> = run
            .signatures
            .iter()
            .map(|s| (s.dyad_id.as_str(), s.variable.as_str()))
            .collect();
        assert_eq!(order[0], ("D0001", "efforts"));
        assert_eq!(order[4], ("D0002", "efforts"));
    }

    #[test]
    fn periodic_dyad_has_zero_entropy_rate() {
        let ds = dataset(3, 400);
        let run = build_signatures(&ds, &AnalysisConfig::default()).unwrap();
        let s = &run.signatures[0];
        assert_eq!(
            (s.dyad_id.as_str(), s.variable.as_str()),
            ("D0001", "efforts")
        );
        assert!(s.h_mu.unwrap() < 1e-9);
        assert!((s.c_mu.unwrap() - 1.0).abs() < 0.01);
    }

    #[test]
    fn short_series_yield_proxies_only() {
        let ds = dataset(2, 50);
        let run = build_signatures(&ds, &AnalysisConfig::default()).unwrap();
        for s in &run.signatures {
            assert!(s.h_mu.is_none() && s.c_mu.is_none() && s.e.is_none());
            assert!(s.low_confidence);
            assert!(s.lz78_phrases > 0 && s.bps_min > 0.0);
        }
        assert_eq!(run.notes.len(), 8);
    }

    #[test]
    fn per_series_fit_scope_records_edges() {
        let ds = dataset(2, 300);
        let cfg = AnalysisConfig {
            fit_scope: FitScope::PerSeries,
            ..Default::default()
        };
        let run = build_signatures(&ds, &cfg).unwrap();
        assert_eq!(run.series_binning["efforts"].len(), 2);
        let pooled = analyze_pooled(&ds, &cfg.variables[0], &cfg).unwrap();
        assert_eq!(pooled.series.segments().len(), 2);
    }

    #[test]
    fn pooled_series_segments() {
        let text =
            "id_caregiver,tick,day,hour,overwhelmed\nB,0,0,0,1\nA,0,0,0,0\nA,1,0,1,1\nB,1,0,1,1\n";
        let ds = crate::ingest::parse_records(text).unwrap();
        let spec = BinningSpec::binary(FitScope::Pooled);
        let s = pooled_series(&ds, "overwhelmed", &spec).unwrap();
        assert_eq!(s.segments(), &[vec![0, 1], vec![1, 1]]);
        assert!(matches!(
            pooled_series(&ds, "efforts", &spec),
            Err(ScopeError::Ingest(IngestError::UnknownVariable(_)))
        ));
    }

    #[test]
    fn heatmap_is_long_form() {
        let ds = dataset(2, 250);
        let run = build_signatures(&ds, &AnalysisConfig::default()).unwrap();
        let rows = heatmap_rows(&run.signatures);
        assert_eq!(rows.len(), run.signatures.len() * (Metric::ALL.len() + 3));
    }
}
