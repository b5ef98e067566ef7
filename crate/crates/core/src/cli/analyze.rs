//! The `analyze` pipeline: signatures, strata, clusters and pooled machines,
//! plus the reproducibility manifest.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{content_hash, sha256_hex, RunConfig, SEED_ENV};
use super::{tables, write_file, CliError};
use crate::ingest::{self, Dataset};
use crate::proxies::Codec;
use crate::scopes::{
    self, kmeans_cluster, stratify, zscore_features, ClusterAssignment, FeatureMatrix,
    PooledResult, ScopeError, SeriesNote, SignatureRun, StratumReport,
};
use crate::symbolize::BinningSpec;
use crate::synthetic::RNG_NAME;

pub const TOOL_NAME: &str = "causalkit";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Byte layout fed to the compressors.
pub const SYMBOL_SERIALIZATION: &str =
    "one byte per symbol (the symbol id), segments concatenated in dyad order";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Estimators {
    pub quantile_edges: String,
    pub order_selection: String,
    pub clustering: String,
    pub determinization: String,
    pub entropy_rate: String,
    pub statistical_complexity: String,
    pub excess_entropy: String,
    pub lz78: String,
    pub compression: String,
    pub kmeans: String,
}

impl Default for Estimators {
    fn default() -> Self {
        let s = |x: &str| x.to_string();
        Estimators {
            quantile_edges: s("nearest-rank quantiles at j/k; duplicate edges and edges at the sample maximum dropped"),
            order_selection: s("BIC = -2 LL + k^L (k-1) ln N on positions t >= L_max of every segment; ties to smaller L"),
            clustering: s("greedy L1 clustering of next-symbol distributions by descending context count; contexts below min_count attached to the nearest prototype"),
            determinization: s("split states on the first symbol with disagreeing observed successors until unifilar"),
            entropy_rate: s("sum over states of weight * H(next symbol | state), bits"),
            statistical_complexity: s("Shannon entropy of empirical state weights, bits"),
            excess_entropy: s("block entropy H(L_block) - L_block * h_mu, floored at 0"),
            lz78: s("LZ78 incremental-parse phrase count c, normalized c * log_k(n) / n"),
            compression: s("bits per symbol = 8 * compressed bytes / n, container headers included"),
            kmeans: s("Lloyd iterations on z-scored features; seeded first centroid then farthest-point; ties to lowest index"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl Default for ToolInfo {
    fn default() -> Self {
        ToolInfo {
            name: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputInfo {
    pub sha256: String,
    pub n_records: usize,
    pub n_dyads: usize,
    pub variables: Vec<String>,
    pub covariates: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecInfo {
    pub level: u32,
    pub container: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderReport {
    pub pooled_l_selected: Option<usize>,
    pub pooled_l_block: Option<usize>,
    pub pooled_bic: Vec<f64>,
    /// `(l_selected, l_block)` per dyad with a reconstructed machine.
    pub per_dyad: BTreeMap<String, (usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RngInfo {
    pub name: String,
    pub cluster_seed: u64,
    pub seed_source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterInfo {
    pub k: usize,
    pub status: String,
    pub rows: usize,
    pub excluded_rows: Vec<String>,
    pub dropped_columns: Vec<String>,
    pub iterations: Option<usize>,
    pub inertia: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: ToolInfo,
    pub command: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub input: InputInfo,
    pub binning: BTreeMap<String, BinningSpec>,
    pub series_binning: BTreeMap<String, BTreeMap<String, BinningSpec>>,
    pub selected_orders: BTreeMap<String, OrderReport>,
    pub estimators: Estimators,
    pub codecs: BTreeMap<String, CodecInfo>,
    pub symbol_serialization: String,
    pub rng: RngInfo,
    pub clustering: ClusterInfo,
    pub notes: Vec<SeriesNote>,
}

impl RunManifest {
    /// Recomputes the hash of the echoed config.
    pub fn hash_matches(&self) -> bool {
        content_hash(&self.config) == self.config_hash
    }
}

pub fn codec_table(codecs: &[Codec]) -> BTreeMap<String, CodecInfo> {
    codecs
        .iter()
        .map(|c| {
            (
                c.name().to_string(),
                CodecInfo {
                    level: c.level(),
                    container: c.container().to_string(),
                },
            )
        })
        .collect()
}

/// Everything computed by one analysis, before serialization.
#[derive(Debug, Clone)]
pub struct AnalysisOutput {
    pub run: SignatureRun,
    pub pooled: Vec<PooledResult>,
    pub strata: Vec<StratumReport>,
    pub features: Option<FeatureMatrix>,
    pub clusters: Option<ClusterAssignment>,
    pub cluster_status: String,
    pub notes: Vec<SeriesNote>,
}

pub fn load_dataset(text: &str, cfg: &RunConfig) -> Result<Dataset, CliError> {
    let names: Vec<String> = cfg.variables.iter().map(|v| v.name.clone()).collect();
    let ds = ingest::parse_records_with(text, &names)?;
    if let Some(missing) = names.iter().find(|n| !ds.variables().contains(n)) {
        return Err(CliError::data(format!(
            "input has no column for configured variable `{missing}`"
        )));
    }
    Ok(ds)
}

/// Runs the full three-level analysis on a loaded dataset.
pub fn analyze_dataset(cfg: &RunConfig, ds: &Dataset) -> Result<AnalysisOutput, CliError> {
    let analysis = cfg.analysis();
    let run = scopes::build_signatures(ds, &analysis)?;
    let mut notes = run.notes.clone();

    let mut pooled = Vec::new();
    for var in &analysis.variables {
        match scopes::analyze_pooled(ds, var, &analysis) {
            Ok(p) => pooled.push(p),
            Err(e @ ScopeError::Machine { .. }) => notes.push(SeriesNote {
                dyad_id: "pooled".into(),
                variable: var.name.clone(),
                message: e.to_string(),
            }),
            Err(e) => return Err(e.into()),
        }
    }

    let covariates: Vec<String> = if cfg.stratify_by.is_empty() {
        ds.covariate_names().to_vec()
    } else {
        cfg.stratify_by.clone()
    };
    let strata = covariates
        .iter()
        .map(|c| stratify(&run.signatures, ds, c))
        .collect::<Result<Vec<_>, _>>()?;

    let (features, clusters, cluster_status) = match zscore_features(&run.signatures) {
        Ok(fm) => match kmeans_cluster(&fm, cfg.cluster.k, cfg.cluster.seed) {
            Ok(a) => {
                let status = if a.converged {
                    "converged"
                } else {
                    "iteration limit reached"
                };
                (Some(fm), Some(a), status.to_string())
            }
            Err(e) => (Some(fm), None, format!("skipped: {e}")),
        },
        Err(e) => (None, None, format!("skipped: {e}")),
    };
    if clusters.is_none() {
        log::warn!("clustering {cluster_status}");
    }

    Ok(AnalysisOutput {
        run,
        pooled,
        strata,
        features,
        clusters,
        cluster_status,
        notes,
    })
}

pub fn build_manifest(
    command: &str,
    cfg: &RunConfig,
    seed_from_env: bool,
    input_bytes: &[u8],
    ds: &Dataset,
    out: &AnalysisOutput,
) -> RunManifest {
    let echo = cfg.echo();
    let mut selected_orders: BTreeMap<String, OrderReport> = BTreeMap::new();
    for var in &cfg.variables {
        let pooled = out.pooled.iter().find(|p| p.variable == var.name);
        selected_orders.insert(
            var.name.clone(),
            OrderReport {
                pooled_l_selected: pooled.map(|p| p.metrics.l_selected),
                pooled_l_block: pooled.map(|p| p.metrics.l_block),
                pooled_bic: pooled.map(|p| p.bic.clone()).unwrap_or_default(),
                per_dyad: BTreeMap::new(),
            },
        );
    }
    for s in &out.run.signatures {
        if let (Some(l), Some(b)) = (s.l_selected, s.l_block) {
            if let Some(report) = selected_orders.get_mut(&s.variable) {
                report.per_dyad.insert(s.dyad_id.clone(), (l, b));
            }
        }
    }
    let column_name = |(v, m): &(String, scopes::Metric)| format!("{v}/{}", m.name());
    RunManifest {
        tool: ToolInfo::default(),
        command: command.to_string(),
        config_hash: content_hash(&echo),
        config: echo,
        input: InputInfo {
            sha256: sha256_hex(input_bytes),
            n_records: ds.len(),
            n_dyads: ds.n_dyads(),
            variables: ds.variables().to_vec(),
            covariates: ds.covariate_names().to_vec(),
        },
        binning: out.run.pooled_binning.clone(),
        series_binning: out.run.series_binning.clone(),
        selected_orders,
        estimators: Estimators::default(),
        codecs: codec_table(&cfg.proxies.codecs),
        symbol_serialization: SYMBOL_SERIALIZATION.into(),
        rng: RngInfo {
            name: RNG_NAME.into(),
            cluster_seed: cfg.cluster.seed,
            seed_source: if seed_from_env {
                SEED_ENV.into()
            } else {
                "config".into()
            },
        },
        clustering: ClusterInfo {
            k: cfg.cluster.k,
            status: out.cluster_status.clone(),
            rows: out.features.as_ref().map_or(0, FeatureMatrix::n_rows),
            excluded_rows: out
                .features
                .as_ref()
                .map(|f| f.excluded_rows.clone())
                .unwrap_or_default(),
            dropped_columns: out
                .features
                .as_ref()
                .map(|f| f.dropped_columns.iter().map(column_name).collect())
                .unwrap_or_default(),
            iterations: out.clusters.as_ref().map(|a| a.iterations),
            inertia: out.clusters.as_ref().map(|a| a.inertia),
        },
        notes: out.notes.clone(),
    }
}

fn file_stem(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn pretty_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// Writes every artifact of an analysis into `dir`.
pub fn write_outputs(
    dir: &Path,
    cfg: &RunConfig,
    manifest: &RunManifest,
    out: &AnalysisOutput,
    emit_dyad_machines: bool,
) -> Result<(), CliError> {
    let codecs = &cfg.proxies.codecs;
    write_file(&dir.join("manifest.json"), &pretty_json(manifest))?;
    write_file(
        &dir.join("signatures.csv"),
        &tables::signatures_csv(&out.run.signatures, codecs),
    )?;
    write_file(&dir.join("strata.csv"), &tables::strata_csv(&out.strata))?;
    write_file(
        &dir.join("clusters.csv"),
        &tables::clusters_csv(out.clusters.as_ref()),
    )?;
    write_file(
        &dir.join("heatmap.csv"),
        &tables::heatmap_csv(&out.run.signatures),
    )?;

    let mut pooled_doc = serde_json::Map::new();
    let mut dot = String::new();
    for p in &out.pooled {
        pooled_doc.insert(
            p.variable.clone(),
            json!({
                "binning": p.binning,
                "metrics": p.metrics,
                "proxies": p.proxies,
                "bic": p.bic,
                "machine": p.machine.to_document(),
            }),
        );
        dot.push_str(&p.machine.to_dot(&format!("pooled_{}", p.variable)));
    }
    write_file(&dir.join("pooled_machine.json"), &pretty_json(&pooled_doc))?;
    write_file(&dir.join("pooled_machine.dot"), &dot)?;

    let results = json!({
        "signatures": out.run.signatures,
        "pooled": out.pooled.iter().map(|p| json!({
            "variable": p.variable,
            "metrics": p.metrics,
            "proxies": p.proxies,
            "bic": p.bic,
        })).collect::<Vec<_>>(),
        "strata": out.strata,
        "features": out.features,
        "clusters": out.clusters,
        "notes": out.notes,
    });
    write_file(&dir.join("results.json"), &pretty_json(&results))?;

    if emit_dyad_machines {
        let machines_dir = dir.join("machines");
        for m in &out.run.machines {
            let name = format!("{}__{}.json", file_stem(&m.dyad_id), file_stem(&m.variable));
            let doc = json!({
                "dyad_id": m.dyad_id,
                "variable": m.variable,
                "machine": m.machine.to_document(),
            });
            write_file(&machines_dir.join(name), &pretty_json(&doc))?;
        }
    }
    Ok(())
}
