//! Validation processes with exactly known metrics, and schema-shaped
//! synthetic dyad datasets.
//!
//! Every process is represented internally as a unifilar presentation (states
//! with emission distributions and deterministic successors). Sampling uses
//! ChaCha8 seeded with `seed_from_u64`; uniforms are the top 53 bits of
//! `next_u64` scaled by 2^-53, so sequences are reproducible across platforms.

use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::info::entropy_bits;
use crate::ingest::{Dataset, IngestError, Record};
use crate::symbolize::{Symbol, SymbolSeries};

pub const RNG_NAME: &str =
    "ChaCha8 (rand_chacha 0.3, seed_from_u64; uniform = (next_u64 >> 11) * 2^-53)";

/// Largest block space enumerated for exact excess entropy.
pub const MAX_BLOCK_SPACE: f64 = 1e6;

const ROW_TOLERANCE: f64 = 1e-12;
const STATIONARY_TOLERANCE: f64 = 1e-13;
const MAX_POWER_ITERATIONS: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid process spec: {0}")]
    InvalidSpec(String),
    #[error("block space {alphabet}^{l_block} exceeds {MAX_BLOCK_SPACE}")]
    BlockSpaceTooLarge { alphabet: usize, l_block: usize },
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessKind {
    Iid {
        probs: Vec<f64>,
    },
    Periodic {
        pattern: Vec<Symbol>,
    },
    /// After a 1 emit 0; after a 0 emit 1 with probability `p`, else 0.
    GoldenMean {
        p: f64,
    },
    /// Order-1 chain over symbols with a row-stochastic matrix.
    Markov1 {
        matrix: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    #[serde(flatten)]
    pub kind: ProcessKind,
    pub seed: u64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMethod {
    Analytic,
    BruteForceBlocks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleMetrics {
    pub h_mu: f64,
    pub c_mu: f64,
    pub e: f64,
    pub n_states: usize,
    pub method: OracleMethod,
}

fn invalid(msg: impl Into<String>) -> SynthError {
    SynthError::InvalidSpec(msg.into())
}

fn check_row(row: &[f64], what: &str) -> Result<(), SynthError> {
    if row.is_empty() {
        return Err(invalid(format!("{what} is empty")));
    }
    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(invalid(format!(
            "{what} has a negative or non-finite entry"
        )));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_TOLERANCE {
        return Err(invalid(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

impl ProcessKind {
    pub fn validate(&self) -> Result<(), SynthError> {
        match self {
            ProcessKind::Iid { probs } => check_row(probs, "probability vector"),
            ProcessKind::Periodic { pattern } => {
                if pattern.is_empty() {
                    Err(invalid("periodic pattern is empty"))
                } else {
                    Ok(())
                }
            }
            ProcessKind::GoldenMean { p } => {
                if (0.0..=1.0).contains(p) {
                    Ok(())
                } else {
                    Err(invalid(format!("golden mean p={p} outside [0, 1]")))
                }
            }
            ProcessKind::Markov1 { matrix } => {
                if matrix.is_empty() {
                    return Err(invalid("transition matrix is empty"));
                }
                for (i, row) in matrix.iter().enumerate() {
                    if row.len() != matrix.len() {
                        return Err(invalid(format!("matrix row {i} has length {}", row.len())));
                    }
                    check_row(row, &format!("matrix row {i}"))?;
                }
                Ok(())
            }
        }
    }

    pub fn alphabet_size(&self) -> usize {
        match self {
            ProcessKind::Iid { probs } => probs.len(),
            ProcessKind::Periodic { pattern } => {
                pattern.iter().copied().max().map_or(1, |m| m as usize + 1)
            }
            ProcessKind::GoldenMean { .. } => 2,
            ProcessKind::Markov1 { matrix } => matrix.len(),
        }
    }

    fn presentation(&self) -> Presentation {
        match self {
            ProcessKind::Iid { probs } => Presentation {
                emit: vec![probs.clone()],
                next: vec![vec![0; probs.len()]],
                fixed_start: None,
            },
            ProcessKind::Periodic { pattern } => {
                let k = self.alphabet_size();
                let period = pattern.len();
                let emit = pattern
                    .iter()
                    .map(|&x| {
                        let mut row = vec![0.0; k];
                        row[x as usize] = 1.0;
                        row
                    })
                    .collect();
                let next = (0..period).map(|i| vec![(i + 1) % period; k]).collect();
                Presentation {
                    emit,
                    next,
                    fixed_start: Some(0),
                }
            }
            ProcessKind::GoldenMean { p } => Presentation {
                emit: vec![vec![1.0 - p, *p], vec![1.0, 0.0]],
                next: vec![vec![0, 1], vec![0, 1]],
                fixed_start: None,
            },
            ProcessKind::Markov1 { matrix } => {
                let k = matrix.len();
                Presentation {
                    emit: matrix.clone(),
                    next: (0..k).map(|_| (0..k).collect()).collect(),
                    fixed_start: None,
                }
            }
        }
    }
}

/// Unifilar presentation: state `s` emits `x` with probability `emit[s][x]`
/// and moves to `next[s][x]`.
struct Presentation {
    emit: Vec<Vec<f64>>,
    next: Vec<Vec<usize>>,
    fixed_start: Option<usize>,
}

impl Presentation {
    fn n_states(&self) -> usize {
        self.emit.len()
    }

    fn state_transition_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.n_states();
        let mut t = vec![vec![0.0; n]; n];
        for s in 0..n {
            for (x, &p) in self.emit[s].iter().enumerate() {
                t[s][self.next[s][x]] += p;
            }
        }
        t
    }

    /// Moore-style refinement: states are equivalent when their emission rows
    /// agree and every emitted symbol leads to equivalent states.
    fn minimal_classes(&self) -> Vec<usize> {
        let n = self.n_states();
        let mut class = vec![0usize; n];
        // initial classes by emission row
        let mut reps: Vec<usize> = Vec::new();
        for s in 0..n {
            match reps
                .iter()
                .position(|&r| rows_equal(&self.emit[r], &self.emit[s]))
            {
                Some(c) => class[s] = c,
                None => {
                    class[s] = reps.len();
                    reps.push(s);
                }
            }
        }
        loop {
            let mut keys: Vec<(usize, Vec<Option<usize>>)> = Vec::new();
            let mut refined = vec![0usize; n];
            for s in 0..n {
                let sig: Vec<Option<usize>> = self.emit[s]
                    .iter()
                    .enumerate()
                    .map(|(x, &p)| (p > 0.0).then(|| class[self.next[s][x]]))
                    .collect();
                let key = (class[s], sig);
                refined[s] = match keys.iter().position(|k| *k == key) {
                    Some(i) => i,
                    None => {
                        keys.push(key);
                        keys.len() - 1
                    }
                };
            }
            let done = keys.len() == class.iter().max().map_or(0, |m| m + 1);
            class = refined;
            if done {
                return class;
            }
        }
    }
}

fn rows_equal(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= ROW_TOLERANCE)
}

/// Stationary distribution of a row-stochastic matrix by power iteration on
/// the lazy chain `(T + I) / 2`, which shares its stationary vectors and is
/// aperiodic.
pub fn stationary_distribution(matrix: &[Vec<f64>]) -> Vec<f64> {
    let n = matrix.len();
    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..MAX_POWER_ITERATIONS {
        let mut next = vec![0.0; n];
        for (i, row) in matrix.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                next[j] += pi[i] * p;
            }
        }
        let mut change = 0.0;
        for j in 0..n {
            let lazy = 0.5 * (next[j] + pi[j]);
            change += (lazy - pi[j]).abs();
            next[j] = lazy;
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= total);
        pi = next;
        if change < STATIONARY_TOLERANCE {
            break;
        }
    }
    pi
}

struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Sampler { rng }
    }

    fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn categorical(&mut self, probs: &[f64]) -> usize {
        let u = self.uniform();
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > 0.0 {
                acc += p;
                last_positive = i;
                if u < acc {
                    return i;
                }
            }
        }
        last_positive
    }
}

fn sample(kind: &ProcessKind, n: usize, sampler: &mut Sampler) -> Vec<Symbol> {
    let pres = kind.presentation();
    let mut state = match pres.fixed_start {
        Some(s) => s,
        None => {
            let pi = stationary_distribution(&pres.state_transition_matrix());
            sampler.categorical(&pi)
        }
    };
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let x = if pres.fixed_start.is_some() {
            // deterministic emission
            pres.emit[state].iter().position(|&p| p > 0.0).unwrap_or(0)
        } else {
            sampler.categorical(&pres.emit[state])
        };
        out.push(x as Symbol);
        state = pres.next[state][x];
    }
    out
}

/// Seeded sample path of the process as a single-segment series.
pub fn generate(spec: &ProcessSpec) -> Result<SymbolSeries, SynthError> {
    spec.kind.validate()?;
    if spec.n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let mut sampler = Sampler::new(spec.seed, 0);
    let symbols = sample(&spec.kind, spec.n, &mut sampler);
    SymbolSeries::single(
        spec.kind.alphabet_size(),
        symbols,
        format!("synthetic:{}", kind_name(&spec.kind)),
    )
    .map_err(|e| invalid(e.to_string()))
}

fn kind_name(kind: &ProcessKind) -> &'static str {
    match kind {
        ProcessKind::Iid { .. } => "iid",
        ProcessKind::Periodic { .. } => "periodic",
        ProcessKind::GoldenMean { .. } => "golden_mean",
        ProcessKind::Markov1 { .. } => "markov1",
    }
}

/// Exact entropy (bits) of the length-`len` block distribution of a
/// stationary presentation.
fn exact_block_entropy(pres: &Presentation, pi: &[f64], len: usize) -> f64 {
    fn walk(pres: &Presentation, mass: &[f64], depth: usize, acc: &mut f64) {
        let p: f64 = mass.iter().sum();
        if p <= 0.0 {
            return;
        }
        if depth == 0 {
            *acc -= p * p.log2();
            return;
        }
        let k = pres.emit[0].len();
        for x in 0..k {
            let mut next = vec![0.0; mass.len()];
            let mut any = false;
            for (s, &m) in mass.iter().enumerate() {
                let e = pres.emit[s][x];
                if m > 0.0 && e > 0.0 {
                    next[pres.next[s][x]] += m * e;
                    any = true;
                }
            }
            if any {
                walk(pres, &next, depth - 1, acc);
            }
        }
    }
    let mut acc = 0.0;
    walk(pres, pi, len, &mut acc);
    acc.max(0.0)
}

/// Exact (h_mu, C_mu, E) of the process. E is H(L_block) - L_block * h_mu
/// from exact block probabilities (closed form 0 for iid).
pub fn exact_metrics(kind: &ProcessKind, l_block: usize) -> Result<OracleMetrics, SynthError> {
    kind.validate()?;
    if l_block < 1 {
        return Err(invalid("l_block must be at least 1"));
    }
    let pres = kind.presentation();
    let pi = stationary_distribution(&pres.state_transition_matrix());
    let h_mu: f64 = pi
        .iter()
        .zip(&pres.emit)
        .map(|(&w, row)| w * entropy_bits(row))
        .sum();

    let classes = pres.minimal_classes();
    let mut class_mass: BTreeMap<usize, f64> = BTreeMap::new();
    for (s, &w) in pi.iter().enumerate() {
        if w > STATIONARY_TOLERANCE {
            *class_mass.entry(classes[s]).or_default() += w;
        }
    }
    let weights: Vec<f64> = class_mass.values().copied().collect();
    let c_mu = entropy_bits(&weights);

    let (e, method) = match kind {
        ProcessKind::Iid { .. } => (0.0, OracleMethod::Analytic),
        _ => {
            let k = kind.alphabet_size();
            if (k as f64).powi(l_block as i32) > MAX_BLOCK_SPACE {
                return Err(SynthError::BlockSpaceTooLarge {
                    alphabet: k,
                    l_block,
                });
            }
            let h_block = exact_block_entropy(&pres, &pi, l_block);
            (
                h_block - l_block as f64 * h_mu,
                OracleMethod::BruteForceBlocks,
            )
        }
    };
    Ok(OracleMetrics {
        h_mu,
        c_mu,
        e,
        n_states: weights.len(),
        method,
    })
}

// ---------------------------------------------------------------------------
// Schema-shaped dyad datasets

pub const EFFORTS_LEVELS: [f64; 4] = [0.1, 0.4, 0.7, 1.0];
pub const WKB_LEVELS: [f64; 4] = [0.2, 0.4, 0.6, 0.8];
/// Level 0 is an exact zero so hurdle binning has explicit zero mass.
pub const HRSNCARED_LEVELS: [f64; 4] = [0.0, 1.0, 2.5, 4.0];
pub const OVERWHELMED_LEVELS: [f64; 2] = [0.0, 1.0];

pub const SYNTH_VARIABLES: [&str; 4] = ["efforts", "wkb", "hrsncared", "overwhelmed"];
pub const COVARIATE_CATALOG: [(&str, &[&str]); 3] = [
    ("mobility", &["low", "med", "high"]),
    ("occupation", &["yes", "no"]),
    ("stage", &["1", "2", "3"]),
];

fn levels(variable: &str) -> &'static [f64] {
    match variable {
        "efforts" => &EFFORTS_LEVELS,
        "wkb" => &WKB_LEVELS,
        "hrsncared" => &HRSNCARED_LEVELS,
        _ => &OVERWHELMED_LEVELS,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VariableRegimes {
    pub efforts: ProcessKind,
    pub wkb: ProcessKind,
    pub hrsncared: ProcessKind,
    pub overwhelmed: ProcessKind,
}

impl Default for VariableRegimes {
    fn default() -> Self {
        VariableRegimes {
            efforts: ProcessKind::Iid {
                probs: vec![0.25; 4],
            },
            wkb: ProcessKind::Markov1 {
                matrix: vec![
                    vec![0.7, 0.2, 0.1, 0.0],
                    vec![0.2, 0.6, 0.2, 0.0],
                    vec![0.0, 0.2, 0.6, 0.2],
                    vec![0.0, 0.1, 0.2, 0.7],
                ],
            },
            hrsncared: ProcessKind::Iid {
                probs: vec![0.4, 0.2, 0.2, 0.2],
            },
            overwhelmed: ProcessKind::Markov1 {
                matrix: vec![vec![0.9, 0.1], vec![0.3, 0.7]],
            },
        }
    }
}

impl VariableRegimes {
    fn get(&self, variable: &str) -> &ProcessKind {
        match variable {
            "efforts" => &self.efforts,
            "wkb" => &self.wkb,
            "hrsncared" => &self.hrsncared,
            _ => &self.overwhelmed,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeOverrides {
    pub efforts: Option<ProcessKind>,
    pub wkb: Option<ProcessKind>,
    pub hrsncared: Option<ProcessKind>,
    pub overwhelmed: Option<ProcessKind>,
}

impl RegimeOverrides {
    fn get(&self, variable: &str) -> Option<&ProcessKind> {
        match variable {
            "efforts" => self.efforts.as_ref(),
            "wkb" => self.wkb.as_ref(),
            "hrsncared" => self.hrsncared.as_ref(),
            _ => self.overwhelmed.as_ref(),
        }
    }
}

/// Synthetic panel definition: a default regime per variable and optional
/// per-dyad overrides keyed by dyad id (`D0001`, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub n_dyads: usize,
    pub ticks: usize,
    pub seed: u64,
    #[serde(default)]
    pub default_regime: VariableRegimes,
    #[serde(default)]
    pub dyad_regimes: BTreeMap<String, RegimeOverrides>,
}

pub fn dyad_id(index: usize) -> String {
    format!("D{:04}", index + 1)
}

impl DatasetSpec {
    pub fn regime_for(&self, dyad: &str, variable: &str) -> &ProcessKind {
        self.dyad_regimes
            .get(dyad)
            .and_then(|o| o.get(variable))
            .unwrap_or_else(|| self.default_regime.get(variable))
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_dyads < 1 {
            return Err(invalid("n_dyads must be at least 1"));
        }
        if self.ticks < 1 {
            return Err(invalid("ticks must be at least 1"));
        }
        let known: Vec<String> = (0..self.n_dyads).map(dyad_id).collect();
        if let Some(unknown) = self.dyad_regimes.keys().find(|d| !known.contains(d)) {
            return Err(invalid(format!(
                "regime override for unknown dyad `{unknown}`"
            )));
        }
        for dyad in &known {
            for var in SYNTH_VARIABLES {
                let kind = self.regime_for(dyad, var);
                kind.validate()
                    .map_err(|e| invalid(format!("{dyad}/{var}: {e}")))?;
                let max_levels = levels(var).len();
                if kind.alphabet_size() > max_levels {
                    return Err(invalid(format!(
                        "{dyad}/{var}: alphabet {} exceeds the {max_levels} available levels",
                        kind.alphabet_size()
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Generates a full-schema dataset. Dyad `i`, variable `v` samples from
/// RNG stream `8 i + v`; covariates use stream `8 i + 7`.
pub fn gen_dyad_dataset(spec: &DatasetSpec) -> Result<Dataset, SynthError> {
    spec.validate()?;
    let mut records = Vec::with_capacity(spec.n_dyads * spec.ticks);
    for i in 0..spec.n_dyads {
        let id = dyad_id(i);
        let series: Vec<Vec<f64>> = SYNTH_VARIABLES
            .iter()
            .enumerate()
            .map(|(v, var)| {
                let mut sampler = Sampler::new(spec.seed, 8 * i as u64 + v as u64);
                let table = levels(var);
                sample(spec.regime_for(&id, var), spec.ticks, &mut sampler)
                    .into_iter()
                    .map(|s| table[s as usize])
                    .collect()
            })
            .collect();
        let mut cov_sampler = Sampler::new(spec.seed, 8 * i as u64 + 7);
        let covariates: BTreeMap<String, String> = COVARIATE_CATALOG
            .iter()
            .map(|(name, options)| {
                let pick = (cov_sampler.uniform() * options.len() as f64) as usize;
                (
                    name.to_string(),
                    options[pick.min(options.len() - 1)].to_string(),
                )
            })
            .collect();
        for t in 0..spec.ticks {
            records.push(Record {
                id_caregiver: id.clone(),
                tick: t as u64,
                day: (t / 24) as u64,
                hour: (t % 24) as u8,
                values: series.iter().map(|s| s[t]).collect(),
                covariates: covariates.clone(),
            });
        }
    }
    let variables = SYNTH_VARIABLES.iter().map(|s| s.to_string()).collect();
    let covariate_names = COVARIATE_CATALOG
        .iter()
        .map(|(n, _)| n.to_string())
        .collect();
    Ok(Dataset::from_records(records, variables, covariate_names)?)
}
