//! Discretization of real-valued series into symbol series.
//!
//! Quantile edges use the nearest-rank rule, so every edge is a data value and
//! symbolization reproduces exactly from the serialized edges. A value equal to
//! an edge goes to the lower bin: `symbol(v) = #{edges e : e < v}`.
//!
//! Equal-mass quantile bins are also what "entropy-balanced" binning reduces to
//! for the marginal distribution, so there is no separate strategy for it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Symbol = u32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SymbolizeError {
    #[error("alphabet size must be at least 2, got {0}")]
    AlphabetTooSmall(usize),
    #[error("cannot fit bins on an empty series")]
    EmptyInput,
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("negative value {0} under hurdle binning")]
    NegativeUnderHurdle(f64),
    #[error("value {0} is not binary (expected 0 or 1)")]
    NotBinary(f64),
    #[error("symbol {symbol} outside alphabet of size {alphabet_size}")]
    SymbolOutOfRange {
        symbol: Symbol,
        alphabet_size: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Quantile,
    Hurdle,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitScope {
    #[default]
    Pooled,
    PerSeries,
}

/// A fitted discretization. Serializes as `{strategy, alphabet_size, edges, fit_scope}`.
///
/// For hurdle binning `edges` are the edges of the positive part; symbol 0 is
/// reserved for exact zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningSpec {
    pub strategy: Strategy,
    pub alphabet_size: usize,
    pub edges: Vec<f64>,
    pub fit_scope: FitScope,
}

impl BinningSpec {
    pub fn binary(fit_scope: FitScope) -> Self {
        BinningSpec {
            strategy: Strategy::Binary,
            alphabet_size: 2,
            edges: Vec::new(),
            fit_scope,
        }
    }

    /// The fitted alphabet collapsed to a single symbol.
    pub fn is_trivial(&self) -> bool {
        self.alphabet_size <= 1
    }

    pub fn symbol(&self, value: f64) -> Result<Symbol, SymbolizeError> {
        if !value.is_finite() {
            return Err(SymbolizeError::NonFinite(value));
        }
        let below = |v: f64| self.edges.partition_point(|&e| e < v) as Symbol;
        match self.strategy {
            Strategy::Quantile => Ok(below(value)),
            Strategy::Hurdle => {
                if value < 0.0 {
                    Err(SymbolizeError::NegativeUnderHurdle(value))
                } else if value == 0.0 {
                    Ok(0)
                } else {
                    Ok(1 + below(value))
                }
            }
            Strategy::Binary => {
                if value == 0.0 {
                    Ok(0)
                } else if value == 1.0 {
                    Ok(1)
                } else {
                    Err(SymbolizeError::NotBinary(value))
                }
            }
        }
    }
}

/// A discrete series split into segments. Segments mark pooling boundaries:
/// no history context ever spans two segments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolSeries {
    alphabet_size: usize,
    segments: Vec<Vec<Symbol>>,
    source: String,
}

impl SymbolSeries {
    pub fn new(
        alphabet_size: usize,
        segments: Vec<Vec<Symbol>>,
        source: impl Into<String>,
    ) -> Result<Self, SymbolizeError> {
        for &s in segments.iter().flatten() {
            if s as usize >= alphabet_size {
                return Err(SymbolizeError::SymbolOutOfRange {
                    symbol: s,
                    alphabet_size,
                });
            }
        }
        let segments = segments.into_iter().filter(|s| !s.is_empty()).collect();
        Ok(SymbolSeries {
            alphabet_size,
            segments,
            source: source.into(),
        })
    }

    pub fn single(
        alphabet_size: usize,
        symbols: Vec<Symbol>,
        source: impl Into<String>,
    ) -> Result<Self, SymbolizeError> {
        Self::new(alphabet_size, vec![symbols], source)
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn segments(&self) -> &[Vec<Symbol>] {
        &self.segments
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn total_len(&self) -> usize {
        self.segments.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Symbols of all segments in order.
    pub fn concatenated(&self) -> Vec<Symbol> {
        self.segments.iter().flatten().copied().collect()
    }

    /// Number of distinct symbols that actually occur.
    pub fn symbols_used(&self) -> usize {
        let mut seen = vec![false; self.alphabet_size];
        for &s in self.segments.iter().flatten() {
            seen[s as usize] = true;
        }
        seen.into_iter().filter(|&b| b).count()
    }

    /// Per-symbol occurrence counts.
    pub fn symbol_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.alphabet_size];
        for &s in self.segments.iter().flatten() {
            counts[s as usize] += 1;
        }
        counts
    }
}

fn check_finite(values: &[f64]) -> Result<(), SymbolizeError> {
    match values.iter().find(|v| !v.is_finite()) {
        Some(&v) => Err(SymbolizeError::NonFinite(v)),
        None => Ok(()),
    }
}

/// Nearest-rank edges for `bins` equal-mass bins over `values`.
///
/// Duplicate edges and edges at the sample maximum (which would leave an empty
/// top bin) are removed, so fewer than `bins - 1` edges may come back.
fn nearest_rank_edges(values: &[f64], bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let max = sorted[n - 1];
    let mut edges: Vec<f64> = Vec::with_capacity(bins.saturating_sub(1));
    for j in 1..bins {
        // smallest index i with (i + 1) / n >= j / bins
        let i = (j * n).div_ceil(bins) - 1;
        let e = sorted[i];
        if e < max && edges.last().is_none_or(|&last| last < e) {
            edges.push(e);
        }
    }
    edges
}

pub fn fit_quantile_bins(values: &[f64], k: usize) -> Result<BinningSpec, SymbolizeError> {
    if k < 2 {
        return Err(SymbolizeError::AlphabetTooSmall(k));
    }
    if values.is_empty() {
        return Err(SymbolizeError::EmptyInput);
    }
    check_finite(values)?;
    let edges = nearest_rank_edges(values, k);
    Ok(BinningSpec {
        strategy: Strategy::Quantile,
        alphabet_size: edges.len() + 1,
        edges,
        fit_scope: FitScope::Pooled,
    })
}

/// Symbol 0 for exact zeros, `k - 1` quantile bins fitted on the strictly
/// positive values. If there are no positive values the alphabet is `{0}`.
pub fn fit_hurdle_bins(values: &[f64], k: usize) -> Result<BinningSpec, SymbolizeError> {
    if k < 2 {
        return Err(SymbolizeError::AlphabetTooSmall(k));
    }
    if values.is_empty() {
        return Err(SymbolizeError::EmptyInput);
    }
    check_finite(values)?;
    if let Some(&v) = values.iter().find(|&&v| v < 0.0) {
        return Err(SymbolizeError::NegativeUnderHurdle(v));
    }
    let positives: Vec<f64> = values.iter().copied().filter(|&v| v > 0.0).collect();
    let (edges, alphabet_size) = if positives.is_empty() {
        (Vec::new(), 1)
    } else {
        let edges = nearest_rank_edges(&positives, k - 1);
        let size = edges.len() + 2;
        (edges, size)
    };
    Ok(BinningSpec {
        strategy: Strategy::Hurdle,
        alphabet_size,
        edges,
        fit_scope: FitScope::Pooled,
    })
}

/// Fits a spec of the given strategy. `k` is ignored for binary.
pub fn fit(
    values: &[f64],
    strategy: Strategy,
    k: usize,
    fit_scope: FitScope,
) -> Result<BinningSpec, SymbolizeError> {
    let mut spec = match strategy {
        Strategy::Quantile => fit_quantile_bins(values, k)?,
        Strategy::Hurdle => fit_hurdle_bins(values, k)?,
        Strategy::Binary => BinningSpec::binary(fit_scope),
    };
    spec.fit_scope = fit_scope;
    Ok(spec)
}

/// Symbolizes `values` as a single-segment series.
pub fn apply_binning(
    values: &[f64],
    spec: &BinningSpec,
    source: impl Into<String>,
) -> Result<SymbolSeries, SymbolizeError> {
    let symbols = symbolize_values(values, spec)?;
    SymbolSeries::single(spec.alphabet_size, symbols, source)
}

pub fn symbolize_values(values: &[f64], spec: &BinningSpec) -> Result<Vec<Symbol>, SymbolizeError> {
    values.iter().map(|&v| spec.symbol(v)).collect()
}
