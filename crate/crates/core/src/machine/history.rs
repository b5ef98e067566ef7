use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::MachineError;
use crate::symbolize::{Symbol, SymbolSeries};

pub type Context = Vec<Symbol>;

/// Next-symbol counts for every observed length-`order` context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryTable {
    pub order: usize,
    pub alphabet_size: usize,
    pub counts: BTreeMap<Context, Vec<u64>>,
    pub total_transitions: u64,
}

impl HistoryTable {
    pub fn empty(order: usize, alphabet_size: usize) -> Self {
        HistoryTable {
            order,
            alphabet_size,
            counts: BTreeMap::new(),
            total_transitions: 0,
        }
    }

    pub fn context_count(&self, context: &[Symbol]) -> u64 {
        self.counts.get(context).map_or(0, |c| c.iter().sum())
    }

    pub fn contains(&self, context: &[Symbol]) -> bool {
        self.counts.contains_key(context)
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Adds another table of the same order and alphabet into this one.
    pub fn absorb(&mut self, other: &HistoryTable) {
        assert_eq!(self.order, other.order, "history orders differ");
        assert_eq!(self.alphabet_size, other.alphabet_size, "alphabets differ");
        for (ctx, counts) in &other.counts {
            let entry = self
                .counts
                .entry(ctx.clone())
                .or_insert_with(|| vec![0; self.alphabet_size]);
            for (a, b) in entry.iter_mut().zip(counts) {
                *a += b;
            }
        }
        self.total_transitions += other.total_transitions;
    }

    /// Maximum-likelihood predictive distribution of a context.
    pub fn predictive(&self, context: &[Symbol]) -> Option<Vec<f64>> {
        let counts = self.counts.get(context)?;
        Some(normalize(counts))
    }

    /// Log-likelihood (nats) of the counted transitions under their own
    /// maximum-likelihood estimate.
    pub fn log_likelihood(&self) -> f64 {
        self.counts
            .values()
            .map(|row| {
                let total: u64 = row.iter().sum();
                row.iter()
                    .filter(|&&n| n > 0)
                    .map(|&n| n as f64 * (n as f64 / total as f64).ln())
                    .sum::<f64>()
            })
            .sum()
    }
}

pub(crate) fn normalize(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return vec![0.0; counts.len()];
    }
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

/// Counts `(context, next)` pairs of length-`order` contexts. Within each
/// segment only positions `t >= max(order, first_position)` are counted, so
/// several orders can share one evaluation set.
pub(crate) fn count_from(s: &SymbolSeries, order: usize, first_position: usize) -> HistoryTable {
    let k = s.alphabet_size();
    let start = order.max(first_position);
    let mut scratch: HashMap<&[Symbol], Vec<u64>> = HashMap::new();
    let mut total = 0u64;
    for seg in s.segments() {
        for t in start..seg.len() {
            let row = scratch
                .entry(&seg[t - order..t])
                .or_insert_with(|| vec![0; k]);
            row[seg[t] as usize] += 1;
            total += 1;
        }
    }
    HistoryTable {
        order,
        alphabet_size: k,
        counts: scratch.into_iter().map(|(c, v)| (c.to_vec(), v)).collect(),
        total_transitions: total,
    }
}

/// Order-`order` history table of a series; contexts never span segments.
pub fn count_histories(s: &SymbolSeries, order: usize) -> Result<HistoryTable, MachineError> {
    if !s.segments().iter().any(|seg| seg.len() > order) {
        return Err(MachineError::SeriesTooShort {
            needed: order + 1,
            longest_segment: s.segments().iter().map(Vec::len).max().unwrap_or(0),
        });
    }
    Ok(count_from(s, order, 0))
}
