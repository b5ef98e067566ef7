//! Epsilon-machine reconstruction from symbol series.
//!
//! Pipeline: BIC order selection on a shared evaluation set, order-L history
//! counting, greedy L1 clustering of next-symbol distributions, and
//! refinement to a unifilar machine. Predictive distributions are order-L
//! next-symbol conditionals (maximum likelihood, no smoothing); state weights
//! are the empirical context mass, not the stationary distribution of the
//! transition graph.

mod cluster;
mod determinize;
mod export;
mod history;
mod metrics;
mod order;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::symbolize::{Symbol, SymbolSeries};

pub use cluster::{cluster_histories, Partition};
pub use determinize::determinize;
pub use export::{MachineDocument, StateDocument, TransitionDocument};
pub use history::{count_histories, Context, HistoryTable};
pub use metrics::{
    block_entropy, default_l_block, entropy_rate, excess_entropy, statistical_complexity,
    ExcessEntropy, BLOCKS_PER_CELL,
};
pub use order::{select_order_bic, OrderSelection};

/// Entropy rate below which a single-state machine counts as trivial.
pub const TRIVIAL_ENTROPY_RATE: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MachineError {
    #[error("series too short: need a segment of length {needed}, longest is {longest_segment}")]
    SeriesTooShort {
        needed: usize,
        longest_segment: usize,
    },
    #[error("history table is empty")]
    EmptyTable,
    #[error("invalid {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },
    #[error("partition does not match history table: {0}")]
    PartitionMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalState {
    pub id: usize,
    /// Sorted lexicographically.
    pub member_contexts: Vec<Context>,
    /// Summed next-symbol counts of the members.
    pub counts: Vec<u64>,
    pub predictive: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonMachine {
    pub states: Vec<CausalState>,
    pub transitions: BTreeMap<(usize, Symbol), usize>,
    pub order: usize,
    pub alphabet_size: usize,
}

impl EpsilonMachine {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn successor(&self, state: usize, symbol: Symbol) -> Option<usize> {
        self.transitions.get(&(state, symbol)).copied()
    }

    pub fn weight_sum(&self) -> f64 {
        self.states.iter().map(|s| s.weight).sum()
    }

    pub fn state_of(&self, context: &[Symbol]) -> Option<usize> {
        self.states
            .iter()
            .find(|s| {
                s.member_contexts
                    .binary_search_by(|c| c.as_slice().cmp(context))
                    .is_ok()
            })
            .map(|s| s.id)
    }

    /// Checks unifilarity against the table the machine was built from: for
    /// every member context and every symbol it emitted, the state of the
    /// successor context (when observed) must be the machine's unique
    /// successor for that (state, symbol) pair. Also checks that every
    /// declared transition targets an existing state and carries positive
    /// predictive mass.
    pub fn check_unifilar(&self, table: &HistoryTable) -> bool {
        let n = self.states.len();
        let targets_ok = self.transitions.iter().all(|(&(from, x), &to)| {
            from < n
                && to < n
                && self.states[from]
                    .predictive
                    .get(x as usize)
                    .is_some_and(|&p| p > 0.0)
        });
        if !targets_ok {
            return false;
        }
        for state in &self.states {
            for ctx in &state.member_contexts {
                let Some(row) = table.counts.get(ctx) else {
                    return false;
                };
                for (x, &n) in row.iter().enumerate() {
                    if n == 0 {
                        continue;
                    }
                    let next = determinize::successor_context(ctx, x as Symbol, table.order);
                    if !table.contains(&next) {
                        continue;
                    }
                    let expected = self.state_of(&next);
                    if expected.is_none() || self.successor(state.id, x as Symbol) != expected {
                        return false;
                    }
                }
            }
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MachineParams {
    pub l_max: usize,
    pub delta: f64,
    pub min_count: u64,
    /// Block length for excess entropy; `None` picks [`default_l_block`].
    pub l_block: Option<usize>,
    pub min_series_length: usize,
}

impl Default for MachineParams {
    fn default() -> Self {
        MachineParams {
            l_max: 4,
            delta: 0.1,
            min_count: 5,
            l_block: None,
            min_series_length: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineMetrics {
    pub h_mu: f64,
    pub c_mu: f64,
    pub e: f64,
    pub l_selected: usize,
    pub n_states: usize,
    pub n_symbols_used: usize,
    pub l_block: usize,
    pub trivial: bool,
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub machine: EpsilonMachine,
    pub metrics: MachineMetrics,
    pub table: HistoryTable,
    pub order_selection: OrderSelection,
    pub excess: ExcessEntropy,
}

/// Full reconstruction: order selection, counting, clustering, refinement,
/// metrics.
pub fn reconstruct(
    s: &SymbolSeries,
    params: &MachineParams,
) -> Result<Reconstruction, MachineError> {
    let n = s.total_len();
    if n < params.min_series_length.max(1) {
        return Err(MachineError::SeriesTooShort {
            needed: params.min_series_length.max(1),
            longest_segment: s.segments().iter().map(Vec::len).max().unwrap_or(0),
        });
    }
    let order_selection = select_order_bic(s, params.l_max)?;
    let table = count_histories(s, order_selection.selected)?;
    let partition = cluster_histories(&table, params.delta, params.min_count)?;
    let machine = determinize(&partition, &table)?;

    let h_mu = entropy_rate(&machine);
    let c_mu = statistical_complexity(&machine);
    let l_block = params
        .l_block
        .unwrap_or_else(|| default_l_block(s.alphabet_size(), n, params.l_max));
    let excess = excess_entropy(s, h_mu, l_block)?;
    let n_symbols_used = s.symbols_used();
    let trivial = (machine.n_states() == 1 && h_mu < TRIVIAL_ENTROPY_RATE)
        || s.alphabet_size() <= 1
        || n_symbols_used <= 1;

    let metrics = MachineMetrics {
        h_mu,
        c_mu,
        e: excess.value,
        l_selected: order_selection.selected,
        n_states: machine.n_states(),
        n_symbols_used,
        l_block,
        trivial,
        low_confidence: excess.low_confidence,
    };
    Ok(Reconstruction {
        machine,
        metrics,
        table,
        order_selection,
        excess,
    })
}
