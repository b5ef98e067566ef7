use serde::{Deserialize, Serialize};

use super::history::count_from;
use super::MachineError;
use crate::symbolize::SymbolSeries;

/// Outcome of BIC order selection over `0..=l_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderSelection {
    pub selected: usize,
    pub bic: Vec<f64>,
    /// Log-likelihood in nats on the shared evaluation set.
    pub log_likelihood: Vec<f64>,
    /// Number of scored transitions (positions `t >= l_max` in each segment).
    pub n_eval: u64,
}

/// BIC(L) = -2 LL(L) + k^L (k - 1) ln N_eval, with every order scored on the
/// same positions. Ties go to the smaller order.
pub fn select_order_bic(s: &SymbolSeries, l_max: usize) -> Result<OrderSelection, MachineError> {
    if !s.segments().iter().any(|seg| seg.len() > l_max) {
        return Err(MachineError::SeriesTooShort {
            needed: l_max + 1,
            longest_segment: s.segments().iter().map(Vec::len).max().unwrap_or(0),
        });
    }
    let k = s.alphabet_size() as f64;
    let mut bic = Vec::with_capacity(l_max + 1);
    let mut log_likelihood = Vec::with_capacity(l_max + 1);
    let mut n_eval = 0;
    for order in 0..=l_max {
        let table = count_from(s, order, l_max);
        n_eval = table.total_transitions;
        let ll = table.log_likelihood();
        let params = k.powi(order as i32) * (k - 1.0);
        bic.push(-2.0 * ll + params * (n_eval as f64).ln());
        log_likelihood.push(ll);
    }
    let mut selected = 0;
    for (order, &b) in bic.iter().enumerate() {
        if b < bic[selected] {
            selected = order;
        }
    }
    Ok(OrderSelection {
        selected,
        bic,
        log_likelihood,
        n_eval,
    })
}
