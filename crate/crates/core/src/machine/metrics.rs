use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{EpsilonMachine, MachineError};
use crate::info::{entropy_bits, entropy_of_counts};
use crate::symbolize::{Symbol, SymbolSeries};

/// Windows per possible block below which an excess-entropy estimate is
/// flagged low-confidence.
pub const BLOCKS_PER_CELL: usize = 50;

/// h_mu = sum over states of weight * H[predictive], in bits per symbol.
pub fn entropy_rate(m: &EpsilonMachine) -> f64 {
    m.states
        .iter()
        .map(|s| s.weight * entropy_bits(&s.predictive))
        .sum::<f64>()
        .max(0.0)
}

/// C_mu = H[state weights], in bits.
pub fn statistical_complexity(m: &EpsilonMachine) -> f64 {
    let weights: Vec<f64> = m.states.iter().map(|s| s.weight).collect();
    entropy_bits(&weights)
}

/// Empirical entropy (bits) of length-`len` windows taken within segments.
/// Returns the entropy and the number of windows.
pub fn block_entropy(s: &SymbolSeries, len: usize) -> (f64, u64) {
    let mut counts: HashMap<&[Symbol], u64> = HashMap::new();
    let mut windows = 0;
    for seg in s.segments() {
        for w in seg.windows(len.max(1)) {
            *counts.entry(w).or_default() += 1;
            windows += 1;
        }
    }
    // hash order is random per process; sort so the float sum is reproducible
    let mut counts: Vec<u64> = counts.into_values().collect();
    counts.sort_unstable();
    (entropy_of_counts(counts), windows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessEntropy {
    /// max(0, raw)
    pub value: f64,
    /// H(L_block) - L_block * h_mu before flooring.
    pub raw: f64,
    pub block_entropy: f64,
    pub l_block: usize,
    pub windows: u64,
    pub low_confidence: bool,
}

/// Block-entropy estimate E = H(L_block) - L_block * h_mu, floored at zero.
pub fn excess_entropy(
    s: &SymbolSeries,
    h_mu: f64,
    l_block: usize,
) -> Result<ExcessEntropy, MachineError> {
    if l_block < 1 {
        return Err(MachineError::InvalidParameter {
            name: "l_block",
            message: "must be at least 1".into(),
        });
    }
    if !s.segments().iter().any(|seg| seg.len() >= l_block) {
        return Err(MachineError::SeriesTooShort {
            needed: l_block,
            longest_segment: s.segments().iter().map(Vec::len).max().unwrap_or(0),
        });
    }
    let (h_block, windows) = block_entropy(s, l_block);
    let raw = h_block - l_block as f64 * h_mu;
    let cells = (s.alphabet_size() as f64).powi(l_block as i32);
    Ok(ExcessEntropy {
        value: raw.max(0.0),
        raw,
        block_entropy: h_block,
        l_block,
        windows,
        low_confidence: (windows as f64) < BLOCKS_PER_CELL as f64 * cells,
    })
}

/// Largest block length up to `max(2 * l_max, 1)` with k^L <= n / 50, never below 1.
pub fn default_l_block(alphabet_size: usize, total_len: usize, l_max: usize) -> usize {
    let budget = total_len as f64 / BLOCKS_PER_CELL as f64;
    let k = alphabet_size.max(1) as f64;
    let mut l = (2 * l_max).max(1);
    while l > 1 && k.powi(l as i32) > budget {
        l -= 1;
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::{cluster_histories, count_histories, determinize};

    fn machine_of(s: &SymbolSeries, order: usize) -> EpsilonMachine {
        let t = count_histories(s, order).unwrap();
        determinize(&cluster_histories(&t, 0.1, 1).unwrap(), &t).unwrap()
    }

    #[test]
    fn fair_coin_single_state() {
        let s = SymbolSeries::single(2, vec![0, 1, 1, 0, 1, 0, 0, 1], "c").unwrap();
        let m = machine_of(&s, 0);
        assert_eq!(entropy_rate(&m), 1.0);
        assert_eq!(statistical_complexity(&m), 0.0);
    }

    #[test]
    fn period_two_metrics() {
        let symbols: Vec<Symbol> = (0..1000).map(|i| (i % 2) as Symbol).collect();
        let s = SymbolSeries::single(2, symbols, "p2").unwrap();
        let m = machine_of(&s, 1);
        let h = entropy_rate(&m);
        assert_eq!(h, 0.0);
        assert!((statistical_complexity(&m) - 1.0).abs() < 1e-5);
        let e = excess_entropy(&s, h, 4).unwrap();
        assert!((e.block_entropy - 1.0).abs() < 1e-5);
        assert!((e.value - 1.0).abs() < 1e-5);
    }

    #[test]
    fn golden_mean_formula() {
        // weights (2/3, 1/3), rows (1/2, 1/2) and (1, 0)
        let mut m = EpsilonMachine {
            states: Vec::new(),
            transitions: Default::default(),
            order: 1,
            alphabet_size: 2,
        };
        for (id, (w, p)) in [(2.0 / 3.0, vec![0.5, 0.5]), (1.0 / 3.0, vec![1.0, 0.0])]
            .into_iter()
            .enumerate()
        {
            m.states.push(crate::machine::CausalState {
                id,
                member_contexts: vec![vec![id as Symbol]],
                counts: vec![],
                predictive: p,
                weight: w,
            });
        }
        assert!((entropy_rate(&m) - 2.0 / 3.0).abs() < 1e-12);
        assert!((statistical_complexity(&m) - 0.918_295_834_054_489_6).abs() < 1e-12);
    }

    #[test]
    fn two_equal_states_one_bit() {
        let s = SymbolSeries::single(2, vec![0, 1, 0, 1], "p2").unwrap();
        let m = machine_of(&s, 1);
        // contexts 0 and 1 occur with counts 2 and 1
        let w: Vec<f64> = m.states.iter().map(|s| s.weight).collect();
        assert_eq!(w.len(), 2);
        assert!((statistical_complexity(&m) - entropy_bits(&w)).abs() < 1e-15);
    }

    #[test]
    fn excess_entropy_floors_and_flags() {
        let s = SymbolSeries::single(2, vec![0, 1, 1, 0, 1, 0, 0, 1], "c").unwrap();
        let e = excess_entropy(&s, 1.0, 3).unwrap();
        assert!(e.raw < 0.0);
        assert_eq!(e.value, 0.0);
        assert!(e.low_confidence);
        assert!(excess_entropy(&s, 1.0, 9).is_err());
        assert!(excess_entropy(&s, 1.0, 0).is_err());
    }

    #[test]
    fn default_block_length() {
        assert_eq!(default_l_block(2, 100_000, 4), 8);
        assert_eq!(default_l_block(2, 1000, 4), 4);
        assert_eq!(default_l_block(4, 200, 4), 1);
        assert_eq!(default_l_block(4, 10, 4), 1);
        assert_eq!(default_l_block(1, 1000, 4), 8);
        assert_eq!(default_l_block(2, 1000, 0), 1);
    }
}
