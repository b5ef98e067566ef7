//! Small information-theory helpers shared across modules.

/// Shannon entropy in bits of a probability vector. Zero entries contribute 0.
pub(crate) fn entropy_bits(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum::<f64>()
        .max(0.0)
}

/// Shannon entropy in bits of an empirical count vector.
pub(crate) fn entropy_of_counts<I>(counts: I) -> f64
where
    I: IntoIterator<Item = u64>,
    I::IntoIter: Clone,
{
    let iter = counts.into_iter();
    let total: u64 = iter.clone().sum();
    if total == 0 {
        return 0.0;
    }
    let total = total as f64;
    iter.filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0)
}

pub(crate) fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}
