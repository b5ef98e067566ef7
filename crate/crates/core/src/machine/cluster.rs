use super::history::{normalize, Context, HistoryTable};
use super::MachineError;
use crate::info::l1_distance;

/// Groups of contexts; each group becomes a candidate causal state.
pub type Partition = Vec<Vec<Context>>;

struct Cluster {
    members: Vec<Context>,
    counts: Vec<u64>,
    prototype: Vec<f64>,
}

impl Cluster {
    fn new(ctx: Context, counts: &[u64]) -> Self {
        Cluster {
            members: vec![ctx],
            counts: counts.to_vec(),
            prototype: normalize(counts),
        }
    }

    fn add(&mut self, ctx: Context, counts: &[u64]) {
        self.members.push(ctx);
        for (a, b) in self.counts.iter_mut().zip(counts) {
            *a += b;
        }
        self.prototype = normalize(&self.counts);
    }
}

/// Greedy L1 clustering of context predictive distributions.
///
/// Contexts with at least `min_count` observations are visited by descending
/// count (ties: lexicographic context) and join the first cluster whose
/// count-weighted prototype is within `delta`, else found a new cluster.
/// Rarer contexts are then attached to the nearest prototype (ties: lowest
/// cluster id) without moving it. If no context reaches `min_count`, all of
/// them are clustered greedily.
pub fn cluster_histories(
    table: &HistoryTable,
    delta: f64,
    min_count: u64,
) -> Result<Partition, MachineError> {
    if !(0.0..=2.0).contains(&delta) {
        return Err(MachineError::InvalidParameter {
            name: "delta",
            message: format!("{delta} outside [0, 2]"),
        });
    }
    if min_count < 1 {
        return Err(MachineError::InvalidParameter {
            name: "min_count",
            message: "must be at least 1".into(),
        });
    }
    if table.is_empty() {
        return Err(MachineError::EmptyTable);
    }

    let mut ordered: Vec<(&Context, &Vec<u64>, u64)> = table
        .counts
        .iter()
        .map(|(c, row)| (c, row, row.iter().sum::<u64>()))
        .collect();
    // stable sort keeps the BTreeMap's lexicographic order among equal counts
    ordered.sort_by_key(|c| std::cmp::Reverse(c.2));

    let threshold = if ordered[0].2 >= min_count {
        min_count
    } else {
        1
    };
    let (frequent, rare): (Vec<_>, Vec<_>) = ordered.into_iter().partition(|e| e.2 >= threshold);

    let mut clusters: Vec<Cluster> = Vec::new();
    for (ctx, row, _) in frequent {
        let p = normalize(row);
        match clusters
            .iter_mut()
            .find(|c| l1_distance(&c.prototype, &p) <= delta)
        {
            Some(c) => c.add(ctx.clone(), row),
            None => clusters.push(Cluster::new(ctx.clone(), row)),
        }
    }

    let prototypes: Vec<Vec<f64>> = clusters.iter().map(|c| c.prototype.clone()).collect();
    for (ctx, row, _) in rare {
        let p = normalize(row);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, proto) in prototypes.iter().enumerate() {
            let d = l1_distance(proto, &p);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        clusters[best].members.push(ctx.clone());
    }

    Ok(clusters.into_iter().map(|c| c.members).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn table(rows: &[(Vec<u32>, Vec<u64>)]) -> HistoryTable {
        let counts: BTreeMap<_, _> = rows.iter().cloned().collect();
        HistoryTable {
            order: rows[0].0.len(),
            alphabet_size: rows[0].1.len(),
            total_transitions: counts.values().flatten().sum(),
            counts,
        }
    }

    fn two_rows() -> HistoryTable {
        table(&[(vec![1], vec![300, 0]), (vec![0], vec![300, 300])])
    }

    #[test]
    fn far_rows_stay_apart() {
        let p = cluster_histories(&two_rows(), 0.05, 1).unwrap();
        assert_eq!(p.len(), 2);
        // larger count first
        assert_eq!(p[0], vec![vec![0]]);
    }

    #[test]
    fn distance_at_tolerance_merges() {
        let p = cluster_histories(&two_rows(), 1.0, 1).unwrap();
        assert_eq!(p, vec![vec![vec![0], vec![1]]]);
    }

    #[test]
    fn single_context() {
        let t = table(&[(vec![], vec![4, 6])]);
        assert_eq!(cluster_histories(&t, 0.1, 5).unwrap().len(), 1);
    }

    #[test]
    fn rare_contexts_attach_to_nearest() {
        let t = table(&[
            (vec![0, 0], vec![100, 0]),
            (vec![0, 1], vec![0, 100]),
            (vec![1, 0], vec![1, 2]),
        ]);
        let p = cluster_histories(&t, 0.1, 5).unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p[1], vec![vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn all_rare_falls_back_to_greedy() {
        let t = table(&[(vec![0], vec![1, 0]), (vec![1], vec![0, 1])]);
        assert_eq!(cluster_histories(&t, 0.1, 5).unwrap().len(), 2);
    }

    #[test]
    fn parameter_validation() {
        assert!(cluster_histories(&two_rows(), 2.5, 1).is_err());
        assert!(cluster_histories(&two_rows(), 0.1, 0).is_err());
        assert_eq!(
            cluster_histories(&HistoryTable::empty(1, 2), 0.1, 1),
            Err(MachineError::EmptyTable)
        );
    }
}
