use std::collections::{BTreeMap, BTreeSet};

use super::cluster::Partition;
use super::history::{normalize, Context, HistoryTable};
use super::{CausalState, EpsilonMachine, MachineError};
use crate::symbolize::Symbol;

/// Context reached from `ctx` after emitting `symbol`.
pub(crate) fn successor_context(ctx: &[Symbol], symbol: Symbol, order: usize) -> Context {
    if order == 0 {
        return Vec::new();
    }
    let mut next = Vec::with_capacity(order);
    next.extend_from_slice(&ctx[1..]);
    next.push(symbol);
    next
}

fn successor_cluster(
    table: &HistoryTable,
    assignment: &BTreeMap<Context, usize>,
    ctx: &[Symbol],
    symbol: Symbol,
) -> Option<usize> {
    if table.counts[ctx][symbol as usize] == 0 {
        return None;
    }
    let next = successor_context(ctx, symbol, table.order);
    assignment.get(&next).copied()
}

/// Splits a cluster on the first symbol whose observed successors disagree.
/// Members without an observed successor on that symbol join the heaviest
/// group (ties: lowest successor cluster id).
fn split(
    members: &[Context],
    table: &HistoryTable,
    assignment: &BTreeMap<Context, usize>,
) -> Option<Vec<Vec<Context>>> {
    for x in 0..table.alphabet_size as Symbol {
        let mut groups: BTreeMap<usize, Vec<Context>> = BTreeMap::new();
        let mut undefined = Vec::new();
        for ctx in members {
            match successor_cluster(table, assignment, ctx, x) {
                Some(target) => groups.entry(target).or_default().push(ctx.clone()),
                None => undefined.push(ctx.clone()),
            }
        }
        if groups.len() < 2 {
            continue;
        }
        let mass = |g: &Vec<Context>| g.iter().map(|c| table.context_count(c)).sum::<u64>();
        let heaviest = groups
            .iter()
            .fold(None::<(usize, u64)>, |best, (&id, g)| {
                let m = mass(g);
                match best {
                    Some((_, bm)) if bm >= m => best,
                    _ => Some((id, m)),
                }
            })
            .map(|(id, _)| id)
            .expect("at least two groups");
        groups.get_mut(&heaviest).unwrap().extend(undefined);
        return Some(groups.into_values().collect());
    }
    None
}

/// Refines a context partition until every (state, symbol) pair has a single
/// successor state, then assembles the machine.
///
/// Transitions whose successor context was never observed are left absent.
pub fn determinize(
    partition: &Partition,
    table: &HistoryTable,
) -> Result<EpsilonMachine, MachineError> {
    let mut seen = BTreeSet::new();
    for ctx in partition.iter().flatten() {
        if !table.contains(ctx) {
            return Err(MachineError::PartitionMismatch(format!(
                "context {ctx:?} is not in the history table"
            )));
        }
        if !seen.insert(ctx.clone()) {
            return Err(MachineError::PartitionMismatch(format!(
                "context {ctx:?} appears in more than one cluster"
            )));
        }
    }
    if seen.len() != table.counts.len() {
        return Err(MachineError::PartitionMismatch(format!(
            "partition covers {} of {} contexts",
            seen.len(),
            table.counts.len()
        )));
    }

    let mut clusters: Vec<Vec<Context>> = partition
        .iter()
        .filter(|c| !c.is_empty())
        .cloned()
        .collect();
    loop {
        let assignment: BTreeMap<Context, usize> = clusters
            .iter()
            .enumerate()
            .flat_map(|(i, c)| c.iter().map(move |ctx| (ctx.clone(), i)))
            .collect();
        let mut changed = false;
        let mut refined = Vec::with_capacity(clusters.len());
        for members in &clusters {
            match split(members, table, &assignment) {
                Some(parts) => {
                    changed = true;
                    refined.extend(parts);
                }
                None => refined.push(members.clone()),
            }
        }
        clusters = refined;
        if !changed {
            break;
        }
    }

    // stable state numbering: by smallest member context
    for c in clusters.iter_mut() {
        c.sort();
    }
    clusters.sort_by(|a, b| a[0].cmp(&b[0]));

    let assignment: BTreeMap<Context, usize> = clusters
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.iter().map(move |ctx| (ctx.clone(), i)))
        .collect();
    let total = table.total_transitions.max(1) as f64;
    let k = table.alphabet_size;

    let mut states = Vec::with_capacity(clusters.len());
    let mut transitions = BTreeMap::new();
    for (id, members) in clusters.into_iter().enumerate() {
        let mut counts = vec![0u64; k];
        for ctx in &members {
            for (a, b) in counts.iter_mut().zip(&table.counts[ctx]) {
                *a += b;
            }
            for x in 0..k as Symbol {
                if let Some(to) = successor_cluster(table, &assignment, ctx, x) {
                    let prev = transitions.insert((id, x), to);
                    debug_assert!(prev.is_none_or(|p| p == to), "refinement left a conflict");
                }
            }
        }
        let mass: u64 = counts.iter().sum();
        states.push(CausalState {
            id,
            predictive: normalize(&counts),
            weight: mass as f64 / total,
            counts,
            member_contexts: members,
        });
    }

    Ok(EpsilonMachine {
        states,
        transitions,
        order: table.order,
        alphabet_size: k,
    })
}
