use std::collections::BTreeMap;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, ScopeError};

pub const MAX_LLOYD_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub k: usize,
    pub seed: u64,
    pub labels: BTreeMap<String, usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
    /// Inertia after each assignment step; non-increasing.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Index and squared distance of the nearest centroid (ties: lowest index).
fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Seeded first centroid, then repeatedly the point farthest from all chosen
/// centroids (ties: lowest row index).
fn initial_centroids(x: &[Vec<f64>], k: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = (rng.next_u64() % x.len() as u64) as usize;
    let mut centroids = vec![x[first].clone()];
    while centroids.len() < k {
        let mut far = (0, -1.0);
        for (i, p) in x.iter().enumerate() {
            let d = nearest(p, &centroids).1;
            if d > far.1 {
                far = (i, d);
            }
        }
        centroids.push(x[far.0].clone());
    }
    centroids
}

fn assign(x: &[Vec<f64>], centroids: &[Vec<f64>], labels: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (i, p) in x.iter().enumerate() {
        let (c, d) = nearest(p, centroids);
        labels[i] = c;
        inertia += d;
    }
    inertia
}

/// Lloyd's algorithm on the rows of `fm` with deterministic initialization.
pub fn kmeans_cluster(
    fm: &FeatureMatrix,
    k: usize,
    seed: u64,
) -> Result<ClusterAssignment, ScopeError> {
    let x = &fm.values;
    if k == 0 {
        return Err(ScopeError::InvalidK);
    }
    if k > x.len() {
        return Err(ScopeError::KTooLarge { k, rows: x.len() });
    }
    let dim = fm.columns.len();
    let mut centroids = initial_centroids(x, k, seed);
    let mut labels = vec![0; x.len()];
    let mut inertia_history = vec![assign(x, &centroids, &mut labels)];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_LLOYD_ITERATIONS {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut sizes = vec![0usize; k];
        for (p, &c) in x.iter().zip(&labels) {
            sizes[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if sizes[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / sizes[c] as f64).collect();
            }
        }
        // an empty cluster takes the point farthest from its centroid among
        // clusters that can spare one
        for c in 0..k {
            if sizes[c] > 0 {
                continue;
            }
            let mut far: Option<(usize, f64)> = None;
            for (i, p) in x.iter().enumerate() {
                if sizes[labels[i]] < 2 {
                    continue;
                }
                let d = sq_dist(p, &centroids[labels[i]]);
                if far.is_none_or(|(_, best)| d > best) {
                    far = Some((i, d));
                }
            }
            if let Some((i, _)) = far {
                sizes[labels[i]] -= 1;
                labels[i] = c;
                sizes[c] = 1;
                centroids[c] = x[i].clone();
            }
        }

        let previous = labels.clone();
        let inertia = assign(x, &centroids, &mut labels);
        inertia_history.push(inertia);
        if labels == previous {
            converged = true;
            break;
        }
    }

    let inertia = *inertia_history.last().unwrap_or(&0.0);
    Ok(ClusterAssignment {
        k,
        seed,
        labels: fm.rows.iter().cloned().zip(labels).collect(),
        centroids,
        inertia,
        inertia_history,
        iterations,
        converged,
    })
}
