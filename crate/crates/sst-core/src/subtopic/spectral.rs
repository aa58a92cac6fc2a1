//! Direct spectral clustering: symmetric-normalized Laplacian, dense Jacobi
//! eigendecomposition, and seeded k-means++ over the row-normalized spectral
//! embedding.

use ndarray::Array2;
use rand::Rng;

use crate::linalg::{jacobi_eigh, l2_normalize_rows};
use crate::seedstream::step_stream;
use crate::simgraph::SimilarityMatrix;

use super::SubtopicPartition;

const KMEANS_RESTARTS: usize = 10;
const KMEANS_MAX_ITERS: usize = 100;

/// Cluster the combined sentence set into at most `m` groups.
///
/// The all-zero similarity matrix has no usable structure: with `m == n` the
/// result degenerates to singletons, otherwise a single-cluster partition is
/// returned with a warning.
pub fn spectral_cluster(a: &SimilarityMatrix, m: usize, seed: u64) -> SubtopicPartition {
    let n = a.n();
    let m = m.max(1).min(n);
    if n == 0 {
        return SubtopicPartition::new(Vec::new(), 0);
    }
    if a.values().iter().all(|&v| v == 0.0) {
        if m >= n {
            return SubtopicPartition::new((0..n).collect(), a.split());
        }
        log::warn!("similarity matrix is all zeros; returning a single-cluster partition");
        return SubtopicPartition::new(vec![0; n], a.split());
    }

    // Adjacency with unit self-loops on zero-degree rows.
    let mut w = a.values().clone();
    for i in 0..n {
        if w.row(i).sum() == 0.0 {
            w[[i, i]] = 1.0;
        }
    }

    // L = I - D^{-1/2} W D^{-1/2}
    let degrees = crate::linalg::row_sums(&w);
    let inv_sqrt: Vec<f64> = degrees.iter().map(|&d| 1.0 / d.sqrt()).collect();
    let mut lap = Array2::<f64>::eye(n);
    for i in 0..n {
        for j in 0..n {
            lap[[i, j]] -= inv_sqrt[i] * w[[i, j]] * inv_sqrt[j];
        }
    }

    let (eigvals, eigvecs) = jacobi_eigh(&lap);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eigvals[i].total_cmp(&eigvals[j]).then(i.cmp(&j)));

    let mut embedding = Array2::<f64>::zeros((n, m));
    for (col, &idx) in order.iter().take(m).enumerate() {
        embedding.column_mut(col).assign(&eigvecs.column(idx));
    }
    l2_normalize_rows(&mut embedding);

    let mut best: Option<(Vec<usize>, f64)> = None;
    for restart in 0..KMEANS_RESTARTS {
        let mut rng = step_stream(seed, "kmeans", restart as u64);
        let (labels, inertia) = kmeans(&embedding, m, &mut rng);
        if best.as_ref().is_none_or(|(_, b)| inertia < *b) {
            best = Some((labels, inertia));
        }
    }
    let (labels, _) = best.expect("at least one k-means restart");
    SubtopicPartition::new(labels, a.split())
}

fn sq_dist(a: ndarray::ArrayView1<'_, f64>, b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm with k-means++ initialization. Returns labels and the
/// final inertia. Empty clusters keep their stale centroid.
fn kmeans(points: &Array2<f64>, k: usize, rng: &mut impl Rng) -> (Vec<usize>, f64) {
    let n = points.nrows();
    let dim = points.ncols();
    let k = k.min(n);

    // k-means++ seeding.
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(points.row(rng.random_range(0..n)).to_vec());
    while centers.len() < k {
        let d2: Vec<f64> = (0..n)
            .map(|i| {
                centers
                    .iter()
                    .map(|c| sq_dist(points.row(i), c))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                r -= d;
                if r <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(points.row(pick).to_vec());
    }

    let mut labels = vec![0usize; n];
    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        for i in 0..n {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d = sq_dist(points.row(i), center);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[labels[i]] += 1;
            for d in 0..dim {
                sums[labels[i]][d] += points[[i, d]];
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for d in 0..dim {
                    centers[c][d] = sums[c][d] / counts[c] as f64;
                }
            }
        }
    }

    let inertia: f64 = (0..n).map(|i| sq_dist(points.row(i), &centers[labels[i]])).sum();
    (labels, inertia)
}
