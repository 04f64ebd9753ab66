use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numkit::{DenseMatrix, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: DenseMatrix,
    /// Within-cluster sum of squares of the returned solution.
    pub wcss: f64,
    /// Index of the restart that produced the solution.
    pub restart: usize,
    /// WCSS after each assignment step of the chosen restart.
    pub wcss_trace: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm with k-means++ seeding, best of `restarts` by WCSS (ties go to the
/// lower restart index). Each restart gets its own seed drawn from `rng` up front, so the
/// restarts may run in parallel without changing the result.
pub fn kmeans(
    z: &DenseMatrix,
    k: usize,
    rng: &mut Rng,
    restarts: usize,
    max_iters: usize,
) -> Result<KMeansResult> {
    let n = z.rows();
    if k == 0 || k > n {
        return Err(Error::config(format!(
            "cannot form {k} clusters from {n} points"
        )));
    }
    if restarts == 0 {
        return Err(Error::config("k-means needs at least one restart"));
    }
    let seeds: Vec<u64> = (0..restarts).map(|_| rng.next_u64()).collect();
    let runs: Vec<KMeansResult> = seeds
        .par_iter()
        .enumerate()
        .map(|(r, &seed)| single_run(z, k, &mut Rng::new(seed), max_iters, r))
        .collect();
    Ok(runs
        .into_iter()
        .min_by(|a, b| a.wcss.total_cmp(&b.wcss).then(a.restart.cmp(&b.restart)))
        .expect("at least one restart"))
}

fn plus_plus_seeds(z: &DenseMatrix, k: usize, rng: &mut Rng) -> DenseMatrix {
    let (n, d) = z.shape();
    let mut centroids = DenseMatrix::zeros(k, d);
    centroids.row_mut(0).copy_from_slice(z.row(rng.below(n)));
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| sq_dist(z.row(i), centroids.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.uniform() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, &w) in nearest.iter().enumerate() {
                acc += w;
                if acc > target {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.below(n)
        };
        centroids.row_mut(c).copy_from_slice(z.row(pick));
        for (i, best) in nearest.iter_mut().enumerate() {
            *best = best.min(sq_dist(z.row(i), centroids.row(c)));
        }
    }
    centroids
}

fn assign(z: &DenseMatrix, centroids: &DenseMatrix) -> (Vec<usize>, Vec<f64>) {
    (0..z.rows())
        .map(|i| {
            let mut best = (0, f64::INFINITY);
            for c in 0..centroids.rows() {
                let dist = sq_dist(z.row(i), centroids.row(c));
                if dist < best.1 {
                    best = (c, dist);
                }
            }
            best
        })
        .unzip()
}

fn single_run(
    z: &DenseMatrix,
    k: usize,
    rng: &mut Rng,
    max_iters: usize,
    restart: usize,
) -> KMeansResult {
    let (n, d) = z.shape();
    let mut centroids = plus_plus_seeds(z, k, rng);
    let (mut assignments, mut dists) = assign(z, &centroids);
    let mut trace = vec![dists.iter().sum::<f64>()];

    for _ in 0..max_iters {
        let mut sums = DenseMatrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for (i, &c) in assignments.iter().enumerate() {
            counts[c] += 1;
            for (s, &v) in sums.row_mut(c).iter_mut().zip(z.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                let inv = 1.0 / counts[c] as f64;
                for (dst, &s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
        }
        // Empty clusters move to the point farthest from its current centroid.
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)))
                    .expect("n >= k >= 1");
                centroids.row_mut(c).copy_from_slice(z.row(far));
                dists[far] = 0.0;
            }
        }
        let (next, next_dists) = assign(z, &centroids);
        trace.push(next_dists.iter().sum());
        let changed = next != assignments;
        assignments = next;
        dists = next_dists;
        if !changed {
            break;
        }
    }
    KMeansResult {
        wcss: *trace.last().unwrap(),
        assignments,
        centroids,
        restart,
        wcss_trace: trace,
    }
}
