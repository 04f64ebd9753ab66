use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::DenseMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub acc: f64,
    pub nmi: f64,
    pub f1: f64,
    pub precision: f64,
    pub ari: f64,
    pub intra_cluster_distance: f64,
    pub num_clusters: usize,
    pub assignments: Vec<usize>,
}

/// Cluster × class count table.
#[derive(Debug, Clone, PartialEq)]
pub struct Contingency {
    pub counts: Vec<Vec<usize>>,
    pub n: usize,
}

impl Contingency {
    pub fn new(assignments: &[usize], labels: &[usize]) -> Result<Self> {
        if assignments.len() != labels.len() {
            return Err(Error::shape(
                "contingency",
                format!("{} assignments, {} labels", assignments.len(), labels.len()),
            ));
        }
        let kc = assignments.iter().max().map_or(0, |m| m + 1);
        let kl = labels.iter().max().map_or(0, |m| m + 1);
        let mut counts = vec![vec![0usize; kl]; kc];
        for (&a, &l) in assignments.iter().zip(labels) {
            counts[a][l] += 1;
        }
        Ok(Self {
            counts,
            n: labels.len(),
        })
    }

    fn row_sums(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    fn col_sums(&self) -> Vec<usize> {
        let kl = self.counts.first().map_or(0, |r| r.len());
        (0..kl)
            .map(|j| self.counts.iter().map(|r| r[j]).sum())
            .collect()
    }
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian algorithm with
/// potentials, O(m³)). Returns `col_for_row`.
pub fn hungarian_min(cost: &[Vec<f64>]) -> Vec<usize> {
    let m = cost.len();
    // 1-based arrays; index 0 is the virtual source.
    let mut u = vec![0.0; m + 1];
    let mut v = vec![0.0; m + 1];
    let mut row_of_col = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=m {
        row_of_col[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_for_row = vec![0usize; m];
    for j in 1..=m {
        if row_of_col[j] > 0 {
            col_for_row[row_of_col[j] - 1] = j - 1;
        }
    }
    col_for_row
}

/// Cluster → class map maximizing the number of matched points. Clusters left without a
/// class (more clusters than classes) map to `None`.
pub fn best_label_map(table: &Contingency) -> Vec<Option<usize>> {
    let kc = table.counts.len();
    let kl = table.counts.first().map_or(0, |r| r.len());
    let m = kc.max(kl);
    let cost: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    if i < kc && j < kl {
                        -(table.counts[i][j] as f64)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let matching = hungarian_min(&cost);
    (0..kc)
        .map(|i| (matching[i] < kl).then_some(matching[i]))
        .collect()
}

/// Fraction of points whose cluster maps to their class under the best one-to-one map.
pub fn clustering_accuracy(assignments: &[usize], labels: &[usize]) -> Result<f64> {
    let table = Contingency::new(assignments, labels)?;
    let map = best_label_map(&table);
    let matched: usize = map
        .iter()
        .enumerate()
        .filter_map(|(c, l)| l.map(|l| table.counts[c][l]))
        .sum();
    Ok(matched as f64 / table.n as f64)
}

fn entropy(sizes: &[usize], n: f64) -> f64 {
    sizes
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = s as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information with arithmetic-mean normalization. Two single-cluster
/// partitions count as identical (1.0).
pub fn nmi(assignments: &[usize], labels: &[usize]) -> Result<f64> {
    let table = Contingency::new(assignments, labels)?;
    let n = table.n as f64;
    let a = table.row_sums();
    let b = table.col_sums();
    let (hu, hv) = (entropy(&a, n), entropy(&b, n));
    if hu + hv == 0.0 {
        return Ok(1.0);
    }
    let mut mi = 0.0;
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let nij = nij as f64;
                mi += nij / n * (n * nij / (a[i] as f64 * b[j] as f64)).ln();
            }
        }
    }
    Ok((mi / ((hu + hv) / 2.0)).clamp(0.0, 1.0))
}

fn comb2(x: usize) -> f64 {
    let x = x as f64;
    x * (x - 1.0) / 2.0
}

/// Adjusted Rand index (pair counting, corrected for chance).
pub fn adjusted_rand_index(assignments: &[usize], labels: &[usize]) -> Result<f64> {
    let table = Contingency::new(assignments, labels)?;
    let index: f64 = table.counts.iter().flatten().map(|&c| comb2(c)).sum();
    let sum_a: f64 = table.row_sums().into_iter().map(comb2).sum();
    let sum_b: f64 = table.col_sums().into_iter().map(comb2).sum();
    let total = comb2(table.n);
    let expected = if total > 0.0 {
        sum_a * sum_b / total
    } else {
        0.0
    };
    let max = (sum_a + sum_b) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Macro-averaged precision and F1 over classes, after mapping clusters to classes with
/// [`best_label_map`].
pub fn macro_precision_f1(assignments: &[usize], labels: &[usize]) -> Result<(f64, f64)> {
    let table = Contingency::new(assignments, labels)?;
    let map = best_label_map(&table);
    let kl = table.counts.first().map_or(0, |r| r.len());
    let mut tp = vec![0usize; kl];
    let mut predicted = vec![0usize; kl];
    for (c, row) in table.counts.iter().enumerate() {
        if let Some(l) = map[c] {
            tp[l] += row[l];
            predicted[l] += row.iter().sum::<usize>();
        }
    }
    let support = table.col_sums();
    let classes: Vec<usize> = (0..kl).filter(|&l| support[l] > 0).collect();
    let mut precision_sum = 0.0;
    let mut f1_sum = 0.0;
    for &l in &classes {
        let p = if predicted[l] > 0 {
            tp[l] as f64 / predicted[l] as f64
        } else {
            0.0
        };
        let r = tp[l] as f64 / support[l] as f64;
        precision_sum += p;
        f1_sum += if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        };
    }
    let k = classes.len() as f64;
    Ok((precision_sum / k, f1_sum / k))
}

/// Mean over clusters of the mean Euclidean distance from members to the cluster centroid.
/// Cluster ids must cover `0..=max` with no empty cluster.
pub fn intra_cluster_distance(z: &DenseMatrix, assignments: &[usize]) -> Result<f64> {
    if assignments.len() != z.rows() {
        return Err(Error::shape(
            "intra_cluster_distance",
            format!("{} assignments for {} points", assignments.len(), z.rows()),
        ));
    }
    let k = assignments.iter().max().map_or(0, |m| m + 1);
    let d = z.cols();
    let mut centroids = DenseMatrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (i, &c) in assignments.iter().enumerate() {
        counts[c] += 1;
        for (s, &v) in centroids.row_mut(c).iter_mut().zip(z.row(i)) {
            *s += v;
        }
    }
    if let Some(empty) = counts.iter().position(|&c| c == 0) {
        return Err(Error::config(format!("cluster {empty} is empty")));
    }
    for c in 0..k {
        let inv = 1.0 / counts[c] as f64;
        centroids.row_mut(c).iter_mut().for_each(|v| *v *= inv);
    }
    let mut dist_sum = vec![0.0; k];
    for (i, &c) in assignments.iter().enumerate() {
        let dist: f64 = z
            .row(i)
            .iter()
            .zip(centroids.row(c))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        dist_sum[c] += dist;
    }
    let per_cluster: f64 = dist_sum
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .sum();
    Ok(per_cluster / k as f64)
}

/// All clustering metrics of `assignments` against ground-truth `labels`.
pub fn clustering_metrics(
    assignments: &[usize],
    labels: &[usize],
    z: &DenseMatrix,
) -> Result<ClusterReport> {
    let (precision, f1) = macro_precision_f1(assignments, labels)?;
    Ok(ClusterReport {
        acc: clustering_accuracy(assignments, labels)?,
        nmi: nmi(assignments, labels)?,
        f1,
        precision,
        ari: adjusted_rand_index(assignments, labels)?,
        intra_cluster_distance: intra_cluster_distance(z, assignments)?,
        num_clusters: assignments.iter().max().map_or(0, |m| m + 1),
        assignments: assignments.to_vec(),
    })
}
