//! Skip-gram objective over walk context pairs.
//!
//! Center nodes are represented by rows of the embedding matrix `Z` (the encoder output, or a
//! free table in walks-only mode); context nodes by rows of a separate [`ContextTable`].
//! Losses are negative log-likelihoods averaged over pairs.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcn_autoencoder::{
    encoder_backward, EncoderInputs, EncoderOptim, EncoderOutput, EncoderParams,
};
use crate::numkit::{adam_step, dot, sigmoid, softplus, AdamState, DenseMatrix, Rng};

/// Output ("context") embeddings, one row per node. Starts at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextTable {
    pub c: DenseMatrix,
}

impl ContextTable {
    pub fn zeros(n: usize, d: usize) -> Self {
        Self {
            c: DenseMatrix::zeros(n, d),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipgramMode {
    FullSoftmax,
    NegativeSampling,
}

/// Noise distribution for negative sampling: occurrence counts raised to the 0.75 power.
#[derive(Debug, Clone)]
pub struct NoiseDistribution {
    cumulative: Vec<f64>,
}

impl NoiseDistribution {
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let mut cumulative = Vec::with_capacity(counts.len());
        let mut total = 0.0;
        for &c in counts {
            total += (c as f64).powf(0.75);
            cumulative.push(total);
        }
        if total <= 0.0 {
            return Err(Error::config("noise distribution has no mass"));
        }
        Ok(Self { cumulative })
    }

    pub fn sample(&self, rng: &mut Rng) -> usize {
        let target = rng.uniform() * self.cumulative.last().unwrap();
        self.cumulative
            .partition_point(|&c| c <= target)
            .min(self.cumulative.len() - 1)
    }

    pub fn probability(&self, v: usize) -> f64 {
        let prev = if v == 0 { 0.0 } else { self.cumulative[v - 1] };
        (self.cumulative[v] - prev) / self.cumulative.last().unwrap()
    }
}

#[derive(Debug, Clone)]
pub struct SkipgramBatch<'a> {
    /// `(center, context)` node pairs.
    pub pairs: Vec<(usize, usize)>,
    pub negatives_per_pair: usize,
    pub mode: SkipgramMode,
    /// Negative-sampling noise; uniform over nodes when absent.
    pub noise: Option<&'a NoiseDistribution>,
}

/// Gradient rows for a subset of matrix rows. `rows` is sorted and unique.
#[derive(Debug, Clone, PartialEq)]
pub struct RowGrads {
    pub rows: Vec<usize>,
    pub values: DenseMatrix,
}

impl RowGrads {
    fn from_map(map: BTreeMap<usize, Vec<f64>>, d: usize) -> Self {
        let rows: Vec<usize> = map.keys().copied().collect();
        let data: Vec<f64> = map.into_values().flatten().collect();
        Self {
            values: DenseMatrix::from_vec(rows.len(), d, data).expect("rows have width d"),
            rows,
        }
    }

    /// Scatter into an `n × d` matrix that is zero outside `rows`.
    pub fn to_dense(&self, n: usize) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(n, self.values.cols());
        for (k, &r) in self.rows.iter().enumerate() {
            out.row_mut(r).copy_from_slice(self.values.row(k));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SkipgramGrads {
    pub loss: f64,
    pub grad_z: RowGrads,
    pub grad_c: RowGrads,
}

/// Mean skip-gram loss over the batch and its gradients with respect to the center
/// embeddings and the context table. `rng` is drawn from only in negative-sampling mode.
pub fn skipgram_loss_and_grads(
    z: &DenseMatrix,
    table: &ContextTable,
    batch: &SkipgramBatch<'_>,
    rng: &mut Rng,
) -> Result<SkipgramGrads> {
    let (n, d) = z.shape();
    if table.c.shape() != (n, d) {
        return Err(Error::shape(
            "skipgram_loss_and_grads",
            format!("z {:?}, context table {:?}", z.shape(), table.c.shape()),
        ));
    }
    if let Some(&(u, v)) = batch.pairs.iter().find(|&&(u, v)| u >= n || v >= n) {
        return Err(Error::shape(
            "skipgram_loss_and_grads",
            format!("pair ({u}, {v}) out of range for {n} nodes"),
        ));
    }
    if batch.pairs.is_empty() {
        return Ok(SkipgramGrads {
            loss: 0.0,
            grad_z: RowGrads::from_map(BTreeMap::new(), d),
            grad_c: RowGrads::from_map(BTreeMap::new(), d),
        });
    }
    match batch.mode {
        SkipgramMode::FullSoftmax => Ok(full_softmax(z, &table.c, &batch.pairs)),
        SkipgramMode::NegativeSampling => {
            if batch.negatives_per_pair == 0 {
                return Err(Error::config(
                    "negative sampling needs at least one negative",
                ));
            }
            Ok(negative_sampling(z, &table.c, batch, rng))
        }
    }
}

fn full_softmax(z: &DenseMatrix, c: &DenseMatrix, pairs: &[(usize, usize)]) -> SkipgramGrads {
    let (n, d) = z.shape();
    let scale = 1.0 / pairs.len() as f64;

    let mut by_center: BTreeMap<usize, BTreeMap<usize, usize>> = BTreeMap::new();
    for &(u, v) in pairs {
        *by_center.entry(u).or_default().entry(v).or_default() += 1;
    }
    let centers: Vec<(usize, BTreeMap<usize, usize>)> = by_center.into_iter().collect();

    // Per center: loss, gradient of its z row, and coefficient per context row.
    let per_center: Vec<(f64, Vec<f64>, Vec<f64>)> = centers
        .par_iter()
        .map(|(u, contexts)| {
            let zu = z.row(*u);
            let scores: Vec<f64> = (0..n).map(|j| dot(c.row(j), zu)).collect();
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum_exp: f64 = scores.iter().map(|s| (s - max).exp()).sum();
            let lse = max + sum_exp.ln();
            let m: usize = contexts.values().sum();
            let mut coef: Vec<f64> = scores.iter().map(|s| m as f64 * (s - lse).exp()).collect();
            let mut loss = 0.0;
            for (&v, &count) in contexts {
                loss += count as f64 * (lse - scores[v]);
                coef[v] -= count as f64;
            }
            let mut gz = vec![0.0; d];
            for (j, &a) in coef.iter().enumerate() {
                for (g, &cv) in gz.iter_mut().zip(c.row(j)) {
                    *g += a * cv;
                }
            }
            (loss, gz, coef)
        })
        .collect();

    let mut loss = 0.0;
    let mut grad_z = BTreeMap::new();
    let mut grad_c = DenseMatrix::zeros(n, d);
    for ((u, _), (l, gz, coef)) in centers.iter().zip(per_center) {
        loss += l;
        grad_z.insert(*u, gz.into_iter().map(|g| g * scale).collect());
        let zu = z.row(*u);
        for (j, a) in coef.into_iter().enumerate() {
            for (g, &zv) in grad_c.row_mut(j).iter_mut().zip(zu) {
                *g += scale * a * zv;
            }
        }
    }
    SkipgramGrads {
        loss: loss * scale,
        grad_z: RowGrads::from_map(grad_z, d),
        grad_c: RowGrads {
            rows: (0..n).collect(),
            values: grad_c,
        },
    }
}

fn negative_sampling(
    z: &DenseMatrix,
    c: &DenseMatrix,
    batch: &SkipgramBatch<'_>,
    rng: &mut Rng,
) -> SkipgramGrads {
    let (n, d) = z.shape();
    let scale = 1.0 / batch.pairs.len() as f64;
    let mut loss = 0.0;
    let mut grad_z: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut grad_c: BTreeMap<usize, Vec<f64>> = BTreeMap::new();

    let accumulate = |map: &mut BTreeMap<usize, Vec<f64>>, row: usize, a: f64, v: &[f64]| {
        let entry = map.entry(row).or_insert_with(|| vec![0.0; d]);
        for (g, &x) in entry.iter_mut().zip(v) {
            *g += scale * a * x;
        }
    };

    for &(u, v) in &batch.pairs {
        let zu = z.row(u);
        // label 1 for the observed context, 0 for each noise draw
        let mut terms = Vec::with_capacity(batch.negatives_per_pair + 1);
        terms.push((v, true));
        for _ in 0..batch.negatives_per_pair {
            let w = match batch.noise {
                Some(noise) => noise.sample(rng),
                None => rng.below(n),
            };
            terms.push((w, false));
        }
        for (w, positive) in terms {
            let s = dot(c.row(w), zu);
            let (l, g) = if positive {
                (softplus(-s), sigmoid(s) - 1.0)
            } else {
                (softplus(s), sigmoid(s))
            };
            loss += l;
            accumulate(&mut grad_z, u, g, c.row(w));
            accumulate(&mut grad_c, w, g, zu);
        }
    }
    SkipgramGrads {
        loss: loss * scale,
        grad_z: RowGrads::from_map(grad_z, d),
        grad_c: RowGrads::from_map(grad_c, d),
    }
}

/// Which embedding the skip-gram gradient flows into.
pub enum EmbedderUpdate<'a> {
    /// Backpropagate through the GCN encoder that produced `output`.
    Encoder {
        inputs: &'a EncoderInputs,
        params: &'a mut EncoderParams,
        output: &'a EncoderOutput,
        optim: &'a mut EncoderOptim,
    },
    /// Update a free embedding table directly.
    Free {
        embedding: &'a mut DenseMatrix,
        optim: &'a mut AdamState,
    },
}

/// One optimizer step on the context table and on the embedding source.
pub fn apply_skipgram_update(
    grads: &SkipgramGrads,
    table: &mut ContextTable,
    table_optim: &mut AdamState,
    target: EmbedderUpdate<'_>,
) -> Result<()> {
    let n = table.c.rows();
    adam_step(&mut table.c, &grads.grad_c.to_dense(n), table_optim)?;
    let grad_z = grads.grad_z.to_dense(n);
    match target {
        EmbedderUpdate::Encoder {
            inputs,
            params,
            output,
            optim,
        } => {
            let g = encoder_backward(inputs, params, output, &grad_z, None)?;
            optim.step(params, &g)
        }
        EmbedderUpdate::Free { embedding, optim } => adam_step(embedding, &grad_z, optim),
    }
}
