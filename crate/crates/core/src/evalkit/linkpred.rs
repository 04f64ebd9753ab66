use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphio::Edge;
use crate::numkit::{dot, DenseMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkPredReport {
    pub auc: f64,
    pub ap: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// Scores every pair by `σ(z_i · z_j)` and reports ROC AUC and average precision.
///
/// Pairs are ranked by the logit `z_i · z_j`; the sigmoid is monotone so the ranking is the
/// same, but ranking on logits avoids ties created when the sigmoid saturates to 1.0.
pub fn link_prediction(
    z: &DenseMatrix,
    positives: &[Edge],
    negatives: &[Edge],
) -> Result<LinkPredReport> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::config(
            "link prediction needs positive and negative pairs",
        ));
    }
    let n = z.rows();
    let score = |&(i, j): &Edge| -> Result<f64> {
        if i >= n || j >= n {
            return Err(Error::shape(
                "link_prediction",
                format!("pair ({i}, {j}) out of range for {n} nodes"),
            ));
        }
        Ok(dot(z.row(i), z.row(j)))
    };
    let pos: Vec<f64> = positives.iter().map(score).collect::<Result<_>>()?;
    let neg: Vec<f64> = negatives.iter().map(score).collect::<Result<_>>()?;
    Ok(LinkPredReport {
        auc: roc_auc(&pos, &neg),
        ap: average_precision(&pos, &neg),
        n_pos: pos.len(),
        n_neg: neg.len(),
    })
}

/// Mann-Whitney estimate of ROC AUC; tied scores receive midranks.
pub fn roc_auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let midrank = (i + j + 2) as f64 / 2.0;
        rank_sum += midrank * all[i..=j].iter().filter(|e| e.1).count() as f64;
        i = j + 1;
    }
    let p = pos.len() as f64;
    let q = neg.len() as f64;
    (rank_sum - p * (p + 1.0) / 2.0) / (p * q)
}

/// Average precision: `Σ (R_k − R_{k−1}) · P_k` over distinct score thresholds, highest first.
pub fn average_precision(pos: &[f64], neg: &[f64]) -> f64 {
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0));
    let total_pos = pos.len() as f64;
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut prev_recall = 0.0;
    let mut ap = 0.0;
    let mut i = 0;
    while i < all.len() {
        let threshold = all[i].0;
        while i < all.len() && all[i].0 == threshold {
            if all[i].1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        let recall = tp / total_pos;
        ap += (recall - prev_recall) * tp / (tp + fp);
        prev_recall = recall;
    }
    ap
}
