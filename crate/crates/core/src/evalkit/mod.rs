//! Link prediction and node clustering evaluation.

mod kmeans;
mod linkpred;
mod metrics;

pub use kmeans::{kmeans, KMeansResult};
pub use linkpred::{average_precision, link_prediction, roc_auc, LinkPredReport};
pub use metrics::{
    adjusted_rand_index, best_label_map, clustering_accuracy, clustering_metrics, hungarian_min,
    intra_cluster_distance, macro_precision_f1, nmi, ClusterReport, Contingency,
};

use crate::error::{Error, Result};
use crate::numkit::{DenseMatrix, Rng};

/// K-means with `k` = number of ground-truth classes, then every clustering metric.
pub fn cluster_and_score(
    z: &DenseMatrix,
    labels: &[usize],
    num_classes: usize,
    rng: &mut Rng,
) -> Result<ClusterReport> {
    if labels.len() != z.rows() {
        return Err(Error::shape(
            "cluster_and_score",
            format!("{} labels for {} embeddings", labels.len(), z.rows()),
        ));
    }
    let km = kmeans(z, num_classes, rng, 10, 300)?;
    clustering_metrics(&km.assignments, labels, z)
}
