//! Two-layer GCN encoder with optional Gaussian head, inner-product decoder, and the
//! reconstruction / KL objectives with hand-derived gradients.
//!
//! Forward pass (Â is the normalized adjacency, X the input features):
//!
//! ```text
//! Z¹     = relu(Â · (X · W⁰))
//! H      = Â · Z¹
//! μ      = H · W_μ
//! logvar = H · W_σ                  (variational only)
//! Z      = μ + exp(logvar / 2) ⊙ ε  (variational only, ε ~ N(0, I); otherwise Z = μ)
//! ```
//!
//! The decoder scores a pair by `σ(z_i · z_j)`. The full `n × n` logit matrix is never
//! stored during training; the reconstruction loss walks it one row at a time.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphio::{adjacency_with_self_loops, Edge};
use crate::numkit::{
    adam_step, clamped_exp, dot, glorot_init, sigmoid, softplus, AdamState, CsrMatrix, DenseMatrix,
    Rng,
};

/// Fixed encoder inputs: sparse features and normalized adjacency, with cached transposes.
#[derive(Debug, Clone)]
pub struct EncoderInputs {
    features: CsrMatrix,
    features_t: CsrMatrix,
    a_norm: CsrMatrix,
    a_norm_t: CsrMatrix,
}

impl EncoderInputs {
    pub fn new(features: CsrMatrix, a_norm: CsrMatrix) -> Result<Self> {
        if a_norm.rows() != a_norm.cols() || features.rows() != a_norm.rows() {
            return Err(Error::shape(
                "EncoderInputs::new",
                format!(
                    "features {}x{}, adjacency {}x{}",
                    features.rows(),
                    features.cols(),
                    a_norm.rows(),
                    a_norm.cols()
                ),
            ));
        }
        Ok(Self {
            features_t: features.transpose(),
            a_norm_t: a_norm.transpose(),
            features,
            a_norm,
        })
    }

    pub fn from_dense_features(x: &DenseMatrix, a_norm: CsrMatrix) -> Result<Self> {
        Self::new(CsrMatrix::from_dense(x), a_norm)
    }

    /// One-hot node features, for graphs without attributes.
    pub fn with_identity_features(a_norm: CsrMatrix) -> Self {
        let n = a_norm.rows();
        Self::new(CsrMatrix::identity(n), a_norm).expect("square adjacency")
    }

    pub fn n(&self) -> usize {
        self.a_norm.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn a_norm(&self) -> &CsrMatrix {
        &self.a_norm
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    pub w0: DenseMatrix,
    pub w1_mu: DenseMatrix,
    pub w1_sigma: Option<DenseMatrix>,
}

impl EncoderParams {
    /// Glorot-initialized weights for `h → d1 → d`.
    pub fn init(h: usize, d1: usize, d: usize, variational: bool, rng: &mut Rng) -> Self {
        let w0 = glorot_init(h, d1, rng);
        let w1_mu = glorot_init(d1, d, rng);
        let w1_sigma = variational.then(|| glorot_init(d1, d, rng));
        Self {
            w0,
            w1_mu,
            w1_sigma,
        }
    }

    pub fn zeros(h: usize, d1: usize, d: usize, variational: bool) -> Self {
        Self {
            w0: DenseMatrix::zeros(h, d1),
            w1_mu: DenseMatrix::zeros(d1, d),
            w1_sigma: variational.then(|| DenseMatrix::zeros(d1, d)),
        }
    }

    pub fn is_variational(&self) -> bool {
        self.w1_sigma.is_some()
    }

    pub fn input_dim(&self) -> usize {
        self.w0.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w0.cols()
    }

    pub fn latent_dim(&self) -> usize {
        self.w1_mu.cols()
    }

    pub fn is_finite(&self) -> bool {
        self.w0.is_finite()
            && self.w1_mu.is_finite()
            && self.w1_sigma.as_ref().is_none_or(|w| w.is_finite())
    }

    fn check(&self, inputs: &EncoderInputs) -> Result<()> {
        let ok = self.w0.rows() == inputs.feature_dim()
            && self.w1_mu.rows() == self.w0.cols()
            && self
                .w1_sigma
                .as_ref()
                .is_none_or(|w| w.shape() == self.w1_mu.shape());
        if !ok {
            return Err(Error::shape(
                "encode",
                format!(
                    "features h={}, w0 {:?}, w1_mu {:?}",
                    inputs.feature_dim(),
                    self.w0.shape(),
                    self.w1_mu.shape()
                ),
            ));
        }
        Ok(())
    }
}

/// Activations cached by [`encode`] for the backward pass.
#[derive(Debug, Clone)]
pub struct EncoderOutput {
    /// Post-relu first-layer activations.
    pub z1: DenseMatrix,
    /// `Â · z1`, the input of the second layer.
    pub h1: DenseMatrix,
    pub mu: DenseMatrix,
    pub logvar: Option<DenseMatrix>,
    /// Embedding used downstream: `mu`, or the reparameterized sample.
    pub z: DenseMatrix,
    pub noise: Option<DenseMatrix>,
}

/// Encoder forward pass. In variational mode ε is drawn from `rng`; otherwise `rng` is untouched.
pub fn encode(
    inputs: &EncoderInputs,
    params: &EncoderParams,
    rng: &mut Rng,
) -> Result<EncoderOutput> {
    forward(inputs, params, Some(rng))
}

/// Forward pass returning `z = mu` even for a variational encoder (no sampling).
pub fn encode_mean(inputs: &EncoderInputs, params: &EncoderParams) -> Result<EncoderOutput> {
    forward(inputs, params, None)
}

fn forward(
    inputs: &EncoderInputs,
    params: &EncoderParams,
    rng: Option<&mut Rng>,
) -> Result<EncoderOutput> {
    params.check(inputs)?;
    let xw0 = inputs.features.spmm(&params.w0)?;
    let mut z1 = inputs.a_norm.spmm(&xw0)?;
    z1.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    let h1 = inputs.a_norm.spmm(&z1)?;
    let mu = h1.matmul(&params.w1_mu)?;
    let logvar = params.w1_sigma.as_ref().map(|w| h1.matmul(w)).transpose()?;

    let (z, noise) = match (&logvar, rng) {
        (Some(lv), Some(rng)) => {
            let (n, d) = mu.shape();
            let eps = DenseMatrix::from_vec(n, d, (0..n * d).map(|_| rng.normal()).collect())?;
            let mut z = mu.clone();
            for ((zv, &l), &e) in z.data_mut().iter_mut().zip(lv.data()).zip(eps.data()) {
                *zv += clamped_exp(0.5 * l) * e;
            }
            (z, Some(eps))
        }
        _ => (mu.clone(), None),
    };
    Ok(EncoderOutput {
        z1,
        h1,
        mu,
        logvar,
        z,
        noise,
    })
}

/// `Z Zᵀ`, the pre-sigmoid decoder logits.
pub fn decode_logits(z: &DenseMatrix) -> DenseMatrix {
    z.matmul_nt(z).expect("z is compatible with itself")
}

#[derive(Debug, Clone)]
pub struct LossValue {
    pub value: f64,
    pub grad_z: DenseMatrix,
}

/// Binary `A + I` target with its class-rebalancing constants.
#[derive(Debug, Clone)]
pub struct ReconTarget {
    pub adjacency: CsrMatrix,
    pub pos_weight: f64,
    pub norm: f64,
}

impl ReconTarget {
    /// `pos_weight = (n² − nnz) / nnz`, `norm = n² / (2 (n² − nnz))`.
    pub fn new(n: usize, train_edges: &[Edge]) -> Self {
        Self::from_adjacency(adjacency_with_self_loops(n, train_edges))
    }

    pub fn from_adjacency(adjacency: CsrMatrix) -> Self {
        let n2 = (adjacency.rows() * adjacency.rows()) as f64;
        let nnz = adjacency.nnz() as f64;
        let neg = (n2 - nnz).max(1.0);
        Self {
            pos_weight: neg / nnz,
            norm: n2 / (2.0 * neg),
            adjacency,
        }
    }
}

#[inline]
fn weighted_bce(logit: f64, positive: bool, pos_weight: f64) -> (f64, f64) {
    if positive {
        (
            pos_weight * softplus(-logit),
            pos_weight * (sigmoid(logit) - 1.0),
        )
    } else {
        (softplus(logit), sigmoid(logit))
    }
}

/// Weighted cross-entropy from an explicit logit matrix. Returns the loss and its gradient
/// with respect to the logits.
pub fn reconstruction_loss_from_logits(
    logits: &DenseMatrix,
    adjacency: &CsrMatrix,
    pos_weight: f64,
    norm: f64,
) -> Result<(f64, DenseMatrix)> {
    let n = logits.rows();
    if logits.cols() != n || adjacency.rows() != n || adjacency.cols() != n {
        return Err(Error::shape(
            "reconstruction_loss",
            format!(
                "logits {:?}, target {}x{}",
                logits.shape(),
                adjacency.rows(),
                adjacency.cols()
            ),
        ));
    }
    let scale = norm / (n * n) as f64;
    let mut grad = DenseMatrix::zeros(n, n);
    let mut total = 0.0;
    for i in 0..n {
        let (idx, _) = adjacency.row(i);
        let mut next = 0;
        for j in 0..n {
            let positive = next < idx.len() && idx[next] == j;
            if positive {
                next += 1;
            }
            let (l, g) = weighted_bce(logits.get(i, j), positive, pos_weight);
            total += l;
            grad.set(i, j, scale * g);
        }
    }
    Ok((scale * total, grad))
}

/// Weighted cross-entropy of `σ(Z Zᵀ)` against the target, with its exact gradient in `Z`.
/// Computed one row at a time; memory stays `O(n · d)`.
pub fn reconstruction_loss(z: &DenseMatrix, target: &ReconTarget) -> Result<LossValue> {
    let (n, d) = z.shape();
    if target.adjacency.rows() != n {
        return Err(Error::shape(
            "reconstruction_loss",
            format!("z has {n} rows, target {}", target.adjacency.rows()),
        ));
    }
    let pw = target.pos_weight;
    let rows: Vec<(f64, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let zi = z.row(i);
            let (idx, _) = target.adjacency.row(i);
            let mut next = 0;
            let mut loss = 0.0;
            let mut g_row = vec![0.0; d];
            for j in 0..n {
                let positive = next < idx.len() && idx[next] == j;
                if positive {
                    next += 1;
                }
                let zj = z.row(j);
                let (l, g) = weighted_bce(dot(zi, zj), positive, pw);
                loss += l;
                for (o, &v) in g_row.iter_mut().zip(zj) {
                    *o += g * v;
                }
            }
            (loss, g_row)
        })
        .collect();

    let scale = target.norm / (n * n) as f64;
    let mut total = 0.0;
    let mut grad_z = DenseMatrix::zeros(n, d);
    // d(logit_ij)/dz_i = z_j and the gradient matrix is symmetric, hence the factor 2.
    for (i, (loss, g_row)) in rows.into_iter().enumerate() {
        total += loss;
        for (o, g) in grad_z.row_mut(i).iter_mut().zip(g_row) {
            *o = 2.0 * scale * g;
        }
    }
    Ok(LossValue {
        value: scale * total,
        grad_z,
    })
}

#[derive(Debug, Clone)]
pub struct KlValue {
    pub value: f64,
    pub grad_mu: DenseMatrix,
    pub grad_logvar: DenseMatrix,
}

/// `(1/n) Σ_i KL(N(μ_i, diag(exp(logvar_i))) ‖ N(0, I))`.
pub fn kl_loss(mu: &DenseMatrix, logvar: &DenseMatrix, n: usize) -> Result<KlValue> {
    if mu.shape() != logvar.shape() {
        return Err(Error::shape(
            "kl_loss",
            format!("mu {:?}, logvar {:?}", mu.shape(), logvar.shape()),
        ));
    }
    let inv_n = 1.0 / n as f64;
    let mut value = 0.0;
    let mut grad_mu = DenseMatrix::zeros(mu.rows(), mu.cols());
    let mut grad_logvar = DenseMatrix::zeros(mu.rows(), mu.cols());
    for (k, (&m, &lv)) in mu.data().iter().zip(logvar.data()).enumerate() {
        let var = clamped_exp(lv);
        value += 0.5 * (var + m * m - 1.0 - lv);
        grad_mu.data_mut()[k] = inv_n * m;
        grad_logvar.data_mut()[k] = inv_n * 0.5 * (var - 1.0);
    }
    Ok(KlValue {
        value: inv_n * value,
        grad_mu,
        grad_logvar,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderGrads {
    pub w0: DenseMatrix,
    pub w1_mu: DenseMatrix,
    pub w1_sigma: Option<DenseMatrix>,
}

/// Backpropagates `∂L/∂z` (plus optional KL gradients on μ and logvar) to the weights.
pub fn encoder_backward(
    inputs: &EncoderInputs,
    params: &EncoderParams,
    output: &EncoderOutput,
    grad_z: &DenseMatrix,
    kl: Option<&KlValue>,
) -> Result<EncoderGrads> {
    if grad_z.shape() != output.z.shape() {
        return Err(Error::shape(
            "encoder_backward",
            format!("grad_z {:?}, z {:?}", grad_z.shape(), output.z.shape()),
        ));
    }
    if kl.is_some() && !params.is_variational() {
        return Err(Error::config(
            "KL gradients supplied to a non-variational encoder",
        ));
    }

    let mut grad_mu = grad_z.clone();
    let mut grad_logvar = None;
    if let (Some(lv), Some(w_sigma)) = (&output.logvar, &params.w1_sigma) {
        let mut g = DenseMatrix::zeros(lv.rows(), lv.cols());
        // A mean-only forward (no ε) leaves logvar off the path to z.
        if let Some(eps) = &output.noise {
            for (((o, &gz), &e), &l) in g
                .data_mut()
                .iter_mut()
                .zip(grad_z.data())
                .zip(eps.data())
                .zip(lv.data())
            {
                *o = gz * e * 0.5 * clamped_exp(0.5 * l);
            }
        }
        if let Some(kl) = kl {
            grad_mu.add_assign(&kl.grad_mu)?;
            g.add_assign(&kl.grad_logvar)?;
        }
        grad_logvar = Some((g, w_sigma));
    }

    let grad_w1_mu = output.h1.matmul_tn(&grad_mu)?;
    let mut grad_h1 = grad_mu.matmul_nt(&params.w1_mu)?;
    let grad_w1_sigma = match grad_logvar {
        Some((g, w_sigma)) => {
            grad_h1.add_assign(&g.matmul_nt(w_sigma)?)?;
            Some(output.h1.matmul_tn(&g)?)
        }
        None => None,
    };

    let mut grad_pre1 = inputs.a_norm_t.spmm(&grad_h1)?;
    for (g, &a) in grad_pre1.data_mut().iter_mut().zip(output.z1.data()) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
    let grad_xw0 = inputs.a_norm_t.spmm(&grad_pre1)?;
    let grad_w0 = inputs.features_t.spmm(&grad_xw0)?;

    Ok(EncoderGrads {
        w0: grad_w0,
        w1_mu: grad_w1_mu,
        w1_sigma: grad_w1_sigma,
    })
}

/// Independent Adam state for each encoder weight matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderOptim {
    pub w0: AdamState,
    pub w1_mu: AdamState,
    pub w1_sigma: Option<AdamState>,
}

impl EncoderOptim {
    pub fn new(params: &EncoderParams, learning_rate: f64) -> Self {
        Self {
            w0: AdamState::for_param(&params.w0, learning_rate),
            w1_mu: AdamState::for_param(&params.w1_mu, learning_rate),
            w1_sigma: params
                .w1_sigma
                .as_ref()
                .map(|w| AdamState::for_param(w, learning_rate)),
        }
    }

    pub fn step(&mut self, params: &mut EncoderParams, grads: &EncoderGrads) -> Result<()> {
        adam_step(&mut params.w0, &grads.w0, &mut self.w0)?;
        adam_step(&mut params.w1_mu, &grads.w1_mu, &mut self.w1_mu)?;
        match (&mut params.w1_sigma, &grads.w1_sigma, &mut self.w1_sigma) {
            (Some(w), Some(g), Some(st)) => adam_step(w, g, st),
            (None, None, _) => Ok(()),
            _ => Err(Error::config("variational weights and gradients disagree")),
        }
    }
}
