//! Central finite differences against the analytic gradients.

use rwr_gae::gcn_autoencoder::{
    encode, encoder_backward, kl_loss, reconstruction_loss, EncoderInputs, EncoderParams,
    ReconTarget,
};
use rwr_gae::graphio::{normalized_adjacency_from_edges, Edge};
use rwr_gae::numkit::{DenseMatrix, Rng};
use rwr_gae::skipgram::{skipgram_loss_and_grads, ContextTable, SkipgramBatch, SkipgramMode};

pub const STEP: f64 = 1e-5;

/// `‖analytic − numeric‖∞ / max(‖analytic‖∞, ‖numeric‖∞)`.
pub fn rel_err(analytic: &DenseMatrix, numeric: &DenseMatrix) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape());
    let inf = |m: &DenseMatrix| m.data().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let diff = analytic
        .data()
        .iter()
        .zip(numeric.data())
        .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    let scale = inf(analytic).max(inf(numeric));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

pub fn numeric_grad(x: &DenseMatrix, mut f: impl FnMut(&DenseMatrix) -> f64) -> DenseMatrix {
    let mut probe = x.clone();
    let mut g = DenseMatrix::zeros(x.rows(), x.cols());
    for k in 0..x.data().len() {
        let orig = probe.data()[k];
        probe.data_mut()[k] = orig + STEP;
        let up = f(&probe);
        probe.data_mut()[k] = orig - STEP;
        let down = f(&probe);
        probe.data_mut()[k] = orig;
        g.data_mut()[k] = (up - down) / (2.0 * STEP);
    }
    g
}

pub struct Fixture {
    pub n: usize,
    pub edges: Vec<Edge>,
    pub inputs: EncoderInputs,
    pub target: ReconTarget,
    pub table: ContextTable,
    pub pairs: Vec<(usize, usize)>,
    pub noise_seed: u64,
    seed: u64,
}

/// Random graph with 3..=8 nodes, 1..=5 dense features, hidden width 3 and latent width 2.
pub fn fixture(seed: u64) -> Fixture {
    let mut rng = Rng::new(seed);
    let n = 3 + rng.below(6);
    let h = 1 + rng.below(5);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.uniform() < 0.4 {
                edges.push((i, j));
            }
        }
    }
    if edges.is_empty() {
        edges.push((0, 1));
    }
    let x = DenseMatrix::from_vec(n, h, (0..n * h).map(|_| rng.uniform()).collect()).unwrap();
    let inputs =
        EncoderInputs::from_dense_features(&x, normalized_adjacency_from_edges(n, &edges)).unwrap();
    let target = ReconTarget::new(n, &edges);
    let mut table = ContextTable::zeros(n, 2);
    table
        .c
        .data_mut()
        .iter_mut()
        .for_each(|v| *v = rng.normal());
    let pairs = (0..6).map(|_| (rng.below(n), rng.below(n))).collect();
    Fixture {
        n,
        edges,
        inputs,
        target,
        table,
        pairs,
        noise_seed: rng.next_u64(),
        seed,
    }
}

impl Fixture {
    /// Encoder weights drawn at a larger scale than Glorot so gradients are not tiny.
    pub fn params(&self, variational: bool) -> EncoderParams {
        let mut rng = Rng::new(self.seed ^ 0x9e37_79b9);
        let h = self.inputs.feature_dim();
        let mut draw = |r: usize, c: usize| {
            DenseMatrix::from_vec(r, c, (0..r * c).map(|_| rng.normal()).collect()).unwrap()
        };
        EncoderParams {
            w0: draw(h, 3),
            w1_mu: draw(3, 2),
            w1_sigma: variational.then(|| draw(3, 2).scale(0.3)),
        }
    }

    pub fn random_matrix(&self, rows: usize, cols: usize, salt: u64) -> DenseMatrix {
        let mut rng = Rng::new(self.seed.wrapping_mul(31).wrapping_add(salt));
        DenseMatrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect()).unwrap()
    }

    pub fn batch(&self, mode: SkipgramMode, negatives: usize) -> SkipgramBatch<'static> {
        SkipgramBatch {
            pairs: self.pairs.clone(),
            negatives_per_pair: negatives,
            mode,
            noise: None,
        }
    }
}

/// Reconstruction loss with respect to the embedding.
pub fn reconstruction(seed: u64) -> f64 {
    let f = fixture(seed);
    let z = f.random_matrix(f.n, 2, 1);
    let analytic = reconstruction_loss(&z, &f.target).unwrap().grad_z;
    let numeric = numeric_grad(&z, |z| reconstruction_loss(z, &f.target).unwrap().value);
    rel_err(&analytic, &numeric)
}

/// KL term with respect to μ and logvar.
pub fn kl(seed: u64) -> f64 {
    let f = fixture(seed);
    let mu = f.random_matrix(f.n, 2, 2);
    let lv = f.random_matrix(f.n, 2, 3).scale(0.5);
    let k = kl_loss(&mu, &lv, f.n).unwrap();
    let g_mu = numeric_grad(&mu, |m| kl_loss(m, &lv, f.n).unwrap().value);
    let g_lv = numeric_grad(&lv, |l| kl_loss(&mu, l, f.n).unwrap().value);
    rel_err(&k.grad_mu, &g_mu).max(rel_err(&k.grad_logvar, &g_lv))
}

/// Skip-gram loss with respect to the embedding and the context table. Negative sampling
/// redraws the same negatives on every evaluation because the sampler is reseeded.
pub fn skipgram(seed: u64, mode: SkipgramMode) -> f64 {
    let f = fixture(seed);
    let z = f.random_matrix(f.n, 2, 4);
    let batch = f.batch(mode, 3);
    let eval = |z: &DenseMatrix, table: &ContextTable| {
        skipgram_loss_and_grads(z, table, &batch, &mut Rng::new(f.noise_seed)).unwrap()
    };
    let g = eval(&z, &f.table);
    let g_z = numeric_grad(&z, |z| eval(z, &f.table).loss);
    let g_c = numeric_grad(&f.table.c, |c| {
        eval(&z, &ContextTable { c: c.clone() }).loss
    });
    rel_err(&g.grad_z.to_dense(f.n), &g_z).max(rel_err(&g.grad_c.to_dense(f.n), &g_c))
}

/// Reconstruction + KL (variational) + full-softmax skip-gram, through the encoder, with
/// respect to every weight matrix and the context table.
pub fn composite(seed: u64, variational: bool) -> f64 {
    let f = fixture(seed);
    let params = f.params(variational);
    let batch = f.batch(SkipgramMode::FullSoftmax, 0);
    let loss = |p: &EncoderParams, table: &ContextTable| {
        let out = encode(&f.inputs, p, &mut Rng::new(f.noise_seed)).unwrap();
        let mut total = reconstruction_loss(&out.z, &f.target).unwrap().value;
        if let Some(lv) = &out.logvar {
            total += kl_loss(&out.mu, lv, f.n).unwrap().value;
        }
        total
            + skipgram_loss_and_grads(&out.z, table, &batch, &mut Rng::new(0))
                .unwrap()
                .loss
    };

    let out = encode(&f.inputs, &params, &mut Rng::new(f.noise_seed)).unwrap();
    let recon = reconstruction_loss(&out.z, &f.target).unwrap();
    let sg = skipgram_loss_and_grads(&out.z, &f.table, &batch, &mut Rng::new(0)).unwrap();
    let kl = out
        .logvar
        .as_ref()
        .map(|lv| kl_loss(&out.mu, lv, f.n).unwrap());
    let grad_z = recon.grad_z.add(&sg.grad_z.to_dense(f.n)).unwrap();
    let grads = encoder_backward(&f.inputs, &params, &out, &grad_z, kl.as_ref()).unwrap();

    let mut worst = rel_err(
        &grads.w0,
        &numeric_grad(&params.w0, |w| {
            let mut p = params.clone();
            p.w0 = w.clone();
            loss(&p, &f.table)
        }),
    );
    worst = worst.max(rel_err(
        &grads.w1_mu,
        &numeric_grad(&params.w1_mu, |w| {
            let mut p = params.clone();
            p.w1_mu = w.clone();
            loss(&p, &f.table)
        }),
    ));
    if let (Some(ws), Some(gs)) = (&params.w1_sigma, &grads.w1_sigma) {
        worst = worst.max(rel_err(
            gs,
            &numeric_grad(ws, |w| {
                let mut p = params.clone();
                p.w1_sigma = Some(w.clone());
                loss(&p, &f.table)
            }),
        ));
    }
    worst.max(rel_err(
        &sg.grad_c.to_dense(f.n),
        &numeric_grad(&f.table.c, |c| {
            loss(&params, &ContextTable { c: c.clone() })
        }),
    ))
}
