use super::dense::DenseMatrix;
use super::rng::Rng;

/// Inputs to `exp` are clamped to `[-EXP_CLAMP, EXP_CLAMP]`.
pub const EXP_CLAMP: f64 = 80.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Exp,
}

#[inline]
pub fn relu(v: f64) -> f64 {
    v.max(0.0)
}

#[inline]
pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn clamped_exp(v: f64) -> f64 {
    v.clamp(-EXP_CLAMP, EXP_CLAMP).exp()
}

/// `ln(1 + e^v)` without overflow.
#[inline]
pub fn softplus(v: f64) -> f64 {
    v.max(0.0) + (-v.abs()).exp().ln_1p()
}

pub fn elementwise(x: &DenseMatrix, kind: Activation) -> DenseMatrix {
    match kind {
        Activation::Relu => x.map(relu),
        Activation::Sigmoid => x.map(sigmoid),
        Activation::Exp => x.map(clamped_exp),
    }
}

/// Glorot-uniform init: i.i.d. entries on `[-s, s]`, `s = sqrt(6 / (rows + cols))`.
pub fn glorot_init(rows: usize, cols: usize, rng: &mut Rng) -> DenseMatrix {
    let s = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.uniform_range(-s, s)).collect();
    DenseMatrix::from_vec(rows, cols, data).expect("length matches by construction")
}
