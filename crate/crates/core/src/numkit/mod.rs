//! Numerical core: dense and CSR matrices, activations, initialization, Adam and the RNG.

mod adam;
mod csr;
mod dense;
mod ops;
mod rng;

pub use adam::{adam_step, AdamState};
pub use csr::{spmm, CsrMatrix};
pub use dense::{dot, DenseMatrix};
pub use ops::{
    clamped_exp, elementwise, glorot_init, relu, sigmoid, softplus, Activation, EXP_CLAMP,
};
pub use rng::{Rng, RngState};

/// Dense product, free-function form of [`DenseMatrix::matmul`].
pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> crate::Result<DenseMatrix> {
    a.matmul(b)
}
