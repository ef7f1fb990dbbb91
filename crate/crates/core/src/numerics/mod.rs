//! Dense linear algebra, Haar sampling, Gauss–Hermite rules and seeded
//! random streams.

mod decomp;
mod matrix;
mod quadrature;
mod rng;

pub use decomp::{
    haar_orthogonal, log_abs_det, polar_decompose, svd, Svd, INVERTIBILITY_THRESHOLD,
};
pub(crate) use decomp::{haar_raw, log_abs_det_raw, svd_full, svd_raw};
pub use matrix::DenseMatrix;
pub(crate) use matrix::{embed_lower, norm_sq, row_times};
pub use quadrature::{
    gauss_hermite, pairwise_sum, GaussianCubature, QuadratureRule, TensorNodes, MAX_ORDER,
};
pub use rng::RngStream;
