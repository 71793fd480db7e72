//! Numeric kernels shared by every learning module.
//!
//! All math goes through `libm` so results are bit-identical across targets,
//! with or without `std`.

mod activation;
mod gradcheck;
mod matrix;
mod rng;

pub use activation::{
    cosine_similarity, gumbel_from_uniform, gumbel_noise, log_softmax, sigmoid, sigmoid_scalar,
    softmax,
};
pub use gradcheck::{finite_difference_gradient, relative_error};
pub use matrix::{axpy, dot, ensure_finite, euclidean_distance, mean_of, norm, DenseMatrix};
pub use rng::{fnv1a64, SeededRng, UNIFORM_CLAMP};

#[inline]
pub(crate) fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub(crate) fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}
