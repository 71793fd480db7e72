use alloc::vec::Vec;

use super::{axpy, norm};
use crate::{Error, Result};

/// Central finite differences `(f(x + h e_j) - f(x - h e_j)) / 2h` for every
/// coordinate `j`.
///
/// This is the reference the hand-derived gradients are tested against; keep
/// it free of any knowledge of the functions it differentiates.
pub fn finite_difference_gradient<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidInput("finite-difference step must be positive".into()));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let orig = probe[j];
        probe[j] = orig + h;
        let plus = f(&probe)?;
        probe[j] = orig - h;
        let minus = f(&probe)?;
        probe[j] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Evaluation { index: j });
        }
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}

/// `‖a - b‖ / max(‖a‖, ‖b‖, floor)`.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let mut diff = a.to_vec();
    axpy(-1.0, b, &mut diff);
    norm(&diff) / norm(a).max(norm(b)).max(floor)
}
