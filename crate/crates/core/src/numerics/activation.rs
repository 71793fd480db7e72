use alloc::format;
use alloc::vec::Vec;

use super::{ensure_finite, exp, ln, norm, dot, SeededRng};
use crate::{Error, Result};

#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// Element-wise logistic function.
pub fn sigmoid(x: &[f64]) -> Result<Vec<f64>> {
    ensure_finite(x, "sigmoid input")?;
    Ok(x.iter().map(|&v| sigmoid_scalar(v)).collect())
}

/// Softmax with max-subtraction.
pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::InvalidInput("softmax of an empty vector".into()));
    }
    ensure_finite(v, "softmax input")?;
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = v.iter().map(|&x| exp(x - max)).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    Ok(out)
}

pub fn log_softmax(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::InvalidInput("log_softmax of an empty vector".into()));
    }
    ensure_finite(v, "log_softmax input")?;
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + ln(v.iter().map(|&x| exp(x - max)).sum::<f64>());
    Ok(v.iter().map(|&x| x - lse).collect())
}

/// `a·b / (‖a‖‖b‖)`. A zero-norm operand is reported as degenerate, which in
/// practice means a collapsed embedding.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape("cosine operand", a.len(), b.len()));
    }
    let na = norm(a);
    let nb = norm(b);
    if !(na > 0.0) || !(nb > 0.0) {
        return Err(Error::Degenerate(format!(
            "cosine similarity of a zero-norm vector (norms {na}, {nb})"
        )));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Standard Gumbel variate from a uniform draw: `-ln(-ln u)`.
#[inline]
pub fn gumbel_from_uniform(u: f64) -> f64 {
    -ln(-ln(u))
}

pub fn gumbel_noise(rng: &mut SeededRng) -> f64 {
    gumbel_from_uniform(rng.uniform_open())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(&[0.0]).unwrap(), vec![0.5]);
        // 1/(1+e^-2) evaluated with 50-digit arithmetic.
        let s = sigmoid(&[2.0]).unwrap()[0];
        assert!((s - 0.880_797_077_977_882_3).abs() < 1e-15);
        for x in [-30.0, -2.5, 0.3, 7.0, 700.0] {
            let p = sigmoid(&[x, -x]).unwrap();
            assert!((p[0] + p[1] - 1.0).abs() < 1e-15);
        }
        assert!(sigmoid(&[f64::INFINITY]).is_err());
        assert!(sigmoid(&[f64::NAN]).is_err());
    }

    #[test]
    fn softmax_values() {
        let p = softmax(&[4.0, 4.0, 4.0]).unwrap();
        p.iter().for_each(|&x| assert!((x - 1.0 / 3.0).abs() < 1e-15));
        let p = softmax(&[1000.0, 0.0]).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1] >= 0.0 && p[1] < 1e-300);
        // exp(i)/sum exp, reference from 50-digit arithmetic.
        let p = softmax(&[1.0, 2.0, 3.0]).unwrap();
        let want = [0.090_030_573_170_380_46, 0.244_728_471_054_797_64, 0.665_240_955_774_821_9];
        for (a, b) in p.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(softmax(&[]).is_err());
    }

    #[test]
    fn log_softmax_matches_softmax() {
        let v = [0.3, -1.2, 2.5, 0.0];
        let p = softmax(&v).unwrap();
        let lp = log_softmax(&v).unwrap();
        for (a, b) in p.iter().zip(&lp) {
            assert!((ln(*a) - b).abs() < 1e-14);
        }
    }

    #[test]
    fn cosine_cases() {
        let a = [1.0, -2.0, 0.5];
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!((cosine_similarity(&a, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn gumbel_analytic_points() {
        let e = core::f64::consts::E;
        assert!(gumbel_from_uniform(exp(-1.0)).abs() < 1e-15);
        assert!((gumbel_from_uniform(exp(-e)) + 1.0).abs() < 1e-14);
    }
}
