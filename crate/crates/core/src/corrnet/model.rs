use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::catalog::{EncodedProduct, IMAGE_DIM, TEXT_DIM};
use crate::numerics::{dot, sigmoid_scalar, sqrt, DenseMatrix, SeededRng};
use crate::{Error, Result};

/// Floor on the correlation denominator.
pub const CORR_FLOOR: f64 = 1e-8;

/// Weights of the correlational autoencoder.
///
/// The encoder maps an (image, text) pair to `sigmoid(W·image + V·text + b)`;
/// the decoder maps a hidden vector back to both views through
/// `sigmoid([W′h; V′h] + b′)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrNetParams {
    /// `k × image_dim`
    pub w: DenseMatrix,
    /// `k × text_dim`
    pub v: DenseMatrix,
    pub b: Vec<f64>,
    /// `image_dim × k`
    pub w_dec: DenseMatrix,
    /// `text_dim × k`
    pub v_dec: DenseMatrix,
    /// `image_dim + text_dim`
    pub b_dec: Vec<f64>,
}

fn glorot(rows: usize, cols: usize, rng: &mut SeededRng) -> DenseMatrix {
    let a = sqrt(6.0 / (rows + cols) as f64);
    DenseMatrix::from_fn(rows, cols, |_, _| rng.uniform_range(-a, a))
}

impl CorrNetParams {
    pub fn zeros(k: usize, image_dim: usize, text_dim: usize) -> Self {
        Self {
            w: DenseMatrix::zeros(k, image_dim),
            v: DenseMatrix::zeros(k, text_dim),
            b: vec![0.0; k],
            w_dec: DenseMatrix::zeros(image_dim, k),
            v_dec: DenseMatrix::zeros(text_dim, k),
            b_dec: vec![0.0; image_dim + text_dim],
        }
    }

    /// Uniform Glorot initialisation of every matrix, zero biases.
    pub fn init(k: usize, image_dim: usize, text_dim: usize, rng: &mut SeededRng) -> Result<Self> {
        if k == 0 || image_dim == 0 || text_dim == 0 {
            return Err(Error::Config("CorrNet dimensions must be positive".into()));
        }
        Ok(Self {
            w: glorot(k, image_dim, rng),
            v: glorot(k, text_dim, rng),
            b: vec![0.0; k],
            w_dec: glorot(image_dim, k, rng),
            v_dec: glorot(text_dim, k, rng),
            b_dec: vec![0.0; image_dim + text_dim],
        })
    }

    /// Full-size network over the catalog encoders' dimensions.
    pub fn init_default_dims(k: usize, rng: &mut SeededRng) -> Result<Self> {
        Self::init(k, IMAGE_DIM, TEXT_DIM, rng)
    }

    pub fn k(&self) -> usize {
        self.b.len()
    }

    pub fn image_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn text_dim(&self) -> usize {
        self.v.cols()
    }

    /// Checks that every block agrees on `k` and the view sizes, and that all
    /// weights are finite.
    pub fn validate(&self) -> Result<()> {
        let (k, dx, dy) = (self.k(), self.image_dim(), self.text_dim());
        let checks = [
            ("V rows", k, self.v.rows()),
            ("W′ rows", dx, self.w_dec.rows()),
            ("W′ cols", k, self.w_dec.cols()),
            ("V′ rows", dy, self.v_dec.rows()),
            ("V′ cols", k, self.v_dec.cols()),
            ("W rows", k, self.w.rows()),
            ("b′ length", dx + dy, self.b_dec.len()),
        ];
        for (what, expected, got) in checks {
            if expected != got {
                return Err(Error::shape(what, expected, got));
            }
        }
        let finite = self.w.is_finite()
            && self.v.is_finite()
            && self.w_dec.is_finite()
            && self.v_dec.is_finite()
            && self.b.iter().chain(&self.b_dec).all(|x| x.is_finite());
        if !finite {
            return Err(Error::InvalidInput("CorrNet parameters contain non-finite values".into()));
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    fn blocks(&self) -> [&[f64]; 6] {
        [
            self.w.as_slice(),
            self.v.as_slice(),
            &self.b,
            self.w_dec.as_slice(),
            self.v_dec.as_slice(),
            &self.b_dec,
        ]
    }

    fn blocks_mut(&mut self) -> [&mut [f64]; 6] {
        [
            self.w.as_mut_slice(),
            self.v.as_mut_slice(),
            &mut self.b,
            self.w_dec.as_mut_slice(),
            self.v_dec.as_mut_slice(),
            &mut self.b_dec,
        ]
    }

    /// All weights in the order W, V, b, W′, V′, b′.
    pub fn to_flat(&self) -> Vec<f64> {
        self.blocks().concat()
    }

    /// Overwrites the weights from a vector laid out as [`Self::to_flat`].
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::shape("flat CorrNet parameters", self.num_params(), flat.len()));
        }
        let mut at = 0;
        for block in self.blocks_mut() {
            block.copy_from_slice(&flat[at..at + block.len()]);
            at += block.len();
        }
        Ok(())
    }

    /// `self += alpha · other`, block by block.
    pub fn add_scaled(&mut self, alpha: f64, other: &Self) {
        for (dst, src) in self.blocks_mut().into_iter().zip(other.blocks()) {
            crate::numerics::axpy(alpha, src, dst);
        }
    }

    fn check_view(&self, what: &'static str, expected: usize, v: &[f64]) -> Result<()> {
        if v.len() != expected {
            return Err(Error::shape(what, expected, v.len()));
        }
        Ok(())
    }

    /// Hidden representation of a query. A missing view counts as the zero
    /// vector.
    pub fn project(&self, image: Option<&[f64]>, text: Option<&[f64]>) -> Result<Vec<f64>> {
        if image.is_none() && text.is_none() {
            return Err(Error::InvalidInput("projection needs at least one view".into()));
        }
        let mut pre = self.b.clone();
        if let Some(i) = image {
            self.check_view("image features", self.image_dim(), i)?;
            self.w.matvec_acc(i, &mut pre);
        }
        if let Some(t) = text {
            self.check_view("text features", self.text_dim(), t)?;
            self.v.matvec_acc(t, &mut pre);
        }
        if pre.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite projection input".into()));
        }
        Ok(pre.into_iter().map(sigmoid_scalar).collect())
    }

    /// Decodes a hidden vector into its (image, text) reconstructions.
    pub fn reconstruct(&self, h: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_view("hidden vector", self.k(), h)?;
        if h.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite hidden vector".into()));
        }
        let mut out = self.decode(h);
        let text = out.split_off(self.image_dim());
        Ok((out, text))
    }

    /// Concatenated reconstruction of both views.
    fn decode(&self, h: &[f64]) -> Vec<f64> {
        let dx = self.image_dim();
        let mut out = self.b_dec.clone();
        let (img, txt) = out.split_at_mut(dx);
        self.w_dec.matvec_acc(h, img);
        self.v_dec.matvec_acc(h, txt);
        out.iter_mut().for_each(|x| *x = sigmoid_scalar(*x));
        out
    }
}

fn center(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = rows.len() as f64;
    let k = rows[0].len();
    let mut mean = vec![0.0; k];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    rows.iter()
        .map(|r| r.iter().zip(&mean).map(|(x, m)| x - m).collect())
        .collect()
}

/// Correlation and its gradients with respect to every row of `hx` and `hy`.
fn corr_with_grad(hx: &[Vec<f64>], hy: &[Vec<f64>]) -> (f64, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let a = center(hx);
    let b = center(hy);
    let mut num = 0.0;
    let mut sa = 0.0;
    let mut sb = 0.0;
    for (ra, rb) in a.iter().zip(&b) {
        num += dot(ra, rb);
        sa += dot(ra, ra);
        sb += dot(rb, rb);
    }
    let den = sqrt(sa * sb);
    if den <= CORR_FLOOR {
        let ga = b.iter().map(|r| r.iter().map(|x| x / CORR_FLOOR).collect()).collect();
        let gb = a.iter().map(|r| r.iter().map(|x| x / CORR_FLOOR).collect()).collect();
        return (num / CORR_FLOOR, ga, gb);
    }
    let corr = num / den;
    // Centred rows sum to zero, so these already include the centring step.
    let grad = |own: &[Vec<f64>], other: &[Vec<f64>], s_own: f64| -> Vec<Vec<f64>> {
        own.iter()
            .zip(other)
            .map(|(o, t)| {
                o.iter()
                    .zip(t)
                    .map(|(oi, ti)| ti / den - corr * oi / s_own)
                    .collect()
            })
            .collect()
    };
    let ga = grad(&a, &b, sa);
    let gb = grad(&b, &a, sb);
    (corr, ga, gb)
}

fn check_pair_batch(hx: &[Vec<f64>], hy: &[Vec<f64>]) -> Result<()> {
    if hx.len() != hy.len() {
        return Err(Error::shape("correlation batch", hx.len(), hy.len()));
    }
    if hx.len() < 2 {
        return Err(Error::InvalidInput("correlation needs a batch of at least 2".into()));
    }
    let k = hx[0].len();
    for r in hx.iter().chain(hy) {
        if r.len() != k {
            return Err(Error::shape("hidden vector", k, r.len()));
        }
    }
    Ok(())
}

/// Batch correlation between two sets of hidden vectors: the sum of centred
/// cross-products over the product of the centred Frobenius norms.
pub fn corr_term(hx: &[Vec<f64>], hy: &[Vec<f64>]) -> Result<f64> {
    check_pair_batch(hx, hy)?;
    Ok(corr_with_grad(hx, hy).0)
}

/// Objective value: mean over the batch of the three reconstruction errors
/// (from both views, image only, text only) minus `lambda` times the
/// correlation between the image-only and text-only hidden vectors.
pub fn corrnet_loss(params: &CorrNetParams, batch: &[EncodedProduct], lambda: f64) -> Result<f64> {
    Ok(loss_impl(params, batch, lambda, false)?.0)
}

/// Objective value and its gradient with respect to every weight.
pub fn corrnet_loss_grad(
    params: &CorrNetParams,
    batch: &[EncodedProduct],
    lambda: f64,
) -> Result<(f64, CorrNetParams)> {
    let (loss, grad) = loss_impl(params, batch, lambda, true)?;
    Ok((loss, grad.expect("gradient requested")))
}

/// Reconstruction error of one path plus its decoder gradient; returns
/// `dL/dh` for the path.
fn recon_path(
    params: &CorrNetParams,
    h: &[f64],
    target: &[f64],
    scale: f64,
    grad: Option<&mut CorrNetParams>,
) -> (f64, Vec<f64>) {
    let out = params.decode(h);
    let d = out.len() as f64;
    let mut err = 0.0;
    for (o, z) in out.iter().zip(target) {
        err += (o - z) * (o - z);
    }
    err /= d;
    let Some(g) = grad else {
        return (err, Vec::new());
    };
    let dpre: Vec<f64> = out
        .iter()
        .zip(target)
        .map(|(o, z)| scale * 2.0 * (o - z) / d * o * (1.0 - o))
        .collect();
    let dx = params.image_dim();
    let (di, dt) = dpre.split_at(dx);
    g.w_dec.add_outer(1.0, di, h);
    g.v_dec.add_outer(1.0, dt, h);
    crate::numerics::axpy(1.0, &dpre, &mut g.b_dec);
    let mut dh = vec![0.0; h.len()];
    params.w_dec.matvec_t_acc(di, &mut dh);
    params.v_dec.matvec_t_acc(dt, &mut dh);
    (err, dh)
}

fn loss_impl(
    params: &CorrNetParams,
    batch: &[EncodedProduct],
    lambda: f64,
    want_grad: bool,
) -> Result<(f64, Option<CorrNetParams>)> {
    if batch.len() < 2 {
        return Err(Error::InvalidInput("CorrNet loss needs a batch of at least 2".into()));
    }
    let (k, dx, dy) = (params.k(), params.image_dim(), params.text_dim());
    let n = batch.len();
    let scale = 1.0 / n as f64;
    let mut grad = want_grad.then(|| CorrNetParams::zeros(k, dx, dy));

    let mut recon = 0.0;
    let mut hxs = Vec::with_capacity(n);
    let mut hys = Vec::with_capacity(n);
    // Per example: (dpre_h of the joint path, dL/dh of the image path, dL/dh of the text path).
    let mut pending = Vec::with_capacity(if want_grad { n } else { 0 });
    let mut target = vec![0.0; dx + dy];

    for e in batch {
        params.check_view("image features", dx, &e.image)?;
        params.check_view("text features", dy, &e.text)?;
        let mut wi = vec![0.0; k];
        params.w.matvec_acc(&e.image, &mut wi);
        let mut vt = vec![0.0; k];
        params.v.matvec_acc(&e.text, &mut vt);
        let mut hz = Vec::with_capacity(k);
        let mut hx = Vec::with_capacity(k);
        let mut hy = Vec::with_capacity(k);
        for j in 0..k {
            hz.push(sigmoid_scalar(wi[j] + vt[j] + params.b[j]));
            hx.push(sigmoid_scalar(wi[j] + params.b[j]));
            hy.push(sigmoid_scalar(vt[j] + params.b[j]));
        }
        target[..dx].copy_from_slice(&e.image);
        target[dx..].copy_from_slice(&e.text);

        let (lz, dhz) = recon_path(params, &hz, &target, scale, grad.as_mut());
        let (lx, dhx) = recon_path(params, &hx, &target, scale, grad.as_mut());
        let (ly, dhy) = recon_path(params, &hy, &target, scale, grad.as_mut());
        recon += lz + lx + ly;
        if want_grad {
            let dprez: Vec<f64> = dhz.iter().zip(&hz).map(|(d, h)| d * h * (1.0 - h)).collect();
            pending.push((dprez, dhx, dhy));
        }
        hxs.push(hx);
        hys.push(hy);
    }

    let (corr, ga, gb) = corr_with_grad(&hxs, &hys);
    let loss = recon * scale - lambda * corr;
    if !loss.is_finite() {
        return Err(Error::InvalidInput("CorrNet loss is not finite".into()));
    }

    if let Some(g) = grad.as_mut() {
        for (idx, (e, (dprez, mut dhx, mut dhy))) in batch.iter().zip(pending).enumerate() {
            let hx = &hxs[idx];
            let hy = &hys[idx];
            for j in 0..k {
                dhx[j] = (dhx[j] - lambda * ga[idx][j]) * hx[j] * (1.0 - hx[j]);
                dhy[j] = (dhy[j] - lambda * gb[idx][j]) * hy[j] * (1.0 - hy[j]);
            }
            // The joint path sees both views, the image path only the image,
            // the text path only the text.
            let dimg: Vec<f64> = dprez.iter().zip(&dhx).map(|(a, b)| a + b).collect();
            let dtxt: Vec<f64> = dprez.iter().zip(&dhy).map(|(a, b)| a + b).collect();
            g.w.add_outer(1.0, &dimg, &e.image);
            g.v.add_outer(1.0, &dtxt, &e.text);
            for j in 0..k {
                g.b[j] += dprez[j] + dhx[j] + dhy[j];
            }
        }
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::String;

    fn random_params(k: usize, dx: usize, dy: usize, seed: u64) -> CorrNetParams {
        let mut rng = SeededRng::new(seed, 0);
        let mut p = CorrNetParams::init(k, dx, dy, &mut rng).unwrap();
        p.b.iter_mut().for_each(|x| *x = rng.uniform_range(-0.5, 0.5));
        p.b_dec.iter_mut().for_each(|x| *x = rng.uniform_range(-0.5, 0.5));
        p
    }

    #[test]
    fn zero_params_project_to_half() {
        let p = CorrNetParams::zeros(3, 5, 4);
        let h = p.project(Some(&[1.0; 5]), None).unwrap();
        assert_eq!(h, vec![0.5; 3]);
        let (i, t) = p.reconstruct(&h).unwrap();
        assert_eq!((i.len(), t.len()), (5, 4));
        assert!(i.iter().chain(&t).all(|&x| x == 0.5));
        assert!(p.project(None, None).is_err());
        assert!(p.project(Some(&[1.0; 4]), None).is_err());
    }

    #[test]
    fn projection_matches_explicit_sum() {
        let p = random_params(4, 6, 3, 1);
        let img = [0.3, -1.0, 0.5, 2.0, 0.0, -0.2];
        let txt = [1.0, -0.5, 0.25];
        let h = p.project(Some(&img), Some(&txt)).unwrap();
        for j in 0..4 {
            let mut s = p.b[j];
            for c in 0..6 {
                s += p.w.get(j, c) * img[c];
            }
            for c in 0..3 {
                s += p.v.get(j, c) * txt[c];
            }
            assert!((h[j] - 1.0 / (1.0 + libm::exp(-s))).abs() < 1e-12);
        }
        let zero = p.project(Some(&[0.0; 6]), Some(&[0.0; 3])).unwrap();
        for j in 0..4 {
            assert!((zero[j] - 1.0 / (1.0 + libm::exp(-p.b[j]))).abs() < 1e-15);
        }
    }

    #[test]
    fn reconstruct_by_hand() {
        let mut p = CorrNetParams::zeros(2, 1, 1);
        p.w_dec = DenseMatrix::from_vec(1, 2, vec![1.0, -1.0]).unwrap();
        p.v_dec = DenseMatrix::from_vec(1, 2, vec![0.5, 2.0]).unwrap();
        p.b_dec = vec![0.0, -1.0];
        let (i, t) = p.reconstruct(&[2.0, 1.0]).unwrap();
        // 1·2 − 1·1 = 1; 0.5·2 + 2·1 − 1 = 2.
        assert!((i[0] - 0.7310585786300049).abs() < 1e-15);
        assert!((t[0] - 0.8807970779778823).abs() < 1e-15);
    }

    #[test]
    fn corr_term_edge_cases() {
        let hx = vec![vec![0.1, 0.9], vec![0.4, 0.2], vec![0.7, 0.5]];
        assert!((corr_term(&hx, &hx).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<Vec<f64>> = hx.iter().map(|r| r.iter().map(|x| 1.0 - x).collect()).collect();
        assert!((corr_term(&hx, &neg).unwrap() + 1.0).abs() < 1e-12);
        let flat = vec![vec![0.3, 0.3]; 3];
        assert_eq!(corr_term(&flat, &hx).unwrap(), 0.0);
        assert!(corr_term(&hx[..1], &hx[..1]).is_err());
    }

    fn batch(n: usize, dx: usize, dy: usize, seed: u64) -> Vec<EncodedProduct> {
        let mut rng = SeededRng::new(seed, 1);
        (0..n)
            .map(|i| EncodedProduct {
                id: String::from(alloc::format!("P{i}")),
                image: (0..dx).map(|_| rng.standard_normal()).collect(),
                text: (0..dy).map(|_| rng.standard_normal()).collect(),
            })
            .collect()
    }

    #[test]
    fn loss_without_correlation_is_nonnegative() {
        let p = random_params(3, 5, 4, 2);
        assert!(corrnet_loss(&p, &batch(4, 5, 4, 3), 0.0).unwrap() >= 0.0);
    }

    #[test]
    fn flat_round_trip() {
        let p = random_params(2, 3, 2, 5);
        let mut q = CorrNetParams::zeros(2, 3, 2);
        q.set_flat(&p.to_flat()).unwrap();
        assert_eq!(p, q);
        assert!(q.set_flat(&[0.0]).is_err());
        p.validate().unwrap();
    }
}
