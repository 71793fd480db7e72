use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::numerics::{
    dot, gumbel_noise, norm, sigmoid_scalar, softmax, sqrt, DenseMatrix, SeededRng,
};
use crate::{Error, Result};

/// Floor applied to mixture probabilities before taking logs.
pub const PI_FLOOR: f64 = 1e-12;

/// Agent hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentHyper {
    /// Number of mixture components.
    pub n_gaussians: usize,
    /// Gumbel-Softmax temperature.
    pub tau: f64,
    pub learning_rate: f64,
    /// Number of most recent queries averaged into the context.
    pub window: usize,
    /// Samples drawn (and products shown) per round.
    pub n_display: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for AgentHyper {
    fn default() -> Self {
        Self {
            n_gaussians: 3,
            tau: 1.0,
            learning_rate: 0.1,
            window: 3,
            n_display: 6,
            batch_size: 32,
            epochs: 30,
            seed: 0,
        }
    }
}

impl AgentHyper {
    pub fn validate(&self) -> Result<()> {
        if self.n_gaussians == 0 {
            return Err(Error::Config("need at least one Gaussian".into()));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::Config(format!("temperature must be > 0, got {}", self.tau)));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.window == 0 || self.n_display == 0 || self.batch_size == 0 {
            return Err(Error::Config("window, display count and batch size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Mixture head: one mean map and one covariance factor per component, and a
/// gate producing the mixture weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    /// `k × k` each.
    pub w_mu: Vec<DenseMatrix>,
    pub b_mu: Vec<Vec<f64>>,
    /// Covariance factors, `k × k` each; component `i` has covariance `L_i L_iᵀ`.
    pub l: Vec<DenseMatrix>,
    /// `n_gaussians × k`
    pub w_g: DenseMatrix,
    pub b_g: Vec<f64>,
}

fn scaled_uniform(rows: usize, cols: usize, rng: &mut SeededRng) -> DenseMatrix {
    let a = sqrt(6.0 / (rows + cols) as f64);
    DenseMatrix::from_fn(rows, cols, |_, _| rng.uniform_range(-a, a))
}

impl AgentParams {
    pub fn zeros(n_gaussians: usize, k: usize) -> Self {
        Self {
            w_mu: vec![DenseMatrix::zeros(k, k); n_gaussians],
            b_mu: vec![vec![0.0; k]; n_gaussians],
            l: vec![DenseMatrix::zeros(k, k); n_gaussians],
            w_g: DenseMatrix::zeros(n_gaussians, k),
            b_g: vec![0.0; n_gaussians],
        }
    }

    /// Scaled-uniform mean and gate maps, `L_i = 0.1·I`, zero biases.
    pub fn init(n_gaussians: usize, k: usize, rng: &mut SeededRng) -> Result<Self> {
        if n_gaussians == 0 || k == 0 {
            return Err(Error::Config("agent dimensions must be positive".into()));
        }
        let mut p = Self::zeros(n_gaussians, k);
        for w in &mut p.w_mu {
            *w = scaled_uniform(k, k, rng);
        }
        for l in &mut p.l {
            *l = DenseMatrix::identity(k);
            l.scale(0.1);
        }
        p.w_g = scaled_uniform(n_gaussians, k, rng);
        Ok(p)
    }

    pub fn n_gaussians(&self) -> usize {
        self.b_g.len()
    }

    pub fn k(&self) -> usize {
        self.w_g.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let (g, k) = (self.n_gaussians(), self.k());
        if g == 0 {
            return Err(Error::InvalidInput("agent has no Gaussians".into()));
        }
        for (what, expected, got) in [
            ("mean maps", g, self.w_mu.len()),
            ("mean biases", g, self.b_mu.len()),
            ("covariance factors", g, self.l.len()),
            ("gate rows", g, self.w_g.rows()),
        ] {
            if expected != got {
                return Err(Error::shape(what, expected, got));
            }
        }
        for i in 0..g {
            for (what, m) in [("mean map", &self.w_mu[i]), ("covariance factor", &self.l[i])] {
                if m.rows() != k || m.cols() != k {
                    return Err(Error::shape(what, k * k, m.rows() * m.cols()));
                }
            }
            if self.b_mu[i].len() != k {
                return Err(Error::shape("mean bias", k, self.b_mu[i].len()));
            }
        }
        if !self.to_flat().iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("agent parameters contain non-finite values".into()));
        }
        Ok(())
    }

    /// Weights in the order W_μ (per component), b_μ, L, W_g, b_g.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.w_mu.iter().for_each(|m| out.extend_from_slice(m.as_slice()));
        self.b_mu.iter().for_each(|b| out.extend_from_slice(b));
        self.l.iter().for_each(|m| out.extend_from_slice(m.as_slice()));
        out.extend_from_slice(self.w_g.as_slice());
        out.extend_from_slice(&self.b_g);
        out
    }

    pub fn num_params(&self) -> usize {
        let (g, k) = (self.n_gaussians(), self.k());
        g * (2 * k * k + k) + g * k + g
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::shape("flat agent parameters", self.num_params(), flat.len()));
        }
        let mut rest = flat;
        let mut take = |dst: &mut [f64]| {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        };
        self.w_mu.iter_mut().for_each(|m| take(m.as_mut_slice()));
        self.b_mu.iter_mut().for_each(|b| take(b));
        self.l.iter_mut().for_each(|m| take(m.as_mut_slice()));
        take(self.w_g.as_mut_slice());
        take(&mut self.b_g);
        Ok(())
    }

    /// `self += alpha · other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &Self) {
        for (a, b) in self.w_mu.iter_mut().zip(&other.w_mu) {
            a.add_scaled(alpha, b);
        }
        for (a, b) in self.b_mu.iter_mut().zip(&other.b_mu) {
            crate::numerics::axpy(alpha, b, a);
        }
        for (a, b) in self.l.iter_mut().zip(&other.l) {
            a.add_scaled(alpha, b);
        }
        self.w_g.add_scaled(alpha, &other.w_g);
        crate::numerics::axpy(alpha, &other.b_g, &mut self.b_g);
    }
}

/// Mean of the window of query projections (newest last).
pub fn context_mean<V: AsRef<[f64]>>(window: &[V], max_window: usize) -> Result<Vec<f64>> {
    if window.is_empty() {
        return Err(Error::InvalidInput("empty context window".into()));
    }
    if window.len() > max_window {
        return Err(Error::InvalidInput(format!(
            "window of {} exceeds the limit of {max_window}",
            window.len()
        )));
    }
    crate::numerics::mean_of(window)
}

/// Component means and mixture probabilities for a context vector.
pub fn gmm_head(params: &AgentParams, context: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let k = params.k();
    if context.len() != k {
        return Err(Error::shape("context vector", k, context.len()));
    }
    let mut means = Vec::with_capacity(params.n_gaussians());
    for (w, b) in params.w_mu.iter().zip(&params.b_mu) {
        let mut pre = b.clone();
        w.matvec_acc(context, &mut pre);
        means.push(pre.into_iter().map(sigmoid_scalar).collect());
    }
    let mut logits = params.b_g.clone();
    params.w_g.matvec_acc(context, &mut logits);
    let pi = softmax(&logits)?;
    Ok((means, pi))
}

/// Relaxed one-hot weights `softmax((log max(π, floor) + g) / τ)`.
pub fn gumbel_softmax(pi: &[f64], gumbel: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0) {
        return Err(Error::Config(format!("temperature must be > 0, got {tau}")));
    }
    if pi.len() != gumbel.len() {
        return Err(Error::shape("Gumbel noise", pi.len(), gumbel.len()));
    }
    let z: Vec<f64> = pi
        .iter()
        .zip(gumbel)
        .map(|(p, g)| (crate::numerics::ln(p.max(PI_FLOOR)) + g) / tau)
        .collect();
    softmax(&z)
}

/// `Σ_i w_i (μ_i + L_i ε)`.
pub fn sample_reparam(
    means: &[Vec<f64>],
    factors: &[DenseMatrix],
    weights: &[f64],
    eps: &[f64],
) -> Result<Vec<f64>> {
    if means.len() != weights.len() || factors.len() != weights.len() {
        return Err(Error::shape("mixture components", weights.len(), means.len().min(factors.len())));
    }
    let k = eps.len();
    let mut y = vec![0.0; k];
    for ((mu, l), &w) in means.iter().zip(factors).zip(weights) {
        if mu.len() != k || l.rows() != k || l.cols() != k {
            return Err(Error::shape("component dimension", k, mu.len()));
        }
        let mut c = mu.clone();
        l.matvec_acc(eps, &mut c);
        crate::numerics::axpy(w, &c, &mut y);
    }
    Ok(y)
}

/// Negative mean of the `N × N` cosine matrix between samples and truths.
pub fn cosine_loss<A: AsRef<[f64]>, B: AsRef<[f64]>>(samples: &[A], truths: &[B]) -> Result<f64> {
    if samples.is_empty() || truths.is_empty() {
        return Err(Error::InvalidInput("cosine loss needs samples and truths".into()));
    }
    let mut s = 0.0;
    for y_hat in samples {
        for y in truths {
            s += crate::numerics::cosine_similarity(y.as_ref(), y_hat.as_ref())?;
        }
    }
    Ok(-s / (samples.len() * truths.len()) as f64)
}

/// Frozen noise for one round: a Gumbel vector and a standard normal vector
/// per displayed sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundNoise {
    pub gumbel: Vec<Vec<f64>>,
    pub eps: Vec<Vec<f64>>,
}

impl RoundNoise {
    pub fn draw(n_display: usize, n_gaussians: usize, k: usize, rng: &mut SeededRng) -> Self {
        let mut gumbel = Vec::with_capacity(n_display);
        let mut eps = Vec::with_capacity(n_display);
        for _ in 0..n_display {
            gumbel.push((0..n_gaussians).map(|_| gumbel_noise(rng)).collect());
            eps.push((0..k).map(|_| rng.standard_normal()).collect());
        }
        Self { gumbel, eps }
    }
}

/// One training example: recent query projections and the displayed
/// products' projections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    /// Newest last.
    pub window: Vec<Vec<f64>>,
    pub truth: Vec<Vec<f64>>,
}

/// Intermediates of one forward pass, kept for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundForward {
    pub context: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub pi: Vec<f64>,
    /// Per sample, the Gumbel-Softmax weights.
    pub weights: Vec<Vec<f64>>,
    /// Per sample and component, `μ_i + L_i ε_j`.
    components: Vec<Vec<Vec<f64>>>,
    pub samples: Vec<Vec<f64>>,
}

/// Forward pass with explicit noise.
pub fn forward_with_noise(
    params: &AgentParams,
    hyper: &AgentHyper,
    window: &[Vec<f64>],
    noise: &RoundNoise,
) -> Result<RoundForward> {
    let context = context_mean(window, hyper.window)?;
    let (means, pi) = gmm_head(params, &context)?;
    let n = noise.gumbel.len();
    if noise.eps.len() != n {
        return Err(Error::shape("noise draws", n, noise.eps.len()));
    }
    let mut weights = Vec::with_capacity(n);
    let mut components = Vec::with_capacity(n);
    let mut samples = Vec::with_capacity(n);
    for (g, eps) in noise.gumbel.iter().zip(&noise.eps) {
        if eps.len() != params.k() {
            return Err(Error::shape("normal noise", params.k(), eps.len()));
        }
        let w = gumbel_softmax(&pi, g, hyper.tau)?;
        let comps: Vec<Vec<f64>> = means
            .iter()
            .zip(&params.l)
            .map(|(mu, l)| {
                let mut c = mu.clone();
                l.matvec_acc(eps, &mut c);
                c
            })
            .collect();
        let mut y = vec![0.0; params.k()];
        for (c, &wi) in comps.iter().zip(&w) {
            crate::numerics::axpy(wi, c, &mut y);
        }
        weights.push(w);
        components.push(comps);
        samples.push(y);
    }
    Ok(RoundForward {
        context,
        means,
        pi,
        weights,
        components,
        samples,
    })
}

/// Draws one (Gumbel, normal) noise pair per displayed sample and runs the
/// forward pass.
pub fn forward_round(
    params: &AgentParams,
    hyper: &AgentHyper,
    sample: &TrainingSample,
    rng: &mut SeededRng,
) -> Result<RoundForward> {
    let noise = RoundNoise::draw(hyper.n_display, params.n_gaussians(), params.k(), rng);
    forward_with_noise(params, hyper, &sample.window, &noise)
}

/// Adds `scale · ∂(cosine_loss)/∂θ` for one round to `grad`.
pub fn backward_round(
    params: &AgentParams,
    hyper: &AgentHyper,
    fwd: &RoundForward,
    noise: &RoundNoise,
    truths: &[Vec<f64>],
    scale: f64,
    grad: &mut AgentParams,
) -> Result<()> {
    let k = params.k();
    let n_g = params.n_gaussians();
    let pairs = (fwd.samples.len() * truths.len()) as f64;
    let truth_norms: Vec<f64> = truths.iter().map(|y| norm(y)).collect();
    if truth_norms.iter().any(|&n| n == 0.0) {
        return Err(Error::Degenerate("zero-norm target".into()));
    }

    let mut d_means = vec![vec![0.0; k]; n_g];
    let mut d_logpi = vec![0.0; n_g];
    for (j, y_hat) in fwd.samples.iter().enumerate() {
        let yn = norm(y_hat);
        if yn == 0.0 {
            return Err(Error::Degenerate("zero-norm sample".into()));
        }
        // d/dŷ of −cos(y, ŷ) summed over truths.
        let mut dy = vec![0.0; k];
        for (y, &tn) in truths.iter().zip(&truth_norms) {
            let cos = dot(y, y_hat) / (tn * yn);
            for c in 0..k {
                dy[c] -= y[c] / (tn * yn) - cos * y_hat[c] / (yn * yn);
            }
        }
        dy.iter_mut().for_each(|v| *v *= scale / pairs);

        let w = &fwd.weights[j];
        let mut dw = vec![0.0; n_g];
        for i in 0..n_g {
            crate::numerics::axpy(w[i], &dy, &mut d_means[i]);
            grad.l[i].add_outer(w[i], &dy, &noise.eps[j]);
            dw[i] = dot(&dy, &fwd.components[j][i]);
        }
        let wdw: f64 = w.iter().zip(&dw).map(|(a, b)| a * b).sum();
        for i in 0..n_g {
            d_logpi[i] += w[i] * (dw[i] - wdw) / hyper.tau;
        }
    }

    // Through the floor and the gate softmax.
    let d_pi: Vec<f64> = fwd
        .pi
        .iter()
        .zip(&d_logpi)
        .map(|(&p, &d)| if p > PI_FLOOR { d / p } else { 0.0 })
        .collect();
    let pdp: f64 = fwd.pi.iter().zip(&d_pi).map(|(a, b)| a * b).sum();
    let d_gate: Vec<f64> = fwd.pi.iter().zip(&d_pi).map(|(p, d)| p * (d - pdp)).collect();
    grad.w_g.add_outer(1.0, &d_gate, &fwd.context);
    crate::numerics::axpy(1.0, &d_gate, &mut grad.b_g);

    for i in 0..n_g {
        let d_pre: Vec<f64> = d_means[i]
            .iter()
            .zip(&fwd.means[i])
            .map(|(d, m)| d * m * (1.0 - m))
            .collect();
        grad.w_mu[i].add_outer(1.0, &d_pre, &fwd.context);
        crate::numerics::axpy(1.0, &d_pre, &mut grad.b_mu[i]);
    }
    Ok(())
}

/// Mean loss over a batch with frozen noise, and its gradient.
pub fn batch_loss_grad(
    params: &AgentParams,
    hyper: &AgentHyper,
    batch: &[(&TrainingSample, &RoundNoise)],
) -> Result<(f64, AgentParams)> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let scale = 1.0 / batch.len() as f64;
    let mut grad = AgentParams::zeros(params.n_gaussians(), params.k());
    let mut loss = 0.0;
    for (sample, noise) in batch {
        let fwd = forward_with_noise(params, hyper, &sample.window, noise)?;
        loss += cosine_loss(&fwd.samples, &sample.truth)?;
        backward_round(params, hyper, &fwd, noise, &sample.truth, scale, &mut grad)?;
    }
    Ok((loss * scale, grad))
}

/// Mean loss over a batch with frozen noise.
pub fn batch_loss(
    params: &AgentParams,
    hyper: &AgentHyper,
    batch: &[(&TrainingSample, &RoundNoise)],
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let mut loss = 0.0;
    for (sample, noise) in batch {
        let fwd = forward_with_noise(params, hyper, &sample.window, noise)?;
        loss += cosine_loss(&fwd.samples, &sample.truth)?;
    }
    Ok(loss / batch.len() as f64)
}
