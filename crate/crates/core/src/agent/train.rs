use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::model::{
    batch_loss, batch_loss_grad, cosine_loss, forward_round, AgentHyper, AgentParams, RoundNoise,
    TrainingSample,
};
use crate::catalog::{Catalog, Vocabulary};
use crate::corrnet::CorrNetModel;
use crate::numerics::{cosine_similarity, fnv1a64, SeededRng};
use crate::simulator::{DialogSession, QueryEvent};
use crate::{Error, Result};

/// Share of sessions used for training.
pub const TRAIN_FRACTION: f64 = 0.7;

/// Deterministic train/test assignment from a hash of the session id.
pub fn is_train_session(session_id: &str) -> bool {
    (fnv1a64(session_id.as_bytes()) % 10_000) < (TRAIN_FRACTION * 10_000.0) as u64
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AgentDataset {
    pub train: Vec<TrainingSample>,
    pub test: Vec<TrainingSample>,
}

/// Joint-space projection of one query: text through the text view, a click
/// through the clicked product's image view.
pub struct QueryProjector<'a> {
    model: &'a CorrNetModel,
    vocab: &'a Vocabulary,
    catalog: &'a Catalog,
    image_embeddings: &'a [Vec<f64>],
    text_cache: BTreeMap<Vec<String>, Vec<f64>>,
}

impl<'a> QueryProjector<'a> {
    pub fn new(
        model: &'a CorrNetModel,
        vocab: &'a Vocabulary,
        catalog: &'a Catalog,
        image_embeddings: &'a [Vec<f64>],
    ) -> Result<Self> {
        if image_embeddings.len() != catalog.len() {
            return Err(Error::shape("image embeddings", catalog.len(), image_embeddings.len()));
        }
        Ok(Self {
            model,
            vocab,
            catalog,
            image_embeddings,
            text_cache: BTreeMap::new(),
        })
    }

    pub fn project(&mut self, query: &QueryEvent) -> Result<Vec<f64>> {
        match query {
            QueryEvent::Text { tokens, .. } => {
                if let Some(v) = self.text_cache.get(tokens) {
                    return Ok(v.clone());
                }
                let v = self.model.embed_tokens(tokens, self.vocab)?;
                self.text_cache.insert(tokens.clone(), v.clone());
                Ok(v)
            }
            QueryEvent::ImageClick { product_id, .. } => self.product(product_id),
        }
    }

    pub fn product(&self, id: &str) -> Result<Vec<f64>> {
        let i = self
            .catalog
            .index_of(id)
            .map_err(|_| Error::Data(format!("session references unknown product {id}")))?;
        Ok(self.image_embeddings[i].clone())
    }
}

/// One sample per dialog round: the projections of the last `window`
/// queries and of the round's displayed products.
pub fn session_samples(
    session: &DialogSession,
    projector: &mut QueryProjector<'_>,
    hyper: &AgentHyper,
) -> Result<Vec<TrainingSample>> {
    let queries = session
        .rounds
        .iter()
        .map(|r| projector.project(&r.query))
        .collect::<Result<Vec<_>>>()?;
    session
        .rounds
        .iter()
        .enumerate()
        .map(|(t, round)| {
            let start = (t + 1).saturating_sub(hyper.window);
            let truth = round
                .displayed
                .iter()
                .map(|id| projector.product(id))
                .collect::<Result<Vec<_>>>()?;
            Ok(TrainingSample {
                window: queries[start..=t].to_vec(),
                truth,
            })
        })
        .collect()
}

/// Training and test samples for every round of every session, split by
/// session-id hash.
pub fn build_training_set(
    sessions: &[DialogSession],
    projector: &mut QueryProjector<'_>,
    hyper: &AgentHyper,
) -> Result<AgentDataset> {
    let mut out = AgentDataset::default();
    for s in sessions {
        let samples = session_samples(s, projector, hyper)?;
        if is_train_session(&s.session_id) {
            out.train.extend(samples);
        } else {
            out.test.extend(samples);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentTraining {
    pub params: AgentParams,
    /// Training-set loss under a fixed evaluation noise stream, before
    /// training (`losses[0]`) and after each epoch.
    pub losses: Vec<f64>,
}

fn eval_noise(root: &SeededRng, n: usize, hyper: &AgentHyper, k: usize) -> Vec<RoundNoise> {
    let base = root.derive_named("agent/eval-noise");
    (0..n)
        .map(|i| RoundNoise::draw(hyper.n_display, hyper.n_gaussians, k, &mut base.derive(i as u64)))
        .collect()
}

fn check_samples(samples: &[TrainingSample], hyper: &AgentHyper) -> Result<usize> {
    let k = samples
        .first()
        .and_then(|s| s.window.first())
        .map(Vec::len)
        .ok_or_else(|| Error::InvalidInput("no training samples".into()))?;
    for s in samples {
        if s.window.is_empty() || s.window.len() > hyper.window {
            return Err(Error::Data(format!("window of {} queries", s.window.len())));
        }
        if s.truth.len() != hyper.n_display {
            return Err(Error::Data(format!(
                "{} displayed products, expected {}",
                s.truth.len(),
                hyper.n_display
            )));
        }
        if s.window.iter().chain(&s.truth).any(|v| v.len() != k) {
            return Err(Error::Data("inconsistent embedding dimension".into()));
        }
    }
    Ok(k)
}

/// Untrained parameters for `hyper` (the initialisation training starts from).
pub fn init_agent(hyper: &AgentHyper, k: usize) -> Result<AgentParams> {
    let root = SeededRng::new(hyper.seed, 0);
    AgentParams::init(hyper.n_gaussians, k, &mut root.derive_named("agent/init"))
}

/// Mini-batch gradient descent on the cosine loss with fresh noise per
/// round and epoch.
pub fn train_agent(samples: &[TrainingSample], hyper: &AgentHyper) -> Result<AgentTraining> {
    hyper.validate()?;
    let k = check_samples(samples, hyper)?;
    let root = SeededRng::new(hyper.seed, 0);
    let mut params = init_agent(hyper, k)?;

    let fixed = eval_noise(&root, samples.len(), hyper, k);
    let eval_pairs: Vec<(&TrainingSample, &RoundNoise)> = samples.iter().zip(&fixed).collect();
    let mut losses = Vec::with_capacity(hyper.epochs + 1);
    losses.push(batch_loss(&params, hyper, &eval_pairs)?);

    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 1..=hyper.epochs {
        root.derive_named("agent/order").derive(epoch as u64).shuffle(&mut order);
        let noise_base = root.derive_named("agent/noise").derive(epoch as u64);
        for chunk in order.chunks(hyper.batch_size) {
            let noises: Vec<RoundNoise> = chunk
                .iter()
                .map(|&i| RoundNoise::draw(hyper.n_display, hyper.n_gaussians, k, &mut noise_base.derive(i as u64)))
                .collect();
            let batch: Vec<(&TrainingSample, &RoundNoise)> =
                chunk.iter().map(|&i| &samples[i]).zip(&noises).collect();
            let (loss, grad) =
                batch_loss_grad(&params, hyper, &batch).map_err(|_| Error::Diverged { epoch, loss: f64::NAN })?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            params.add_scaled(-hyper.learning_rate, &grad);
        }
        let loss = batch_loss(&params, hyper, &eval_pairs).unwrap_or(f64::NAN);
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        losses.push(loss);
    }
    Ok(AgentTraining { params, losses })
}

/// Mean over rounds of the average cosine similarity between sampled and
/// displayed products.
pub fn evaluate(
    params: &AgentParams,
    samples: &[TrainingSample],
    hyper: &AgentHyper,
    rng: &mut SeededRng,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("no evaluation samples".into()));
    }
    let mut total = 0.0;
    for s in samples {
        let fwd = forward_round(params, hyper, s, rng)?;
        total -= cosine_loss(&fwd.samples, &s.truth)?;
    }
    Ok(total / samples.len() as f64)
}

/// Greedy distinct decoding: each sample in turn takes its most similar
/// product not yet taken.
pub fn decode_samples(samples: &[Vec<f64>], catalog_embeddings: &[Vec<f64>]) -> Result<Vec<usize>> {
    if catalog_embeddings.len() < samples.len() {
        return Err(Error::Config(format!(
            "cannot show {} distinct products from a catalog of {}",
            samples.len(),
            catalog_embeddings.len()
        )));
    }
    let mut taken = alloc::vec![false; catalog_embeddings.len()];
    let mut out = Vec::with_capacity(samples.len());
    for y in samples {
        let mut best: Option<(usize, f64)> = None;
        for (i, e) in catalog_embeddings.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let c = cosine_similarity(y, e)?;
            if best.map_or(true, |(_, b)| c > b) {
                best = Some((i, c));
            }
        }
        let (i, _) = best.expect("catalog has an untaken product");
        taken[i] = true;
        out.push(i);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn decode_exact_and_collisions() {
        let cat = vec![vec![1.0, 0.0], vec![0.9, 0.1], vec![0.0, 1.0]];
        assert_eq!(decode_samples(&[vec![0.0, 1.0]], &cat).unwrap(), vec![2]);
        assert_eq!(
            decode_samples(&[vec![1.0, 0.0], vec![1.0, 0.0]], &cat).unwrap(),
            vec![0, 1]
        );
        assert!(matches!(
            decode_samples(&vec![vec![1.0, 0.0]; 4], &cat),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn split_is_near_seventy_percent() {
        let n = 5000;
        let train = (0..n)
            .filter(|&i| is_train_session(&crate::simulator::session_id(i)))
            .count();
        let frac = train as f64 / n as f64;
        assert!((frac - 0.7).abs() < 0.02, "{frac}");
    }

    fn toy_samples(n: usize, k: usize) -> Vec<TrainingSample> {
        let mut rng = SeededRng::new(3, 0);
        (0..n)
            .map(|_| {
                let base: Vec<f64> = (0..k).map(|_| rng.uniform()).collect();
                TrainingSample {
                    window: vec![base.clone()],
                    truth: (0..6)
                        .map(|_| base.iter().map(|b| (b + 0.05 * rng.standard_normal()).abs() + 0.01).collect())
                        .collect(),
                }
            })
            .collect()
    }

    #[test]
    fn zero_epochs_and_determinism() {
        let samples = toy_samples(20, 4);
        let hyper = AgentHyper { epochs: 0, ..Default::default() };
        let t = train_agent(&samples, &hyper).unwrap();
        assert_eq!(t.params, init_agent(&hyper, 4).unwrap());
        let hyper = AgentHyper { epochs: 3, batch_size: 4, ..Default::default() };
        assert_eq!(train_agent(&samples, &hyper).unwrap(), train_agent(&samples, &hyper).unwrap());
    }

    #[test]
    fn training_lowers_loss() {
        let samples = toy_samples(60, 4);
        let hyper = AgentHyper { epochs: 15, batch_size: 8, ..Default::default() };
        let t = train_agent(&samples, &hyper).unwrap();
        assert!(t.losses.last().unwrap() < &t.losses[0], "{:?}", t.losses);
    }

    #[test]
    fn malformed_samples_rejected() {
        let mut samples = toy_samples(2, 4);
        samples[1].truth.pop();
        assert!(matches!(train_agent(&samples, &AgentHyper::default()), Err(Error::Data(_))));
        assert!(train_agent(&[], &AgentHyper::default()).is_err());
    }
}
