use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::model::{corrnet_loss, corrnet_loss_grad, CorrNetParams};
use crate::catalog::{encode_text, EncodedProduct, ViewScaler, Vocabulary};
use crate::numerics::{cosine_similarity, SeededRng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrNetTrainConfig {
    /// Hidden dimension.
    pub k: usize,
    /// Weight of the correlation term.
    pub lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for CorrNetTrainConfig {
    fn default() -> Self {
        Self {
            k: 200,
            lambda: 2.0,
            learning_rate: 0.5,
            epochs: 50,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl CorrNetTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be positive".into()));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch size must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrNetTraining {
    pub params: CorrNetParams,
    /// Full training-set loss before training (`losses[0]`) and after each
    /// epoch.
    pub losses: Vec<f64>,
}

/// Splits a shuffled order into batches of `size`, folding a trailing
/// singleton into the previous batch so every batch has a correlation.
fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = (start + size).min(order.len());
        if order.len() - end == 1 {
            end = order.len();
        }
        out.push(&order[start..end]);
        start = end;
    }
    out
}

/// Mini-batch gradient descent on standardised encodings.
pub fn train_corrnet(data: &[EncodedProduct], config: &CorrNetTrainConfig) -> Result<CorrNetTraining> {
    config.validate()?;
    if data.len() < 2 {
        return Err(Error::InvalidInput("CorrNet training needs at least 2 products".into()));
    }
    let root = SeededRng::new(config.seed, 0);
    let (dx, dy) = (data[0].image.len(), data[0].text.len());
    let mut params = CorrNetParams::init(config.k, dx, dy, &mut root.derive_named("corrnet/init"))?;
    let mut losses = Vec::with_capacity(config.epochs + 1);
    losses.push(corrnet_loss(&params, data, config.lambda)?);

    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut scratch: Vec<EncodedProduct> = Vec::with_capacity(config.batch_size + 1);
    for epoch in 1..=config.epochs {
        let mut rng = root.derive_named("corrnet/batches").derive(epoch as u64);
        rng.shuffle(&mut order);
        for chunk in batches(&order, config.batch_size) {
            scratch.clear();
            scratch.extend(chunk.iter().map(|&i| data[i].clone()));
            let (loss, grad) = corrnet_loss_grad(&params, &scratch, config.lambda)
                .map_err(|_| Error::Diverged { epoch, loss: f64::NAN })?;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            params.add_scaled(-config.learning_rate, &grad);
        }
        let loss = corrnet_loss(&params, data, config.lambda).unwrap_or(f64::NAN);
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        losses.push(loss);
    }
    Ok(CorrNetTraining { params, losses })
}

/// Trained weights bundled with the scaler that standardises raw encodings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrNetModel {
    pub params: CorrNetParams,
    pub scaler: ViewScaler,
}

impl CorrNetModel {
    pub fn k(&self) -> usize {
        self.params.k()
    }

    /// Joint-space vector of a text query.
    pub fn embed_tokens<S: AsRef<str>>(&self, tokens: &[S], vocab: &Vocabulary) -> Result<Vec<f64>> {
        let raw = encode_text(tokens, vocab)?;
        self.params.project(None, Some(&self.scaler.text.apply(&raw)?))
    }

    /// Joint-space vector of a raw image feature vector.
    pub fn embed_image(&self, raw: &[f64]) -> Result<Vec<f64>> {
        self.params.project(Some(&self.scaler.image.apply(raw)?), None)
    }

    /// Image-view embeddings of every product, in catalog order.
    pub fn embed_catalog_images(&self, encoded: &[EncodedProduct]) -> Result<Vec<Vec<f64>>> {
        encoded.iter().map(|e| self.embed_image(&e.image)).collect()
    }
}

/// Indices of the `n` embeddings closest to `query` by cosine similarity,
/// most similar first, ties by index.
pub fn nearest_by_cosine(query: &[f64], embeddings: &[Vec<f64>], n: usize) -> Result<Vec<usize>> {
    let mut scored = embeddings
        .iter()
        .enumerate()
        .map(|(i, e)| Ok((i, cosine_similarity(query, e)?)))
        .collect::<Result<Vec<(usize, f64)>>>()?;
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored.into_iter().take(n).map(|(i, _)| i).collect())
}

/// Catalog images closest to a text query in the joint space.
pub fn cross_modal_neighbors<S: AsRef<str>>(
    model: &CorrNetModel,
    tokens: &[S],
    vocab: &Vocabulary,
    image_embeddings: &[Vec<f64>],
    n: usize,
) -> Result<Vec<usize>> {
    let q = model.embed_tokens(tokens, vocab)?;
    nearest_by_cosine(&q, image_embeddings, n)
}
