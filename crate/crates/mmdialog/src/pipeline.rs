//! The pipeline stages behind the CLI: catalog generation, dialog
//! simulation, CorrNet and agent training, and evaluation.

use std::path::Path;

use mmdialog_core::agent::{
    build_training_set, evaluate, init_agent, train_agent, AgentDataset, AgentHyper, AgentParams,
    QueryProjector,
};
use mmdialog_core::catalog::{
    build_vocabulary, encode_catalog, generate_catalog, Catalog, CatalogConfig, EncodedProduct, VocabConfig,
    ViewScaler, Vocabulary, CATEGORY,
};
use mmdialog_core::corrnet::{corr_term, cross_modal_neighbors, train_corrnet, CorrNetModel, CorrNetTrainConfig};
use mmdialog_core::numerics::{fnv1a64, SeededRng};
use mmdialog_core::simulator::{generate_session, DialogSession, FsaConfig, Responder, TokenPool};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::formats::{self, CatalogMeta};

/// Share of products used to train CorrNet; the rest are held out.
pub const CORRNET_TRAIN_FRACTION: f64 = 0.8;
/// Retrieval depth of the cross-modal precision metric.
pub const PRECISION_AT: usize = 5;

/// Optional overrides read from `--config`. Every section falls back to
/// the built-in defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub vocab: Option<VocabConfig>,
    pub image_noise: Option<f64>,
    pub fsa: Option<FsaConfig>,
    pub corrnet: Option<CorrNetTrainConfig>,
    pub agent: Option<AgentHyper>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> AppResult<Self> {
        formats::read_json(path)
    }
}

pub fn generate_catalog_stage(
    products: usize,
    vocab_config: &VocabConfig,
    family: Option<String>,
    image_noise: f64,
    seed: u64,
) -> AppResult<(Catalog, CatalogMeta)> {
    let root = SeededRng::new(seed, 0);
    let vocabulary = build_vocabulary(vocab_config, &mut root.derive_named("vocab"))?;
    let config = CatalogConfig { products, family };
    let items = generate_catalog(&vocabulary, &config, &mut root.derive_named("catalog"))?;
    let catalog = Catalog::new(items, &vocabulary)?;
    let meta = CatalogMeta { vocabulary, catalog_seed: seed, image_noise };
    Ok((catalog, meta))
}

/// A catalog with its vocabulary and raw two-view encodings.
pub struct LoadedCatalog {
    pub vocab: Vocabulary,
    pub catalog: Catalog,
    pub encoded: Vec<EncodedProduct>,
}

impl LoadedCatalog {
    pub fn new(catalog: Catalog, meta: CatalogMeta) -> AppResult<Self> {
        let encoded = encode_catalog(&catalog, &meta.vocabulary, meta.catalog_seed, meta.image_noise)?;
        Ok(Self { vocab: meta.vocabulary, catalog, encoded })
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let (catalog, meta) = formats::load_catalog_bundle(path)?;
        Self::new(catalog, meta)
    }

    /// The rule-based responder, clustering on raw image features.
    pub fn responder(&self) -> AppResult<Responder> {
        let features = self.encoded.iter().map(|e| e.image.clone()).collect();
        Ok(Responder::new(self.catalog.clone(), features)?)
    }
}

/// Sessions `0..n` generated in parallel; each owns a derived stream, so the
/// result does not depend on scheduling.
pub fn generate_dialogs_stage(
    loaded: &LoadedCatalog,
    responder: &Responder,
    fsa: &FsaConfig,
    sessions: usize,
    seed: u64,
) -> AppResult<Vec<DialogSession>> {
    if sessions == 0 {
        return Err(AppError::Usage("--sessions must be at least 1".into()));
    }
    fsa.validate()?;
    let pool = TokenPool::from_catalog(&loaded.catalog);
    let base = SeededRng::new(seed, 0).derive_named("dialogs");
    let out: Result<Vec<_>, _> = (0..sessions)
        .into_par_iter()
        .map(|i| generate_session(i, responder, &loaded.vocab, &pool, fsa, &base))
        .collect();
    Ok(out?)
}

/// Deterministic CorrNet holdout by product-id hash.
pub fn is_corrnet_train(product_id: &str) -> bool {
    (fnv1a64(product_id.as_bytes()) % 1000) < (CORRNET_TRAIN_FRACTION * 1000.0) as u64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrNetMetrics {
    /// Correlation between the image and text projections of held-out
    /// products.
    pub heldout_corr: f64,
    /// Mean share of same-category products among the top images retrieved
    /// for each category token.
    pub precision_at_5: f64,
    pub train_products: usize,
    pub heldout_products: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrNetReport {
    pub config: CorrNetTrainConfig,
    pub final_loss: f64,
    pub losses: Vec<f64>,
    pub metrics: CorrNetMetrics,
}

fn split_products(encoded: &[EncodedProduct]) -> (Vec<EncodedProduct>, Vec<EncodedProduct>) {
    encoded.iter().cloned().partition(|e| is_corrnet_train(&e.id))
}

pub fn train_corrnet_stage(
    loaded: &LoadedCatalog,
    config: &CorrNetTrainConfig,
) -> AppResult<(CorrNetModel, CorrNetReport)> {
    let (train, _) = split_products(&loaded.encoded);
    if train.len() < 2 {
        return Err(AppError::Usage(format!(
            "catalog too small: only {} products fall in the training split",
            train.len()
        )));
    }
    let scaler = ViewScaler::fit(&train)?;
    let training = train_corrnet(&scaler.transform(&train)?, config)?;
    let model = CorrNetModel { params: training.params, scaler };
    let metrics = corrnet_metrics(&model, loaded)?;
    let report = CorrNetReport {
        config: config.clone(),
        final_loss: *training.losses.last().expect("loss at initialisation"),
        losses: training.losses,
        metrics,
    };
    Ok((model, report))
}

pub fn corrnet_metrics(model: &CorrNetModel, loaded: &LoadedCatalog) -> AppResult<CorrNetMetrics> {
    let (train, heldout) = split_products(&loaded.encoded);
    let heldout_corr = if heldout.len() >= 2 {
        let scaled = model.scaler.transform(&heldout)?;
        let hx = scaled
            .iter()
            .map(|e| model.params.project(Some(&e.image), None))
            .collect::<Result<Vec<_>, _>>()?;
        let hy = scaled
            .iter()
            .map(|e| model.params.project(None, Some(&e.text)))
            .collect::<Result<Vec<_>, _>>()?;
        corr_term(&hx, &hy)?
    } else {
        f64::NAN
    };

    let images = model.embed_catalog_images(&loaded.encoded)?;
    let mut total = 0.0;
    let mut queries = 0usize;
    for category in loaded.vocab.values(CATEGORY).unwrap_or_default() {
        let count = loaded.catalog.products().iter().filter(|p| &p.category == category).count();
        if count < PRECISION_AT {
            continue;
        }
        let hits = cross_modal_neighbors(model, &[category], &loaded.vocab, &images, PRECISION_AT)?
            .into_iter()
            .filter(|&i| &loaded.catalog.get(i).category == category)
            .count();
        total += hits as f64 / PRECISION_AT as f64;
        queries += 1;
    }
    Ok(CorrNetMetrics {
        heldout_corr,
        precision_at_5: if queries == 0 { f64::NAN } else { total / queries as f64 },
        train_products: train.len(),
        heldout_products: heldout.len(),
    })
}

pub fn agent_dataset(
    model: &CorrNetModel,
    loaded: &LoadedCatalog,
    sessions: &[DialogSession],
    hyper: &AgentHyper,
) -> AppResult<AgentDataset> {
    let images = model.embed_catalog_images(&loaded.encoded)?;
    let mut projector = QueryProjector::new(model, &loaded.vocab, &loaded.catalog, &images)?;
    Ok(build_training_set(sessions, &mut projector, hyper)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentMetrics {
    /// Mean cosine between sampled and displayed products on test rounds.
    pub test_cosine: f64,
    /// The same for the untrained initialisation.
    pub baseline_cosine: f64,
    pub train_samples: usize,
    pub test_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentReport {
    pub hyper: AgentHyper,
    pub final_loss: f64,
    pub losses: Vec<f64>,
    pub metrics: AgentMetrics,
}

pub fn agent_metrics(params: &AgentParams, hyper: &AgentHyper, data: &AgentDataset) -> AppResult<AgentMetrics> {
    if data.test.is_empty() {
        return Err(AppError::Usage("no sessions fall in the test split; generate more sessions".into()));
    }
    let rng = SeededRng::new(hyper.seed, 0).derive_named("agent/evaluate");
    let test_cosine = evaluate(params, &data.test, hyper, &mut rng.clone())?;
    let baseline = init_agent(hyper, params.k())?;
    let baseline_cosine = evaluate(&baseline, &data.test, hyper, &mut rng.clone())?;
    Ok(AgentMetrics {
        test_cosine,
        baseline_cosine,
        train_samples: data.train.len(),
        test_samples: data.test.len(),
    })
}

pub fn train_agent_stage(data: &AgentDataset, hyper: &AgentHyper) -> AppResult<(AgentParams, AgentReport)> {
    if data.train.is_empty() {
        return Err(AppError::Usage("no sessions fall in the training split; generate more sessions".into()));
    }
    let training = train_agent(&data.train, hyper)?;
    let metrics = agent_metrics(&training.params, hyper, data)?;
    let report = AgentReport {
        hyper: hyper.clone(),
        final_loss: *training.losses.last().expect("loss at initialisation"),
        losses: training.losses,
        metrics,
    };
    Ok((training.params, report))
}

/// What `evaluate` prints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub products: usize,
    pub sessions: usize,
    pub corrnet: CorrNetMetrics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agent: Option<AgentMetrics>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> LoadedCatalog {
        let (c, m) = generate_catalog_stage(80, &VocabConfig::desk(), None, 0.3, seed).unwrap();
        LoadedCatalog::new(c, m).unwrap()
    }

    #[test]
    fn holdout_is_near_eighty_percent() {
        let n = 5000;
        let k = (1..=n).filter(|&i| is_corrnet_train(&mmdialog_core::catalog::product_id(i))).count();
        assert!((k as f64 / n as f64 - 0.8).abs() < 0.02);
    }

    #[test]
    fn dialogs_do_not_depend_on_thread_count() {
        let loaded = small(4);
        let responder = loaded.responder().unwrap();
        let fsa = FsaConfig::default();
        let par = generate_dialogs_stage(&loaded, &responder, &fsa, 40, 9).unwrap();
        let pool = TokenPool::from_catalog(&loaded.catalog);
        let base = SeededRng::new(9, 0).derive_named("dialogs");
        let seq: Vec<_> = (0..40)
            .map(|i| generate_session(i, &responder, &loaded.vocab, &pool, &fsa, &base).unwrap())
            .collect();
        assert_eq!(par, seq);
    }

    #[test]
    fn small_pipeline_runs() {
        let loaded = small(5);
        let cfg = CorrNetTrainConfig { k: 8, epochs: 3, ..Default::default() };
        let (model, report) = train_corrnet_stage(&loaded, &cfg).unwrap();
        assert_eq!(report.losses.len(), 4);
        assert_eq!(report.metrics.train_products + report.metrics.heldout_products, 80);
        let responder = loaded.responder().unwrap();
        let sessions = generate_dialogs_stage(&loaded, &responder, &FsaConfig::default(), 30, 1).unwrap();
        let hyper = AgentHyper { epochs: 2, ..Default::default() };
        let data = agent_dataset(&model, &loaded, &sessions, &hyper).unwrap();
        let (_, report) = train_agent_stage(&data, &hyper).unwrap();
        assert_eq!(report.losses.len(), 3);
        assert!(report.metrics.test_cosine.is_finite());
    }
}
