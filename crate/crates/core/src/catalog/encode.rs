//! Deterministic stand-ins for pretrained encoders.
//!
//! Text: every token owns a unit-norm pseudo-random 300-d embedding seeded by
//! a hash of the token, and a query is the mean of its token embeddings
//! (continuous bag of words).
//!
//! Image: a product's 4096-d feature vector is a weighted sum of unit-norm
//! pseudo-random basis vectors, one per (attribute, token) pair plus one for
//! the product family, plus isotropic Gaussian noise of expected norm
//! `noise_scale`. Category and family carry the largest weights, so products
//! of one category sit close together, the way convolutional features group
//! by object shape.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::product::{Catalog, Product};
use super::vocab::{Vocabulary, CATEGORY, COLOR, GENDER, PATTERN, MATERIAL, BRAND};
use crate::numerics::{axpy, fnv1a64, norm, sqrt, SeededRng};
use crate::{Error, Result};

pub const TEXT_DIM: usize = 300;
pub const IMAGE_DIM: usize = 4096;

const TEXT_STREAM: u64 = 0x7e87;
const IMAGE_STREAM: u64 = 0x1a6e;
const FAMILY_KEY: &str = "family";
const FAMILY_WEIGHT: f64 = 2.0;

/// Default per-product image noise, relative to unit basis norms.
pub const DEFAULT_IMAGE_NOISE: f64 = 0.3;

fn salience(attribute: &str) -> f64 {
    match attribute {
        CATEGORY => 3.0,
        COLOR => 1.5,
        GENDER | PATTERN => 1.0,
        MATERIAL => 0.75,
        BRAND => 0.5,
        _ => 0.5,
    }
}

/// Features of one product in both views.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedProduct {
    pub id: String,
    pub image: Vec<f64>,
    pub text: Vec<f64>,
}

fn unit_gaussian(seed: u64, stream: u64, dim: usize) -> Vec<f64> {
    let mut rng = SeededRng::new(seed, stream);
    let mut v: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
    let n = norm(&v);
    v.iter_mut().for_each(|x| *x /= n);
    v
}

/// Unit-norm 300-d embedding of a single token.
pub fn token_embedding(token: &str) -> Vec<f64> {
    unit_gaussian(fnv1a64(token.as_bytes()), TEXT_STREAM, TEXT_DIM)
}

/// Mean of the token embeddings. Tokens are atomic, so `sky blue` is one word.
pub fn encode_text<S: AsRef<str>>(tokens: &[S], vocab: &Vocabulary) -> Result<Vec<f64>> {
    if tokens.is_empty() {
        return Err(Error::InvalidQuery("empty text query".into()));
    }
    let mut out = vec![0.0; TEXT_DIM];
    for t in tokens {
        let t = t.as_ref();
        if !vocab.contains(t) {
            return Err(Error::UnknownToken(t.to_string()));
        }
        axpy(1.0, &token_embedding(t), &mut out);
    }
    let inv = 1.0 / tokens.len() as f64;
    out.iter_mut().for_each(|x| *x *= inv);
    Ok(out)
}

/// Tokens forming a product's text description: gender, category and color.
pub fn product_text_tokens(product: &Product) -> Vec<&str> {
    let mut tokens = vec![product.gender.as_str(), product.category.as_str()];
    if let Some(c) = product.attrs.get(COLOR) {
        tokens.push(c);
    }
    tokens
}

fn basis_key(attribute: &str, token: &str) -> String {
    let mut k = String::with_capacity(attribute.len() + token.len() + 1);
    k.push_str(attribute);
    k.push('=');
    k.push_str(token);
    k
}

fn basis_vector(key: &str) -> Vec<f64> {
    unit_gaussian(fnv1a64(key.as_bytes()), IMAGE_STREAM, IMAGE_DIM)
}

/// Synthetic image feature extractor with cached basis vectors.
#[derive(Debug, Clone)]
pub struct ImageEncoder {
    noise_scale: f64,
    basis: BTreeMap<String, Vec<f64>>,
    families: BTreeMap<String, String>,
}

impl ImageEncoder {
    pub fn new(vocab: &Vocabulary, noise_scale: f64) -> Result<Self> {
        if !(noise_scale >= 0.0) || !noise_scale.is_finite() {
            return Err(Error::Config("image noise scale must be finite and >= 0".into()));
        }
        let mut basis = BTreeMap::new();
        let mut families = BTreeMap::new();
        for attr in vocab.attributes() {
            for token in vocab.values(attr).unwrap_or_default() {
                let key = basis_key(attr, token);
                let v = basis_vector(&key);
                basis.insert(key, v);
            }
        }
        for cat in vocab.categories() {
            if let Some(f) = vocab.family(cat) {
                families.insert(cat.clone(), f.to_string());
                let key = basis_key(FAMILY_KEY, f);
                if !basis.contains_key(&key) {
                    let v = basis_vector(&key);
                    basis.insert(key, v);
                }
            }
        }
        Ok(Self {
            noise_scale,
            basis,
            families,
        })
    }

    pub fn noise_scale(&self) -> f64 {
        self.noise_scale
    }

    /// 4096-d features of `product`; deterministic in `(product, catalog_seed)`.
    pub fn encode(&self, product: &Product, catalog_seed: u64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; IMAGE_DIM];
        for (attr, token) in product.pairs() {
            let b = self
                .basis
                .get(&basis_key(attr, token))
                .ok_or_else(|| Error::UnknownToken(token.to_string()))?;
            axpy(salience(attr), b, &mut out);
        }
        let family = self
            .families
            .get(&product.category)
            .ok_or_else(|| Error::UnknownToken(product.category.clone()))?;
        axpy(FAMILY_WEIGHT, &self.basis[&basis_key(FAMILY_KEY, family)], &mut out);

        if self.noise_scale > 0.0 {
            let mut rng = SeededRng::new(catalog_seed, fnv1a64(product.id.as_bytes()));
            let s = self.noise_scale / sqrt(IMAGE_DIM as f64);
            out.iter_mut().for_each(|x| *x += s * rng.standard_normal());
        }
        Ok(out)
    }
}

/// One-off image encoding; prefer [`ImageEncoder`] for whole catalogs.
pub fn encode_image(
    product: &Product,
    vocab: &Vocabulary,
    catalog_seed: u64,
    noise_scale: f64,
) -> Result<Vec<f64>> {
    ImageEncoder::new(vocab, noise_scale)?.encode(product, catalog_seed)
}

/// Both views for every product, in catalog order.
pub fn encode_catalog(
    catalog: &Catalog,
    vocab: &Vocabulary,
    catalog_seed: u64,
    noise_scale: f64,
) -> Result<Vec<EncodedProduct>> {
    let images = ImageEncoder::new(vocab, noise_scale)?;
    catalog
        .products()
        .iter()
        .map(|p| {
            Ok(EncodedProduct {
                id: p.id.clone(),
                image: images.encode(p, catalog_seed)?,
                text: encode_text(&product_text_tokens(p), vocab)?,
            })
        })
        .collect()
}

/// Per-dimension z-scoring fitted on a set of rows. Dimensions with
/// (near-)zero spread are only centred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    mean: Vec<f64>,
    inv_std: Vec<f64>,
}

impl Standardizer {
    pub fn fit<V: AsRef<[f64]>>(rows: &[V]) -> Result<Self> {
        let dim = rows
            .first()
            .ok_or_else(|| Error::InvalidInput("cannot standardise an empty set".into()))?
            .as_ref()
            .len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::shape("standardiser row", dim, r.len()));
            }
            axpy(1.0, r, &mut mean);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r.as_ref()).zip(&mean) {
                let d = x - m;
                *v += d * d;
            }
        }
        let inv_std = var
            .into_iter()
            .map(|v| {
                let s = sqrt(v / n);
                if s > 1e-8 {
                    1.0 / s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, inv_std })
    }

    /// Rebuilds a fitted standardiser from its stored parts.
    pub fn from_parts(mean: Vec<f64>, inv_std: Vec<f64>) -> Result<Self> {
        if mean.len() != inv_std.len() {
            return Err(Error::shape("standardiser scales", mean.len(), inv_std.len()));
        }
        crate::numerics::ensure_finite(&mean, "standardiser mean")?;
        crate::numerics::ensure_finite(&inv_std, "standardiser scales")?;
        Ok(Self { mean, inv_std })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn inv_std(&self) -> &[f64] {
        &self.inv_std
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.mean.len() {
            return Err(Error::shape("standardiser input", self.mean.len(), v.len()));
        }
        Ok(v
            .iter()
            .zip(&self.mean)
            .zip(&self.inv_std)
            .map(|((x, m), s)| (x - m) * s)
            .collect())
    }
}

/// Both standardisers, fitted on a catalog's encodings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewScaler {
    pub image: Standardizer,
    pub text: Standardizer,
}

impl ViewScaler {
    pub fn fit(encoded: &[EncodedProduct]) -> Result<Self> {
        let images: Vec<&[f64]> = encoded.iter().map(|e| e.image.as_slice()).collect();
        let texts: Vec<&[f64]> = encoded.iter().map(|e| e.text.as_slice()).collect();
        Ok(Self {
            image: Standardizer::fit(&images)?,
            text: Standardizer::fit(&texts)?,
        })
    }

    /// Standardised copy of every product.
    pub fn transform(&self, encoded: &[EncodedProduct]) -> Result<Vec<EncodedProduct>> {
        encoded
            .iter()
            .map(|e| {
                Ok(EncodedProduct {
                    id: e.id.clone(),
                    image: self.image.apply(&e.image)?,
                    text: self.text.apply(&e.text)?,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build_vocabulary, generate_catalog, CatalogConfig, VocabConfig};
    use crate::numerics::euclidean_distance;

    fn vocab() -> Vocabulary {
        build_vocabulary(&VocabConfig::desk(), &mut SeededRng::new(1, 0)).unwrap()
    }

    #[test]
    fn text_single_and_duplicate_tokens() {
        let v = vocab();
        let red = token_embedding("red");
        assert!((norm(&red) - 1.0).abs() < 1e-12);
        assert_eq!(encode_text(&["red"], &v).unwrap(), red);
        let twice = encode_text(&["red", "red"], &v).unwrap();
        for (a, b) in twice.iter().zip(&red) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn text_mean_of_two_tokens() {
        let v = vocab();
        let got = encode_text(&["red", "shoes"], &v).unwrap();
        let (a, b) = (token_embedding("red"), token_embedding("shoes"));
        for i in 0..TEXT_DIM {
            assert!((got[i] - (a[i] + b[i]) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn text_errors() {
        let v = vocab();
        let empty: [&str; 0] = [];
        assert!(matches!(encode_text(&empty, &v), Err(Error::InvalidQuery(_))));
        assert_eq!(
            encode_text(&["red", "plaid"], &v),
            Err(Error::UnknownToken("plaid".into()))
        );
    }

    #[test]
    fn image_identical_attributes_without_noise() {
        let v = vocab();
        let p = generate_catalog(&v, &CatalogConfig { products: 1, family: None }, &mut SeededRng::new(3, 0))
            .unwrap()
            .remove(0);
        let mut q = p.clone();
        q.id = "P000002".into();
        let enc = ImageEncoder::new(&v, 0.0).unwrap();
        assert_eq!(enc.encode(&p, 9).unwrap(), enc.encode(&q, 9).unwrap());
        let noisy = ImageEncoder::new(&v, 0.3).unwrap();
        assert_eq!(noisy.encode(&p, 9).unwrap(), noisy.encode(&p, 9).unwrap());
        assert_ne!(noisy.encode(&p, 9).unwrap(), noisy.encode(&q, 9).unwrap());
        assert_eq!(encode_image(&p, &v, 9, 0.3).unwrap(), noisy.encode(&p, 9).unwrap());
    }

    #[test]
    fn image_category_structure() {
        let v = vocab();
        let ps = generate_catalog(&v, &CatalogConfig { products: 200, family: None }, &mut SeededRng::new(4, 0))
            .unwrap();
        let enc = ImageEncoder::new(&v, DEFAULT_IMAGE_NOISE).unwrap();
        let feats: Vec<Vec<f64>> = ps.iter().map(|p| enc.encode(p, 4).unwrap()).collect();
        let (mut intra, mut n_intra, mut inter, mut n_inter) = (0.0, 0usize, 0.0, 0usize);
        for i in 0..ps.len() {
            for j in i + 1..ps.len() {
                let d = euclidean_distance(&feats[i], &feats[j]);
                if ps[i].category == ps[j].category {
                    intra += d;
                    n_intra += 1;
                } else {
                    inter += d;
                    n_inter += 1;
                }
            }
        }
        assert!(intra / (n_intra as f64) < inter / (n_inter as f64));
    }

    #[test]
    fn standardizer_zero_mean_unit_variance() {
        let rows = vec![vec![1.0, 5.0, 2.0], vec![3.0, 5.0, 4.0], vec![5.0, 5.0, 9.0]];
        let s = Standardizer::fit(&rows).unwrap();
        let z: Vec<Vec<f64>> = rows.iter().map(|r| s.apply(r).unwrap()).collect();
        for d in 0..3 {
            let m: f64 = z.iter().map(|r| r[d]).sum::<f64>() / 3.0;
            assert!(m.abs() < 1e-12);
        }
        // Constant column is centred only.
        assert!(z.iter().all(|r| r[1] == 0.0));
        let var0: f64 = z.iter().map(|r| r[0] * r[0]).sum::<f64>() / 3.0;
        assert!((var0 - 1.0).abs() < 1e-12);
    }
}
