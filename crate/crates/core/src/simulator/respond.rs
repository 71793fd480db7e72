//! Rule-based responses to text queries and image clicks.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use super::cluster::{explore_cluster, Dendrogram};
use super::context::DialogContext;
use super::fsa::FsaConfig;
use super::knn::{knn, neighbors_by_distance};
use crate::catalog::{AttributeIndex, Catalog};
use crate::numerics::SeededRng;
use crate::{Error, Result};

/// Products shown for a click, with the exploit count and cluster cut used.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickResponse {
    pub displayed: Vec<usize>,
    pub n1: usize,
    pub multiplier: f64,
    /// Exploration picks actually drawn from the cluster (the rest, if any,
    /// is padding).
    pub explored: usize,
}

/// Draws the exploit count for click round `round` (0-based; a click can
/// only happen from round 1 on).
pub fn sample_n1(round: usize, config: &FsaConfig, rng: &mut SeededRng) -> usize {
    let n_d = config.n_display;
    let lo = (round + config.n1_offset).min(n_d);
    lo + rng.below(n_d - lo + 1)
}

fn sample_multiplier(config: &FsaConfig, rng: &mut SeededRng) -> f64 {
    let [lo, hi] = config.cluster_multiplier;
    if hi > lo {
        rng.uniform_range(lo, hi)
    } else {
        lo
    }
}

/// Immutable retrieval state for one catalog.
#[derive(Debug, Clone)]
pub struct Responder {
    catalog: Catalog,
    index: AttributeIndex,
    features: Vec<Vec<f64>>,
    dendrogram: Dendrogram,
}

impl Responder {
    /// `features[i]` is the image feature vector of catalog product `i`.
    pub fn new(catalog: Catalog, features: Vec<Vec<f64>>) -> Result<Self> {
        if features.len() != catalog.len() {
            return Err(Error::shape("image features", catalog.len(), features.len()));
        }
        let index = AttributeIndex::build(&catalog);
        let dendrogram = Dendrogram::average_linkage(&features)?;
        Ok(Self {
            catalog,
            index,
            features,
            dendrogram,
        })
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn index(&self) -> &AttributeIndex {
        &self.index
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn dendrogram(&self) -> &Dendrogram {
        &self.dendrogram
    }

    /// The top `n_display` products for the merged context constraints,
    /// padded with neighbours of the top hit and then by catalog order.
    pub fn respond_text(&self, context: &DialogContext, n_display: usize) -> Result<Vec<usize>> {
        let constraints = context.search_constraints();
        let mut out = self.index.search(&constraints, n_display)?;
        if out.len() < n_display {
            let mut seen: BTreeSet<usize> = out.iter().copied().collect();
            if let Some(&top) = out.first() {
                for n in neighbors_by_distance(&self.features, top)? {
                    if out.len() == n_display {
                        break;
                    }
                    if seen.insert(n.index) {
                        out.push(n.index);
                    }
                }
            }
            for i in 0..self.catalog.len() {
                if out.len() == n_display {
                    break;
                }
                if seen.insert(i) {
                    out.push(i);
                }
            }
        }
        Ok(out)
    }

    /// Exploit/explore response to a click on `clicked` in round `round`.
    ///
    /// The first `n1` entries are the clicked product's nearest neighbours.
    /// The rest are drawn without replacement from its dendrogram cluster,
    /// preferring products not in `shown`. A short cluster is padded with the
    /// next-nearest neighbours, then with products sharing the most
    /// attributes with the clicked one.
    pub fn respond_click(
        &self,
        clicked: usize,
        round: usize,
        shown: &BTreeSet<usize>,
        config: &FsaConfig,
        rng: &mut SeededRng,
    ) -> Result<ClickResponse> {
        if clicked >= self.catalog.len() {
            return Err(Error::InvalidInput(format!("product index {clicked} out of range")));
        }
        let n_d = config.n_display;
        let n1 = sample_n1(round, config, rng);
        let multiplier = sample_multiplier(config, rng);
        let near = knn(&self.features, clicked, n1)?;
        let mut out = near.indices();
        let mut used: BTreeSet<usize> = out.iter().copied().collect();
        used.insert(clicked);

        let mut explored = 0;
        if out.len() < n_d && !near.neighbors.is_empty() {
            let candidates = explore_cluster(&self.dendrogram, clicked, &near.neighbors, multiplier)?;
            let (mut fresh, mut stale): (Vec<usize>, Vec<usize>) =
                candidates.into_iter().partition(|i| !shown.contains(i));
            rng.shuffle(&mut fresh);
            rng.shuffle(&mut stale);
            for i in fresh.into_iter().chain(stale) {
                if out.len() == n_d {
                    break;
                }
                out.push(i);
                used.insert(i);
                explored += 1;
            }
        }

        if out.len() < n_d {
            for n in neighbors_by_distance(&self.features, clicked)? {
                if out.len() == n_d {
                    break;
                }
                if used.insert(n.index) {
                    out.push(n.index);
                }
            }
        }
        if out.len() < n_d {
            let p = self.catalog.get(clicked);
            let constraints = p.pairs().map(|(a, t)| (a.into(), t.into())).collect();
            for (i, _) in self.index.ranked(&constraints)? {
                if out.len() == n_d {
                    break;
                }
                if used.insert(i) {
                    out.push(i);
                }
            }
        }
        Ok(ClickResponse {
            displayed: out,
            n1,
            multiplier,
            explored,
        })
    }
}
