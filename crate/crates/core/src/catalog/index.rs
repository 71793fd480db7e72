use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::product::Catalog;
use crate::{Error, Result};

/// Inverted index from (attribute, token) to the catalog positions of the
/// products carrying it. Catalog positions follow id order, so postings are
/// sorted by id.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeIndex {
    postings: BTreeMap<(String, String), Vec<usize>>,
    len: usize,
}

impl AttributeIndex {
    pub fn build(catalog: &Catalog) -> Self {
        let mut postings: BTreeMap<(String, String), Vec<usize>> = BTreeMap::new();
        for (i, p) in catalog.products().iter().enumerate() {
            for (a, t) in p.pairs() {
                postings
                    .entry((a.to_string(), t.to_string()))
                    .or_default()
                    .push(i);
            }
        }
        Self {
            postings,
            len: catalog.len(),
        }
    }

    pub fn postings(&self, attribute: &str, token: &str) -> &[usize] {
        self.postings
            .get(&(attribute.to_string(), token.to_string()))
            .map(Vec::as_slice)
            .unwrap_or_default()
    }

    pub fn keys(&self) -> impl Iterator<Item = (&str, &str)> {
        self.postings.keys().map(|(a, t)| (a.as_str(), t.as_str()))
    }

    /// Number of indexed products.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Products satisfying at least one constraint, ranked by the number of
    /// satisfied constraints (descending) then by id, truncated to `limit`.
    pub fn search(&self, constraints: &BTreeMap<String, String>, limit: usize) -> Result<Vec<usize>> {
        Ok(self
            .ranked(constraints)?
            .into_iter()
            .take(limit)
            .map(|(i, _)| i)
            .collect())
    }

    /// Every matching product with its match count, in search order.
    pub fn ranked(&self, constraints: &BTreeMap<String, String>) -> Result<Vec<(usize, usize)>> {
        if constraints.is_empty() {
            return Err(Error::InvalidQuery("search needs at least one constraint".into()));
        }
        let mut counts = vec![0usize; self.len];
        for (a, t) in constraints {
            for &i in self.postings(a, t) {
                counts[i] += 1;
            }
        }
        let mut hits: Vec<(usize, usize)> = counts
            .into_iter()
            .enumerate()
            .filter(|&(_, c)| c > 0)
            .collect();
        hits.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(hits)
    }
}

/// Free-function form of [`AttributeIndex::search`].
pub fn search(
    index: &AttributeIndex,
    constraints: &BTreeMap<String, String>,
    limit: usize,
) -> Result<Vec<usize>> {
    if limit == 0 {
        return Err(Error::InvalidQuery("search limit must be at least 1".into()));
    }
    index.search(constraints, limit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build_vocabulary, generate_catalog, CatalogConfig, Product, VocabConfig, Vocabulary};
    use crate::numerics::SeededRng;

    fn setup(n: usize) -> (Vocabulary, Catalog) {
        let v = build_vocabulary(&VocabConfig::desk(), &mut SeededRng::new(1, 0)).unwrap();
        let ps = generate_catalog(&v, &CatalogConfig { products: n, family: None }, &mut SeededRng::new(5, 0))
            .unwrap();
        let c = Catalog::new(ps, &v).unwrap();
        (v, c)
    }

    fn constraints(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(a, t)| (a.to_string(), t.to_string())).collect()
    }

    #[test]
    fn every_pair_is_indexed() {
        let (_, c) = setup(120);
        let idx = AttributeIndex::build(&c);
        for (i, p) in c.products().iter().enumerate() {
            for (a, t) in p.pairs() {
                assert!(idx.postings(a, t).binary_search(&i).is_ok());
            }
        }
        for (a, t) in idx.keys() {
            assert!(idx.postings(a, t).windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn single_match_in_three_products() {
        let (v, c) = setup(3);
        let target = c.get(1).clone();
        let mut ps: Vec<Product> = c.products().to_vec();
        // Give the other two a different category.
        let other = v.categories().iter().find(|x| **x != target.category).unwrap().clone();
        for i in [0, 2] {
            ps[i].category = other.clone();
            ps[i].attrs.retain(|a, _| v.is_applicable(&other, a));
        }
        let c = Catalog::new(ps, &v).unwrap();
        let idx = AttributeIndex::build(&c);
        let cons = constraints(&[("category", &target.category)]);
        let brute: Vec<usize> = (0..c.len())
            .filter(|&i| c.get(i).category == target.category)
            .collect();
        assert_eq!(search(&idx, &cons, 6).unwrap(), brute);
        assert_eq!(brute, vec![1]);
    }

    #[test]
    fn no_match_and_bad_queries() {
        let (_, c) = setup(10);
        let idx = AttributeIndex::build(&c);
        assert!(search(&idx, &constraints(&[("color", "no such")]), 6).unwrap().is_empty());
        assert!(matches!(search(&idx, &BTreeMap::new(), 6), Err(Error::InvalidQuery(_))));
        assert!(search(&idx, &constraints(&[("gender", "men")]), 0).is_err());
    }

    #[test]
    fn truncation_is_deterministic() {
        let (_, c) = setup(300);
        let idx = AttributeIndex::build(&c);
        let cons = constraints(&[("gender", "women")]);
        assert!(idx.postings("gender", "women").len() >= 100);
        let a = search(&idx, &cons, 6).unwrap();
        assert_eq!(a.len(), 6);
        assert_eq!(a, search(&idx, &cons, 6).unwrap());
        assert_eq!(a, idx.postings("gender", "women")[..6].to_vec());
    }

    #[test]
    fn ranking_by_match_count_then_id() {
        let (_, c) = setup(200);
        let idx = AttributeIndex::build(&c);
        let p = c.get(150);
        let cons = constraints(&[
            ("gender", &p.gender),
            ("category", &p.category),
            ("color", &p.attrs["color"]),
        ]);
        let got = search(&idx, &cons, 20).unwrap();
        assert_eq!(got[0], (0..c.len()).find(|&i| {
            let q = c.get(i);
            q.gender == p.gender && q.category == p.category && q.attrs["color"] == p.attrs["color"]
        }).unwrap());
        let score = |i: usize| cons.iter().filter(|(a, t)| c.get(i).value(a) == Some(t.as_str())).count();
        for w in got.windows(2) {
            assert!(score(w[0]) > score(w[1]) || (score(w[0]) == score(w[1]) && w[0] < w[1]));
        }
    }
}
