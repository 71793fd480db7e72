use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::vocab::{Vocabulary, CATEGORY, GENDER, GENDERS};
use crate::numerics::SeededRng;
use crate::{Error, Result};

/// One catalog item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Product {
    pub id: String,
    pub gender: String,
    pub category: String,
    /// Attribute -> value for the attributes applicable to `category`.
    pub attrs: BTreeMap<String, String>,
}

impl Product {
    /// Checks the product against the vocabulary, naming the first offending
    /// attribute or token.
    pub fn validate(&self, vocab: &Vocabulary) -> Result<()> {
        if !GENDERS.contains(&self.gender.as_str()) {
            return Err(Error::Data(format!(
                "product {}: invalid gender `{}`",
                self.id, self.gender
            )));
        }
        if !vocab.has_value(CATEGORY, &self.category) {
            return Err(Error::Data(format!(
                "product {}: unknown category `{}`",
                self.id, self.category
            )));
        }
        for (attr, token) in &self.attrs {
            if vocab.values(attr).is_none() || attr == GENDER || attr == CATEGORY {
                return Err(Error::UnknownAttribute(attr.clone()));
            }
            if !vocab.is_applicable(&self.category, attr) {
                return Err(Error::Data(format!(
                    "product {}: attribute `{attr}` does not apply to `{}`",
                    self.id, self.category
                )));
            }
            if !vocab.has_value(attr, token) {
                return Err(Error::Data(format!(
                    "product {}: `{token}` is not a value of `{attr}`",
                    self.id
                )));
            }
        }
        Ok(())
    }

    /// Every (attribute, token) pair, gender and category included.
    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        [(GENDER, self.gender.as_str()), (CATEGORY, self.category.as_str())]
            .into_iter()
            .chain(self.attrs.iter().map(|(a, t)| (a.as_str(), t.as_str())))
    }

    /// Value of any attribute, gender and category included.
    pub fn value(&self, attribute: &str) -> Option<&str> {
        match attribute {
            GENDER => Some(&self.gender),
            CATEGORY => Some(&self.category),
            _ => self.attrs.get(attribute).map(String::as_str),
        }
    }
}

pub fn product_id(ordinal: usize) -> String {
    format!("P{ordinal:06}")
}

/// Catalog generation settings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CatalogConfig {
    pub products: usize,
    /// Restrict categories to one family (e.g. `footwear`).
    #[serde(default)]
    pub family: Option<String>,
}

impl Default for CatalogConfig {
    fn default() -> Self {
        Self {
            products: 300,
            family: None,
        }
    }
}

/// Draws `config.products` products with ids `P000001`, `P000002`, ...;
/// every attribute value is uniform over the vocabulary, respecting
/// applicability.
pub fn generate_catalog(
    vocab: &Vocabulary,
    config: &CatalogConfig,
    rng: &mut SeededRng,
) -> Result<Vec<Product>> {
    if config.products == 0 {
        return Err(Error::Config("catalog size must be at least 1".into()));
    }
    let categories: Vec<&String> = match &config.family {
        Some(f) => vocab.categories_in_family(f).collect(),
        None => vocab.categories().iter().collect(),
    };
    if categories.is_empty() {
        return Err(Error::Config(format!(
            "no categories in family `{}`",
            config.family.as_deref().unwrap_or_default()
        )));
    }
    let genders = vocab.genders();

    let mut products = Vec::with_capacity(config.products);
    for i in 0..config.products {
        let gender = genders[rng.below(genders.len())].clone();
        let category = categories[rng.below(categories.len())].clone();
        let mut attrs = BTreeMap::new();
        let applicable = vocab
            .applicable(&category)
            .ok_or_else(|| Error::Internal(format!("category `{category}` lost its attributes")))?;
        for attr in applicable {
            let tokens = vocab
                .values(attr)
                .ok_or_else(|| Error::UnknownAttribute(attr.clone()))?;
            attrs.insert(attr.clone(), tokens[rng.below(tokens.len())].clone());
        }
        products.push(Product {
            id: product_id(i + 1),
            gender,
            category,
            attrs,
        });
    }
    Ok(products)
}

/// Immutable product collection sorted by id, with id lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    products: Vec<Product>,
    by_id: BTreeMap<String, usize>,
}

impl Catalog {
    pub fn new(mut products: Vec<Product>, vocab: &Vocabulary) -> Result<Self> {
        products.sort_by(|a, b| a.id.cmp(&b.id));
        let mut by_id = BTreeMap::new();
        for (i, p) in products.iter().enumerate() {
            p.validate(vocab)?;
            if by_id.insert(p.id.clone(), i).is_some() {
                return Err(Error::Data(format!("duplicate product id `{}`", p.id)));
            }
        }
        Ok(Self { products, by_id })
    }

    pub fn products(&self) -> &[Product] {
        &self.products
    }

    pub fn len(&self) -> usize {
        self.products.len()
    }

    pub fn is_empty(&self) -> bool {
        self.products.is_empty()
    }

    pub fn get(&self, index: usize) -> &Product {
        &self.products[index]
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.by_id
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownProduct(id.to_string()))
    }

    pub fn id(&self, index: usize) -> &str {
        &self.products[index].id
    }

    pub fn ids<'a>(&'a self, indices: &'a [usize]) -> impl Iterator<Item = &'a str> + 'a {
        indices.iter().map(move |&i| self.id(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build_vocabulary, VocabConfig};

    fn vocab() -> Vocabulary {
        build_vocabulary(&VocabConfig::desk(), &mut SeededRng::new(1, 0)).unwrap()
    }

    #[test]
    fn generated_products_are_valid() {
        let v = vocab();
        let cfg = CatalogConfig { products: 200, family: None };
        let ps = generate_catalog(&v, &cfg, &mut SeededRng::new(2, 0)).unwrap();
        assert_eq!(ps.len(), 200);
        assert_eq!(ps[0].id, "P000001");
        assert_eq!(ps[199].id, "P000200");
        for p in &ps {
            p.validate(&v).unwrap();
            assert_eq!(p.attrs.len(), v.applicable(&p.category).unwrap().len());
        }
    }

    #[test]
    fn family_filter() {
        let v = vocab();
        let cfg = CatalogConfig { products: 3500, family: Some("footwear".into()) };
        let ps = generate_catalog(&v, &cfg, &mut SeededRng::new(2, 0)).unwrap();
        assert_eq!(ps.len(), 3500);
        assert!(ps.iter().all(|p| v.family(&p.category) == Some("footwear")));
    }

    #[test]
    fn singleton_and_empty() {
        let v = vocab();
        let one = generate_catalog(&v, &CatalogConfig { products: 1, family: None }, &mut SeededRng::new(0, 0))
            .unwrap();
        Catalog::new(one, &v).unwrap();
        assert!(matches!(
            generate_catalog(&v, &CatalogConfig { products: 0, family: None }, &mut SeededRng::new(0, 0)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn validation_names_unknown_attribute() {
        let v = vocab();
        let mut p = generate_catalog(&v, &CatalogConfig { products: 1, family: None }, &mut SeededRng::new(0, 0))
            .unwrap()
            .remove(0);
        p.attrs.insert("collar-height".into(), "tall".into());
        assert_eq!(p.validate(&v), Err(Error::UnknownAttribute("collar-height".into())));
    }

    #[test]
    fn catalog_lookup_and_duplicates() {
        let v = vocab();
        let ps = generate_catalog(&v, &CatalogConfig { products: 5, family: None }, &mut SeededRng::new(0, 0))
            .unwrap();
        let mut shuffled = ps.clone();
        shuffled.reverse();
        let c = Catalog::new(shuffled, &v).unwrap();
        assert_eq!(c.products(), &ps[..]);
        assert_eq!(c.index_of("P000003").unwrap(), 2);
        assert!(c.index_of("P999999").is_err());
        let mut dup = ps.clone();
        dup.push(ps[0].clone());
        assert!(Catalog::new(dup, &v).is_err());
    }
}
