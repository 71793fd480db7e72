use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::catalog::{Product, TokenKind, Vocabulary, CATEGORY, GENDER};
use crate::{Error, Result};

/// What the dialog has established so far.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogContext {
    pub gender: Option<String>,
    pub category: Option<String>,
    /// Attribute constraints other than gender and category.
    #[serde(default)]
    pub constraints: BTreeMap<String, String>,
}

impl DialogContext {
    /// Sets the category and drops constraints that do not apply to it.
    pub fn set_category(&mut self, category: &str, vocab: &Vocabulary) {
        if self.category.as_deref() == Some(category) {
            return;
        }
        self.category = Some(category.to_string());
        self.constraints.retain(|a, _| vocab.is_applicable(category, a));
    }

    /// Replaces gender and category and clears every constraint.
    pub fn reset(&mut self, gender: &str, category: &str) {
        self.gender = Some(gender.to_string());
        self.category = Some(category.to_string());
        self.constraints.clear();
    }

    /// Folds a text query into the context. Genders and categories are
    /// applied before attribute values, so token order does not matter. A
    /// value whose attribute does not apply to the current category is
    /// ignored. Unknown tokens reject the whole query.
    pub fn apply_tokens<S: AsRef<str>>(&mut self, tokens: &[S], vocab: &Vocabulary) -> Result<()> {
        let mut kinds = Vec::with_capacity(tokens.len());
        for t in tokens {
            let t = t.as_ref();
            kinds.push(vocab.kind(t).ok_or_else(|| Error::UnknownToken(t.to_string()))?);
        }
        for k in &kinds {
            if let TokenKind::Value { attribute: GENDER, token } = k {
                self.gender = Some(token.to_string());
            }
        }
        for k in &kinds {
            if let TokenKind::Value { attribute: CATEGORY, token } = k {
                self.set_category(token, vocab);
            }
        }
        for k in &kinds {
            if let TokenKind::Value { attribute, token } = *k {
                if attribute == GENDER || attribute == CATEGORY {
                    continue;
                }
                let applies = match &self.category {
                    Some(c) => vocab.is_applicable(c, attribute),
                    None => true,
                };
                if applies {
                    self.constraints.insert(attribute.to_string(), token.to_string());
                }
            }
        }
        Ok(())
    }

    /// An image click adopts the clicked product's gender and category.
    pub fn apply_click(&mut self, product: &Product, vocab: &Vocabulary) {
        self.gender = Some(product.gender.clone());
        self.set_category(&product.category, vocab);
    }

    /// Gender, category and attribute constraints as one search query.
    pub fn search_constraints(&self) -> BTreeMap<String, String> {
        let mut c = self.constraints.clone();
        if let Some(g) = &self.gender {
            c.insert(GENDER.to_string(), g.clone());
        }
        if let Some(cat) = &self.category {
            c.insert(CATEGORY.to_string(), cat.clone());
        }
        c
    }

    pub fn is_empty(&self) -> bool {
        self.gender.is_none() && self.category.is_none() && self.constraints.is_empty()
    }

    /// Every constraint applies to the current category.
    pub fn is_consistent(&self, vocab: &Vocabulary) -> bool {
        match &self.category {
            Some(c) => self.constraints.keys().all(|a| vocab.is_applicable(c, a)),
            None => true,
        }
    }
}
