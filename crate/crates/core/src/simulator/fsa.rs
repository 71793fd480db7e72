use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::context::DialogContext;
use crate::catalog::{Catalog, Vocabulary, CATEGORY, GENDER};
use crate::numerics::SeededRng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FsaNode {
    Start,
    Gender,
    Category,
    GenderCategory,
    Attribute,
    ImageClick,
    End,
}

impl FsaNode {
    pub const ALL: [FsaNode; 7] = [
        FsaNode::Start,
        FsaNode::Gender,
        FsaNode::Category,
        FsaNode::GenderCategory,
        FsaNode::Attribute,
        FsaNode::ImageClick,
        FsaNode::End,
    ];

    pub fn is_text(self) -> bool {
        matches!(
            self,
            FsaNode::Gender | FsaNode::Category | FsaNode::GenderCategory | FsaNode::Attribute
        )
    }

    /// Nodes whose end probability is governed by `p_end`.
    fn can_end(self) -> bool {
        matches!(self, FsaNode::Attribute | FsaNode::ImageClick)
    }
}

/// Automaton parameters. Rows of `transitions` are full distributions; for
/// the attribute and image-click nodes the `End` entry is overridden by
/// `p_end` and the remaining entries are rescaled to `1 - p_end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FsaConfig {
    pub transitions: BTreeMap<FsaNode, BTreeMap<FsaNode, f64>>,
    pub p_context_switch: f64,
    pub p_end: f64,
    pub max_rounds: usize,
    /// Products shown per round.
    pub n_display: usize,
    /// In click round `r` the exploit count is uniform over
    /// `min(r + n1_offset, n_display) ..= n_display`.
    pub n1_offset: usize,
    /// Range of the dendrogram cut, in multiples of the largest KNN distance.
    pub cluster_multiplier: [f64; 2],
}

impl Default for FsaConfig {
    fn default() -> Self {
        use FsaNode::*;
        let row = |entries: &[(FsaNode, f64)]| entries.iter().copied().collect::<BTreeMap<_, _>>();
        let text_row = row(&[(Attribute, 0.4), (ImageClick, 0.4), (Category, 0.2)]);
        let mut transitions = BTreeMap::new();
        transitions.insert(Start, row(&[(Gender, 0.2), (Category, 0.5), (GenderCategory, 0.3)]));
        transitions.insert(Gender, text_row.clone());
        transitions.insert(Category, text_row.clone());
        transitions.insert(GenderCategory, text_row);
        let tail = row(&[(Attribute, 0.3), (ImageClick, 0.45), (End, 0.25)]);
        transitions.insert(Attribute, tail.clone());
        transitions.insert(ImageClick, tail);
        Self {
            transitions,
            p_context_switch: 0.1,
            p_end: 0.25,
            max_rounds: 12,
            n_display: 6,
            n1_offset: 1,
            cluster_multiplier: [2.0, 5.0],
        }
    }
}

impl FsaConfig {
    pub fn validate(&self) -> Result<()> {
        for node in FsaNode::ALL {
            if node == FsaNode::End {
                continue;
            }
            let row = self
                .transitions
                .get(&node)
                .ok_or_else(|| Error::Config(format!("no transitions out of {node:?}")))?;
            let mut total = 0.0;
            for (to, &p) in row {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Config(format!("{node:?} -> {to:?} has probability {p}")));
                }
                if *to == FsaNode::Start && p > 0.0 {
                    return Err(Error::Config("transitions into start are not allowed".into()));
                }
                total += p;
            }
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "transitions out of {node:?} sum to {total}, not 1"
                )));
            }
        }
        let start = &self.transitions[&FsaNode::Start];
        for bad in [FsaNode::ImageClick, FsaNode::End] {
            if start.get(&bad).copied().unwrap_or(0.0) > 0.0 {
                return Err(Error::Config(format!(
                    "the first query must be text; start cannot lead to {bad:?}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.p_end) || !(0.0..=1.0).contains(&self.p_context_switch) {
            return Err(Error::Config("probabilities must lie in [0, 1]".into()));
        }
        if self.max_rounds == 0 {
            return Err(Error::Config("max_rounds must be at least 1".into()));
        }
        if self.n_display == 0 {
            return Err(Error::Config("n_display must be at least 1".into()));
        }
        let [lo, hi] = self.cluster_multiplier;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::Config(format!("invalid cluster multiplier range [{lo}, {hi}]")));
        }
        Ok(())
    }

    /// Outgoing distribution of `node` after applying `p_end`.
    pub fn effective_row(&self, node: FsaNode) -> Result<Vec<(FsaNode, f64)>> {
        let row = self
            .transitions
            .get(&node)
            .ok_or_else(|| Error::Config(format!("no transitions out of {node:?}")))?;
        let total: f64 = row.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "transitions out of {node:?} sum to {total}, not 1"
            )));
        }
        if !node.can_end() {
            return Ok(row.iter().map(|(&n, &p)| (n, p)).collect());
        }
        let rest: f64 = row
            .iter()
            .filter(|(n, _)| **n != FsaNode::End)
            .map(|(_, p)| p)
            .sum();
        let mut out = vec![(FsaNode::End, self.p_end)];
        for (&n, &p) in row {
            if n == FsaNode::End {
                continue;
            }
            let scaled = if rest > 0.0 { p / rest * (1.0 - self.p_end) } else { 0.0 };
            out.push((n, scaled));
        }
        Ok(out)
    }
}

/// One transition. Without a category in the context an attribute query is
/// impossible, so a draw of the attribute node is redirected to the category
/// node or (after the first round) to an image click, with equal odds.
pub fn step_fsa(
    node: FsaNode,
    context: &DialogContext,
    config: &FsaConfig,
    rng: &mut SeededRng,
) -> Result<FsaNode> {
    if node == FsaNode::End {
        return Err(Error::InvalidInput("no transitions out of the end node".into()));
    }
    let row = config.effective_row(node)?;
    let weights: Vec<f64> = row.iter().map(|(_, p)| *p).collect();
    let next = rng
        .weighted_index(&weights)
        .map(|i| row[i].0)
        .ok_or_else(|| Error::Config(format!("empty distribution out of {node:?}")))?;
    if next == FsaNode::Attribute && context.category.is_none() {
        if node == FsaNode::Start || rng.uniform() < 0.5 {
            return Ok(FsaNode::Category);
        }
        return Ok(FsaNode::ImageClick);
    }
    Ok(next)
}

/// Attribute values available for query generation, usually those present
/// in the catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenPool {
    values: BTreeMap<String, Vec<String>>,
}

impl TokenPool {
    pub fn from_vocabulary(vocab: &Vocabulary) -> Self {
        let values = vocab
            .attributes()
            .iter()
            .filter_map(|a| Some((a.clone(), vocab.values(a)?.to_vec())))
            .collect();
        Self { values }
    }

    pub fn from_catalog(catalog: &Catalog) -> Self {
        let mut values: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for p in catalog.products() {
            for (a, t) in p.pairs() {
                let list = values.entry(a.into()).or_default();
                if !list.iter().any(|x| x == t) {
                    list.push(t.into());
                }
            }
        }
        values.values_mut().for_each(|v| v.sort());
        Self { values }
    }

    pub fn values(&self, attribute: &str) -> &[String] {
        self.values.get(attribute).map(Vec::as_slice).unwrap_or_default()
    }

    fn pick<'a>(&'a self, attribute: &str, avoid: Option<&str>, rng: &mut SeededRng) -> Option<&'a String> {
        let vals = self.values(attribute);
        if vals.is_empty() {
            return None;
        }
        let others: Vec<&String> = vals.iter().filter(|v| Some(v.as_str()) != avoid).collect();
        if others.is_empty() {
            Some(&vals[0])
        } else {
            Some(others[rng.below(others.len())])
        }
    }
}

/// A generated text query.
#[derive(Debug, Clone, PartialEq)]
pub struct TextQuery {
    pub tokens: Vec<String>,
    /// The user switched to a new gender and category.
    pub context_switch: bool,
}

/// Generates the text query for `node` and folds it into `context`.
///
/// After the first round a context switch happens with `p_context_switch`:
/// gender and category are redrawn, constraints cleared, and the query
/// carries the new gender and category tokens ahead of the node's own
/// payload.
pub fn gen_text_query(
    node: FsaNode,
    context: &mut DialogContext,
    vocab: &Vocabulary,
    pool: &TokenPool,
    config: &FsaConfig,
    round: usize,
    rng: &mut SeededRng,
) -> Result<TextQuery> {
    if !node.is_text() {
        return Err(Error::InvalidInput(format!("{node:?} is not a text query node")));
    }
    let missing = |a: &str| Error::Internal(format!("no `{a}` values to query"));
    let mut tokens = Vec::new();
    let context_switch = round > 0 && rng.uniform() < config.p_context_switch;
    if context_switch {
        let g = pool.pick(GENDER, context.gender.as_deref(), rng).ok_or_else(|| missing(GENDER))?;
        let c = pool
            .pick(CATEGORY, context.category.as_deref(), rng)
            .ok_or_else(|| missing(CATEGORY))?;
        context.reset(g, c);
        tokens.push(g.clone());
        tokens.push(c.clone());
    }

    match node {
        FsaNode::Gender if !context_switch => {
            let g = pool.pick(GENDER, None, rng).ok_or_else(|| missing(GENDER))?;
            tokens.push(g.clone());
        }
        FsaNode::Category if !context_switch => {
            let c = pool
                .pick(CATEGORY, context.category.as_deref(), rng)
                .ok_or_else(|| missing(CATEGORY))?;
            tokens.push(c.clone());
        }
        FsaNode::GenderCategory if !context_switch => {
            let g = pool.pick(GENDER, None, rng).ok_or_else(|| missing(GENDER))?;
            let c = pool
                .pick(CATEGORY, context.category.as_deref(), rng)
                .ok_or_else(|| missing(CATEGORY))?;
            tokens.push(g.clone());
            tokens.push(c.clone());
        }
        FsaNode::Attribute => {
            let category = context
                .category
                .as_deref()
                .ok_or_else(|| Error::Internal("attribute query without a category".into()))?;
            let applicable: Vec<&String> = vocab
                .applicable(category)
                .unwrap_or_default()
                .iter()
                .filter(|a| !pool.values(a).is_empty())
                .collect();
            if applicable.is_empty() {
                return Err(Error::Internal(format!(
                    "no queryable attributes for category `{category}`"
                )));
            }
            // Prefer attributes not yet constrained.
            let fresh: Vec<&String> = applicable
                .iter()
                .copied()
                .filter(|a| !context.constraints.contains_key(*a))
                .collect();
            let choices = if fresh.is_empty() { &applicable } else { &fresh };
            let attr = choices[rng.below(choices.len())];
            let current = context.constraints.get(attr.as_str()).map(String::as_str);
            let value = pool.pick(attr, current, rng).ok_or_else(|| missing(attr))?;
            tokens.push(value.clone());
        }
        _ => {}
    }
    context.apply_tokens(&tokens, vocab)?;
    Ok(TextQuery {
        tokens,
        context_switch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{build_vocabulary, VocabConfig};

    fn vocab() -> Vocabulary {
        build_vocabulary(&VocabConfig::desk(), &mut SeededRng::new(1, 0)).unwrap()
    }

    #[test]
    fn default_config_is_valid() {
        FsaConfig::default().validate().unwrap();
    }

    #[test]
    fn degenerate_start_row() {
        let mut cfg = FsaConfig::default();
        cfg.transitions.insert(FsaNode::Start, [(FsaNode::Category, 1.0)].into_iter().collect());
        let mut rng = SeededRng::new(0, 0);
        for _ in 0..100 {
            assert_eq!(
                step_fsa(FsaNode::Start, &DialogContext::default(), &cfg, &mut rng).unwrap(),
                FsaNode::Category
            );
        }
    }

    #[test]
    fn p_end_one_always_ends() {
        let cfg = FsaConfig { p_end: 1.0, ..FsaConfig::default() };
        let mut rng = SeededRng::new(0, 0);
        let ctx = DialogContext::default();
        for _ in 0..100 {
            assert_eq!(step_fsa(FsaNode::Attribute, &ctx, &cfg, &mut rng).unwrap(), FsaNode::End);
            assert_eq!(step_fsa(FsaNode::ImageClick, &ctx, &cfg, &mut rng).unwrap(), FsaNode::End);
        }
    }

    #[test]
    fn unnormalised_rows_rejected() {
        let mut cfg = FsaConfig::default();
        cfg.transitions
            .insert(FsaNode::Gender, [(FsaNode::Attribute, 0.5), (FsaNode::ImageClick, 0.4)].into_iter().collect());
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut rng = SeededRng::new(0, 0);
        assert!(matches!(
            step_fsa(FsaNode::Gender, &DialogContext::default(), &cfg, &mut rng),
            Err(Error::Config(_))
        ));
        assert!(step_fsa(FsaNode::End, &DialogContext::default(), &FsaConfig::default(), &mut rng).is_err());
    }

    #[test]
    fn start_must_lead_to_text() {
        let mut cfg = FsaConfig::default();
        cfg.transitions.insert(FsaNode::Start, [(FsaNode::ImageClick, 1.0)].into_iter().collect());
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn attribute_redirected_without_category() {
        let mut cfg = FsaConfig::default();
        cfg.transitions.insert(FsaNode::Gender, [(FsaNode::Attribute, 1.0)].into_iter().collect());
        let mut rng = SeededRng::new(3, 0);
        let mut ctx = DialogContext::default();
        ctx.gender = Some("men".into());
        let mut seen = BTreeMap::new();
        for _ in 0..2000 {
            *seen.entry(step_fsa(FsaNode::Gender, &ctx, &cfg, &mut rng).unwrap()).or_insert(0) += 1;
        }
        assert_eq!(seen.len(), 2);
        assert!(seen[&FsaNode::Category] > 800 && seen[&FsaNode::ImageClick] > 800);
        ctx.category = Some("shoes".into());
        assert_eq!(step_fsa(FsaNode::Gender, &ctx, &cfg, &mut rng).unwrap(), FsaNode::Attribute);
    }

    #[test]
    fn gender_node_emits_one_gender() {
        let v = vocab();
        let pool = TokenPool::from_vocabulary(&v);
        let cfg = FsaConfig::default();
        let mut rng = SeededRng::new(9, 0);
        for _ in 0..50 {
            let mut ctx = DialogContext::default();
            let q = gen_text_query(FsaNode::Gender, &mut ctx, &v, &pool, &cfg, 0, &mut rng).unwrap();
            assert_eq!(q.tokens.len(), 1);
            assert!(crate::catalog::GENDERS.contains(&q.tokens[0].as_str()));
            assert!(!q.context_switch);
        }
    }

    #[test]
    fn shoes_never_get_sleeves() {
        let v = vocab();
        let pool = TokenPool::from_vocabulary(&v);
        let cfg = FsaConfig { p_context_switch: 0.0, ..FsaConfig::default() };
        let mut rng = SeededRng::new(4, 0);
        for _ in 0..500 {
            let mut ctx = DialogContext::default();
            ctx.category = Some("shoes".into());
            let q = gen_text_query(FsaNode::Attribute, &mut ctx, &v, &pool, &cfg, 1, &mut rng).unwrap();
            assert_eq!(q.tokens.len(), 1);
            let attr = match v.kind(&q.tokens[0]).unwrap() {
                crate::catalog::TokenKind::Value { attribute, .. } => attribute,
                other => panic!("{other:?}"),
            };
            assert!(v.is_applicable("shoes", attr));
            assert_ne!(attr, "sleeves");
        }
    }

    #[test]
    fn context_switch_resets() {
        let v = vocab();
        let pool = TokenPool::from_vocabulary(&v);
        let cfg = FsaConfig { p_context_switch: 1.0, ..FsaConfig::default() };
        let mut rng = SeededRng::new(5, 0);
        let mut ctx = DialogContext::default();
        ctx.apply_tokens(&["men", "dresses", "sleeveless"], &v).unwrap();
        let q = gen_text_query(FsaNode::Attribute, &mut ctx, &v, &pool, &cfg, 2, &mut rng).unwrap();
        assert!(q.context_switch);
        assert_eq!(ctx.gender.as_deref(), Some("women"));
        assert_ne!(ctx.category.as_deref(), Some("dresses"));
        assert_eq!(ctx.constraints.len(), 1);
        assert_eq!(q.tokens.len(), 3);
    }

    #[test]
    fn seeded_queries_repeat() {
        let v = vocab();
        let pool = TokenPool::from_vocabulary(&v);
        let cfg = FsaConfig::default();
        let run = || {
            let mut rng = SeededRng::new(8, 2);
            let mut ctx = DialogContext::default();
            gen_text_query(FsaNode::GenderCategory, &mut ctx, &v, &pool, &cfg, 0, &mut rng).unwrap()
        };
        assert_eq!(run(), run());
    }
}
