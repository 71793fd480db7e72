//! Session generation: a random walk through the automaton with the
//! rule-based responder answering each turn.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::context::DialogContext;
use super::fsa::{gen_text_query, step_fsa, FsaConfig, FsaNode, TokenPool};
use super::respond::Responder;
use crate::catalog::Vocabulary;
use crate::numerics::SeededRng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QueryEvent {
    Text { tokens: Vec<String>, round: usize },
    ImageClick { product_id: String, round: usize },
}

impl QueryEvent {
    pub fn round(&self) -> usize {
        match self {
            QueryEvent::Text { round, .. } | QueryEvent::ImageClick { round, .. } => *round,
        }
    }

    pub fn is_text(&self) -> bool {
        matches!(self, QueryEvent::Text { .. })
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogRound {
    pub query: QueryEvent,
    pub displayed: Vec<String>,
    /// Context after the query was applied.
    pub context: DialogContext,
    pub n1: Option<usize>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub context_switch: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogSession {
    pub session_id: String,
    pub rounds: Vec<DialogRound>,
}

pub fn session_id(ordinal: usize) -> String {
    format!("S{:06}", ordinal + 1)
}

/// Generates session number `ordinal`. Each session draws from its own
/// stream derived from `base`, so sessions are independent of generation
/// order.
pub fn generate_session(
    ordinal: usize,
    responder: &Responder,
    vocab: &Vocabulary,
    pool: &TokenPool,
    config: &FsaConfig,
    base: &SeededRng,
) -> Result<DialogSession> {
    let mut rng = base.derive(ordinal as u64);
    let catalog = responder.catalog();
    let mut ctx = DialogContext::default();
    let mut node = FsaNode::Start;
    let mut rounds: Vec<DialogRound> = Vec::new();
    let mut shown: BTreeSet<usize> = BTreeSet::new();
    let mut last_display: Vec<usize> = Vec::new();

    while rounds.len() < config.max_rounds {
        node = step_fsa(node, &ctx, config, &mut rng)?;
        if node == FsaNode::End {
            break;
        }
        let round = rounds.len();
        let (query, displayed, n1, context_switch) = if node == FsaNode::ImageClick {
            if last_display.is_empty() {
                return Err(Error::Internal("image click before any display".into()));
            }
            let clicked = last_display[rng.below(last_display.len())];
            ctx.apply_click(catalog.get(clicked), vocab);
            let resp = responder.respond_click(clicked, round, &shown, config, &mut rng)?;
            let q = QueryEvent::ImageClick {
                product_id: catalog.id(clicked).into(),
                round,
            };
            (q, resp.displayed, Some(resp.n1), false)
        } else {
            let tq = gen_text_query(node, &mut ctx, vocab, pool, config, round, &mut rng)?;
            let displayed = responder.respond_text(&ctx, config.n_display)?;
            let q = QueryEvent::Text {
                tokens: tq.tokens,
                round,
            };
            (q, displayed, None, tq.context_switch)
        };
        shown.extend(displayed.iter().copied());
        rounds.push(DialogRound {
            query,
            displayed: catalog.ids(&displayed).map(String::from).collect(),
            context: ctx.clone(),
            n1,
            context_switch,
        });
        last_display = displayed;
    }
    Ok(DialogSession {
        session_id: session_id(ordinal),
        rounds,
    })
}

/// Generates `n_sessions` sessions sequentially.
pub fn generate_dataset(
    responder: &Responder,
    vocab: &Vocabulary,
    pool: &TokenPool,
    config: &FsaConfig,
    n_sessions: usize,
    rng: &SeededRng,
) -> Result<Vec<DialogSession>> {
    if n_sessions == 0 {
        return Err(Error::InvalidInput("need at least one session".into()));
    }
    config.validate()?;
    (0..n_sessions)
        .map(|i| generate_session(i, responder, vocab, pool, config, rng))
        .collect()
}

/// Checks the structural invariants of a session against the catalog.
pub fn validate_session(
    session: &DialogSession,
    responder: &Responder,
    config: &FsaConfig,
) -> Result<()> {
    let bad = |msg: String| Err(Error::Data(format!("{}: {msg}", session.session_id)));
    if session.rounds.is_empty() {
        return bad("no rounds".into());
    }
    if session.rounds.len() > config.max_rounds {
        return bad(format!("{} rounds exceed the cap", session.rounds.len()));
    }
    let mut prev: Option<&DialogRound> = None;
    for (r, round) in session.rounds.iter().enumerate() {
        if round.query.round() != r {
            return bad(format!("round {r} labelled {}", round.query.round()));
        }
        let distinct: BTreeSet<&String> = round.displayed.iter().collect();
        if distinct.len() != round.displayed.len() {
            return bad(format!("duplicate display in round {r}"));
        }
        if round.displayed.len() != config.n_display.min(responder.catalog().len()) {
            return bad(format!("round {r} shows {} products", round.displayed.len()));
        }
        for id in &round.displayed {
            responder.catalog().index_of(id)?;
        }
        match &round.query {
            QueryEvent::Text { tokens, .. } => {
                if tokens.is_empty() {
                    return bad(format!("empty text query in round {r}"));
                }
                if round.n1.is_some() {
                    return bad(format!("text round {r} carries n1"));
                }
            }
            QueryEvent::ImageClick { product_id, .. } => {
                let Some(p) = prev else {
                    return bad("session starts with a click".into());
                };
                if !p.displayed.contains(product_id) {
                    return bad(format!("round {r} clicks undisplayed {product_id}"));
                }
                match round.n1 {
                    Some(n1) if (1..=config.n_display).contains(&n1) => {}
                    other => return bad(format!("click round {r} has n1 {other:?}")),
                }
            }
        }
        prev = Some(round);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{
        build_vocabulary, encode_catalog, generate_catalog, Catalog, CatalogConfig, VocabConfig, DEFAULT_IMAGE_NOISE,
    };
    use alloc::collections::BTreeMap;
    use alloc::vec;

    fn setup(n: usize) -> (Vocabulary, Responder, TokenPool) {
        let v = build_vocabulary(&VocabConfig::desk(), &mut SeededRng::new(1, 0)).unwrap();
        let ps = generate_catalog(&v, &CatalogConfig { products: n, family: None }, &mut SeededRng::new(2, 0))
            .unwrap();
        let catalog = Catalog::new(ps, &v).unwrap();
        let feats = encode_catalog(&catalog, &v, 2, DEFAULT_IMAGE_NOISE)
            .unwrap()
            .into_iter()
            .map(|e| e.image)
            .collect();
        let pool = TokenPool::from_catalog(&catalog);
        (v, Responder::new(catalog, feats).unwrap(), pool)
    }

    #[test]
    fn sessions_satisfy_invariants() {
        let (v, r, pool) = setup(60);
        let cfg = FsaConfig::default();
        let sessions = generate_dataset(&r, &v, &pool, &cfg, 100, &SeededRng::new(8, 0)).unwrap();
        for s in &sessions {
            validate_session(s, &r, &cfg).unwrap();
            assert!(s.rounds[0].query.is_text());
            for round in &s.rounds {
                assert!(round.context.is_consistent(&v));
            }
        }
        let again = generate_dataset(&r, &v, &pool, &cfg, 100, &SeededRng::new(8, 0)).unwrap();
        assert_eq!(sessions, again);
        assert_eq!(sessions[3], generate_session(3, &r, &v, &pool, &cfg, &SeededRng::new(8, 0)).unwrap());
    }

    #[test]
    fn immediate_end_gives_minimal_sessions() {
        let (v, r, pool) = setup(40);
        let mut cfg = FsaConfig::default();
        cfg.p_end = 1.0;
        for n in [FsaNode::Gender, FsaNode::Category, FsaNode::GenderCategory] {
            cfg.transitions.insert(n, BTreeMap::from([(FsaNode::Attribute, 1.0)]));
        }
        let sessions = generate_dataset(&r, &v, &pool, &cfg, 30, &SeededRng::new(8, 0)).unwrap();
        for s in &sessions {
            validate_session(s, &r, &cfg).unwrap();
            // One opening query, an attribute refinement (or its redirect), then the end.
            assert!(s.rounds.len() <= 3, "{}", s.rounds.len());
        }
    }

    #[test]
    fn context_switch_resets_snapshot() {
        let (v, r, pool) = setup(60);
        let mut cfg = FsaConfig::default();
        cfg.p_context_switch = 0.5;
        let sessions = generate_dataset(&r, &v, &pool, &cfg, 50, &SeededRng::new(11, 0)).unwrap();
        let mut switches = 0;
        for s in &sessions {
            for round in &s.rounds {
                if round.context_switch {
                    switches += 1;
                    let QueryEvent::Text { tokens, .. } = &round.query else { panic!() };
                    assert_eq!(round.context.gender.as_ref(), Some(&tokens[0]));
                    assert_eq!(round.context.category.as_ref(), Some(&tokens[1]));
                }
            }
        }
        assert!(switches > 0);
    }

    #[test]
    fn query_event_json_shape() {
        let e = QueryEvent::ImageClick {
            product_id: "P000001".into(),
            round: 2,
        };
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(json, r#"{"kind":"image_click","product_id":"P000001","round":2}"#);
        let t: QueryEvent = serde_json::from_str(r#"{"kind":"text","tokens":["men"],"round":0}"#).unwrap();
        assert_eq!(
            t,
            QueryEvent::Text {
                tokens: vec!["men".into()],
                round: 0
            }
        );
    }
}
