//! Live browsing sessions over an immutable engine state.
//!
//! Each session is guarded by its own mutex, so requests to one session are
//! serialised while different sessions proceed independently. The table
//! itself is only locked for lookups, inserts and eviction.

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use mmdialog_core::agent::{decode_samples, forward_round, AgentHyper, AgentParams, TrainingSample};
use mmdialog_core::catalog::{Catalog, Vocabulary};
use mmdialog_core::corrnet::CorrNetModel;
use mmdialog_core::numerics::{fnv1a64, SeededRng};
use mmdialog_core::simulator::{DialogContext, DialogRound, FsaConfig, QueryEvent, Responder};
use serde::{Deserialize, Serialize};

pub const DEFAULT_CAPACITY: usize = 10_000;
pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(3600);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Rules,
    Agent,
    Random,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Protocol(String),
    #[error("{0}")]
    Internal(String),
}

impl From<mmdialog_core::Error> for EngineError {
    fn from(e: mmdialog_core::Error) -> Self {
        EngineError::Internal(e.to_string())
    }
}

pub type EngineResult<T> = Result<T, EngineError>;

/// CorrNet weights together with the image-view embedding of every product.
pub struct JointSpace {
    pub model: CorrNetModel,
    pub image_embeddings: Vec<Vec<f64>>,
}

pub struct AgentModel {
    pub params: AgentParams,
    pub hyper: AgentHyper,
}

/// Everything loaded once at startup.
pub struct EngineState {
    pub vocab: Vocabulary,
    pub responder: Responder,
    pub fsa: FsaConfig,
    pub seed: u64,
    pub joint: Option<JointSpace>,
    pub agent: Option<AgentModel>,
}

impl EngineState {
    pub fn new(
        vocab: Vocabulary,
        responder: Responder,
        fsa: FsaConfig,
        seed: u64,
        joint: Option<JointSpace>,
        agent: Option<AgentModel>,
    ) -> EngineResult<Self> {
        fsa.validate()?;
        if responder.catalog().len() < fsa.n_display {
            return Err(EngineError::Internal(format!(
                "catalog of {} products cannot fill a display of {}",
                responder.catalog().len(),
                fsa.n_display
            )));
        }
        if let Some(j) = &joint {
            if j.image_embeddings.len() != responder.catalog().len() {
                return Err(EngineError::Internal("image embeddings do not match the catalog".into()));
            }
        }
        if let Some(a) = &agent {
            let j = joint
                .as_ref()
                .ok_or_else(|| EngineError::Internal("agent mode needs CorrNet weights".into()))?;
            if a.params.k() != j.model.k() {
                return Err(EngineError::Internal(format!(
                    "agent works in {} dimensions, CorrNet in {}",
                    a.params.k(),
                    j.model.k()
                )));
            }
            if a.hyper.n_display != fsa.n_display {
                return Err(EngineError::Internal("agent and service disagree on the display size".into()));
            }
        }
        Ok(Self { vocab, responder, fsa, seed, joint, agent })
    }

    pub fn catalog(&self) -> &Catalog {
        self.responder.catalog()
    }
}

/// The random stream of session number `ordinal` under server seed `seed`.
pub fn session_rng(seed: u64, ordinal: u64) -> SeededRng {
    SeededRng::new(seed, 0).derive_named("session").derive(ordinal)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundView {
    pub round: usize,
    #[serde(flatten)]
    pub record: DialogRound,
    pub images: Vec<String>,
}

pub fn image_url(product_id: &str) -> String {
    format!("/api/product/{product_id}/image.svg")
}

impl RoundView {
    fn new(round: usize, record: DialogRound) -> Self {
        let images = record.displayed.iter().map(|id| image_url(id)).collect();
        Self { round, record, images }
    }
}

pub struct LiveSession {
    pub id: String,
    pub mode: Mode,
    rounds: Vec<RoundView>,
    context: DialogContext,
    rng: SeededRng,
    shown: BTreeSet<usize>,
    /// Joint-space projections of recent queries, newest last.
    window: Vec<Vec<f64>>,
}

enum Input<'a> {
    Text(&'a [String]),
    Click(usize),
}

impl LiveSession {
    fn new(id: String, mode: Mode, rng: SeededRng) -> Self {
        Self {
            id,
            mode,
            rounds: Vec::new(),
            context: DialogContext::default(),
            rng,
            shown: BTreeSet::new(),
            window: Vec::new(),
        }
    }

    pub fn rounds(&self) -> &[RoundView] {
        &self.rounds
    }

    pub fn context(&self) -> &DialogContext {
        &self.context
    }

    pub fn text_query(&mut self, state: &EngineState, tokens: &[String]) -> EngineResult<RoundView> {
        if tokens.is_empty() {
            return Err(EngineError::BadRequest("query has no tokens".into()));
        }
        let unknown: Vec<&str> = tokens
            .iter()
            .filter(|t| !state.vocab.contains(t))
            .map(String::as_str)
            .collect();
        if !unknown.is_empty() {
            return Err(EngineError::BadRequest(format!("unknown tokens: {}", unknown.join(", "))));
        }
        self.step(state, Input::Text(tokens))
    }

    pub fn click(&mut self, state: &EngineState, product_id: &str) -> EngineResult<RoundView> {
        let Some(last) = self.rounds.last() else {
            return Err(EngineError::Protocol("nothing has been displayed yet".into()));
        };
        if !last.record.displayed.iter().any(|id| id == product_id) {
            return Err(EngineError::Protocol(format!(
                "{product_id} is not among the products displayed in round {}",
                last.round
            )));
        }
        let index = state
            .catalog()
            .index_of(product_id)
            .map_err(|e| EngineError::Internal(e.to_string()))?;
        self.step(state, Input::Click(index))
    }

    fn step(&mut self, state: &EngineState, input: Input<'_>) -> EngineResult<RoundView> {
        let round = self.rounds.len();
        let catalog = state.catalog();
        let n_display = state.fsa.n_display;
        let mut context = self.context.clone();
        let query = match input {
            Input::Text(tokens) => {
                context
                    .apply_tokens(tokens, &state.vocab)
                    .map_err(|e| EngineError::BadRequest(e.to_string()))?;
                QueryEvent::Text { tokens: tokens.to_vec(), round }
            }
            Input::Click(i) => {
                context.apply_click(catalog.get(i), &state.vocab);
                QueryEvent::ImageClick { product_id: catalog.id(i).to_string(), round }
            }
        };

        let (displayed, n1) = match (self.mode, &input) {
            (Mode::Rules, Input::Text(_)) => (state.responder.respond_text(&context, n_display)?, None),
            (Mode::Rules, Input::Click(i)) => {
                let r = state
                    .responder
                    .respond_click(*i, round, &self.shown, &state.fsa, &mut self.rng)?;
                (r.displayed, Some(r.n1))
            }
            (Mode::Random, _) => {
                let mut all: Vec<usize> = (0..catalog.len()).collect();
                self.rng.shuffle(&mut all);
                all.truncate(n_display);
                (all, None)
            }
            (Mode::Agent, _) => (self.agent_display(state, &input)?, None),
        };

        self.context = context;
        self.shown.extend(displayed.iter().copied());
        let record = DialogRound {
            query,
            displayed: catalog.ids(&displayed).map(String::from).collect(),
            context: self.context.clone(),
            n1,
            context_switch: false,
        };
        let view = RoundView::new(round, record);
        self.rounds.push(view.clone());
        Ok(view)
    }

    fn agent_display(&mut self, state: &EngineState, input: &Input<'_>) -> EngineResult<Vec<usize>> {
        let (Some(agent), Some(joint)) = (&state.agent, &state.joint) else {
            return Err(EngineError::Conflict("agent weights are not loaded".into()));
        };
        let projection = match input {
            Input::Text(tokens) => joint.model.embed_tokens(tokens, &state.vocab)?,
            Input::Click(i) => joint.image_embeddings[*i].clone(),
        };
        self.window.push(projection);
        if self.window.len() > agent.hyper.window {
            self.window.remove(0);
        }
        let sample = TrainingSample { window: self.window.clone(), truth: Vec::new() };
        let fwd = forward_round(&agent.params, &agent.hyper, &sample, &mut self.rng)?;
        Ok(decode_samples(&fwd.samples, &joint.image_embeddings)?)
    }
}

struct Slot {
    session: Arc<Mutex<LiveSession>>,
    last_used: Instant,
}

struct Table {
    slots: HashMap<String, Slot>,
    next_ordinal: u64,
}

/// Bounded session table with least-recently-used eviction and an idle
/// timeout.
pub struct SessionStore {
    table: Mutex<Table>,
    capacity: usize,
    idle_timeout: Duration,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

impl SessionStore {
    pub fn new(capacity: usize, idle_timeout: Duration) -> Self {
        Self {
            table: Mutex::new(Table { slots: HashMap::new(), next_ordinal: 0 }),
            capacity: capacity.max(1),
            idle_timeout,
        }
    }

    pub fn len(&self) -> usize {
        lock(&self.table).slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn create(&self, state: &EngineState, mode: Mode) -> EngineResult<String> {
        if mode == Mode::Agent && state.agent.is_none() {
            return Err(EngineError::Conflict("agent mode requested but no agent weights are loaded".into()));
        }
        let now = Instant::now();
        let mut t = lock(&self.table);
        let timeout = self.idle_timeout;
        t.slots.retain(|_, s| now.duration_since(s.last_used) < timeout);
        while t.slots.len() >= self.capacity {
            let oldest = t
                .slots
                .iter()
                .min_by_key(|(_, s)| s.last_used)
                .map(|(k, _)| k.clone())
                .expect("table is non-empty");
            log::debug!("evicting session {oldest}");
            t.slots.remove(&oldest);
        }
        let ordinal = t.next_ordinal;
        t.next_ordinal += 1;
        let mut key = state.seed.to_le_bytes().to_vec();
        key.extend_from_slice(&ordinal.to_le_bytes());
        let id = format!("{ordinal:x}-{:016x}", fnv1a64(&key));
        let session = LiveSession::new(id.clone(), mode, session_rng(state.seed, ordinal));
        t.slots.insert(
            id.clone(),
            Slot { session: Arc::new(Mutex::new(session)), last_used: now },
        );
        Ok(id)
    }

    pub fn get(&self, id: &str) -> EngineResult<Arc<Mutex<LiveSession>>> {
        let now = Instant::now();
        let mut t = lock(&self.table);
        let expired = match t.slots.get_mut(id) {
            None => return Err(EngineError::NotFound(format!("no session {id}"))),
            Some(slot) if now.duration_since(slot.last_used) >= self.idle_timeout => true,
            Some(slot) => {
                slot.last_used = now;
                return Ok(Arc::clone(&slot.session));
            }
        };
        if expired {
            t.slots.remove(id);
        }
        Err(EngineError::NotFound(format!("session {id} expired")))
    }

    /// Runs `f` with exclusive access to one session.
    pub fn with_session<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut LiveSession) -> EngineResult<T>,
    ) -> EngineResult<T> {
        let session = self.get(id)?;
        let mut guard = lock(&session);
        f(&mut guard)
    }
}

impl Default for SessionStore {
    fn default() -> Self {
        Self::new(DEFAULT_CAPACITY, DEFAULT_IDLE_TIMEOUT)
    }
}
