//! Dialog simulation: the context-dependent automaton, the rule-based
//! responder and the dataset generator.

mod cluster;
mod context;
mod dataset;
mod fsa;
mod knn;
mod respond;

pub use cluster::{explore_cluster, Dendrogram, Merge};
pub use context::DialogContext;
pub use dataset::{
    generate_dataset, generate_session, session_id, validate_session, DialogRound, DialogSession,
    QueryEvent,
};
pub use fsa::{gen_text_query, step_fsa, FsaConfig, FsaNode, TextQuery, TokenPool};
pub use knn::{knn, neighbors_by_distance, KnnResult, Neighbor};
pub use respond::{sample_n1, ClickResponse, Responder};
