//! File formats, pipeline stages, SVG rendering and the HTTP browsing
//! service built on `mmdialog-core`.

pub mod cli;
pub mod engine;
pub mod error;
pub mod formats;
pub mod pipeline;
pub mod server;
pub mod svg;

pub use error::{AppError, AppResult};
