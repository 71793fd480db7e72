//! Multi-modal catalog browsing engine.
//!
//! The crate is `no_std` (with `alloc`) and contains every algorithmic piece of
//! the pipeline:
//!
//! - [`numerics`]: seeded random streams, dense kernels, activations and a
//!   finite-difference gradient oracle.
//! - [`catalog`]: a synthetic fashion vocabulary and catalog, deterministic
//!   text/image encoders and an attribute inverted index.
//! - [`simulator`]: a context-dependent probabilistic automaton that generates
//!   multi-modal dialog sessions, with an exploration/exploitation responder
//!   for image clicks.
//! - [`corrnet`]: a correlational autoencoder learning the joint text/image
//!   embedding space.
//! - [`agent`]: the browsing agent, which answers dialog context by sampling
//!   from a Gaussian mixture in the joint space.
//!
//! File formats, the CLI and the HTTP service live in the `mmdialog` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod agent;
pub mod catalog;
pub mod corrnet;
mod error;
pub mod numerics;
pub mod simulator;

pub use error::{Error, Result};
