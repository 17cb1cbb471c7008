//! Library for regression with overlapping group structure, built
//! around a penalty that selects unions of groups: the penalty of w is
//! the cheapest way to split w into latent per-group blocks, paying
//! each block's Euclidean norm times a group weight.
//!
//! The crate provides the norm itself (value, decompositions, dual
//! certificates, group supports), a proximal/coordinate-descent solver
//! for penalized squared and logistic losses, support-recovery
//! diagnostics, weight-design tools, and a reproducible synthetic
//! experiment harness.

pub mod analysis;
pub mod error;
pub mod groups;
pub mod io;
pub mod linalg;
pub mod norm;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
