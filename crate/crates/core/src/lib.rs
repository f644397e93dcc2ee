//! Mutation-kill analysis for deep learning models.
//!
//! The crate consumes per-instance prediction matrices for an original model
//! and its mutants and decides, under several kill definitions, whether a test
//! set kills each mutant:
//!
//! * `KD1` compares accuracy distributions with a two-sample t-test and
//!   Cohen's d.
//! * `KD2`, `KD3` and `KD4` are the non-statistical definitions evaluated on
//!   one original/mutant instance pair.
//! * `KDF` runs Fisher's exact test on each input's 2×2 correct/incorrect
//!   table and counts killing inputs (NKI).
//!
//! [`monotonicity`] sweeps growing test-set prefixes and reports kill-status
//! regressions, and [`simgen`] builds synthetic matrices, including a fixed
//! construction on which `KD1` is not monotone.

pub mod cli;
mod error;
pub mod killdefs;
pub mod matrixio;
pub mod monotonicity;
pub mod report;
pub mod simgen;
pub mod stats;

pub use error::{Error, Result};
