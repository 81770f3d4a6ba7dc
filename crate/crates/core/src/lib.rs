//! Monotonicity probing toolkit for small recurrent language models.
//!
//! The crate covers the whole experimental pipeline: corpus filtering,
//! minimal-pair generation, a two-layer LSTM language model trained with
//! truncated BPTT, L1-regularized diagnostic classifiers over its hidden
//! states, the DC-ranking analysis that compares probe weights with decoder
//! rows, and the experiment runner that ties them together.

pub mod corpus;
pub mod error;
pub mod evalgen;
pub mod lm;
pub mod probe;
pub mod ranking;
pub mod runner;
pub mod tensorio;

pub use error::{Error, Result};
