//! Claim span identification.
//!
//! A word-level transformer encoder, optionally augmented with a
//! description-aware adapter (compositional de-attention over a bank of
//! claim descriptions followed by interactive gating), feeds a linear-chain
//! CRF over BIO tags. The crate also carries the evaluation suite
//! (token-level P/R/F1, Dice, span-count ratio, paired t-test) and a BM25
//! retrieval harness comparing tweet queries with span queries.

pub mod autodiff;
pub mod bank;
pub mod checkpoint;
pub mod config;
pub mod crf;
pub mod descnet;
pub mod encoder;
mod error;
pub mod metrics;
pub mod model;
pub mod params;
pub mod preprocess;
pub mod retrieval;
pub mod synthetic;
pub mod training;
pub mod vocab;

pub use error::{Error, Result};

/// Dense row-major matrix used for every representation in the pipeline.
pub type Mat = ndarray::Array2<f64>;

/// Seeded generator used for initialization, shuffling and dropout.
pub type SeededRng = rand_chacha::ChaCha8Rng;
