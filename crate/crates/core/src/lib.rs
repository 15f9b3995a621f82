//! Category-overlap similarity scoring for pairs of short texts.
//!
//! The crate covers the whole path from categorized records to a trained
//! siamese scorer: text cleanup ([`textproc`]), pair construction
//! ([`corpus`]), CBOW word vectors ([`embedding`]), pluggable text encoders
//! ([`encoder`]), the comparison head ([`simhead`]) and supervised training
//! with evaluation ([`pipeline`]). Everything is differentiated by the small
//! tape in [`tensor`].

pub mod corpus;
pub mod embedding;
pub mod encoder;
mod error;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod simhead;
pub mod tensor;
pub mod textproc;

pub use error::{Error, Result};

/// Number of similarity classes (scores 0 through 3).
pub const NUM_SCORES: usize = 4;
