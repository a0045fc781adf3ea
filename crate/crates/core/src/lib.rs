//! Sentence-level Valence/Arousal/Dominance scoring for parliamentary
//! committee proceedings, and the affective-polarization analyses built on
//! the scores.

pub mod analysis;
pub mod bws;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod glm;
pub mod lexicon;
pub mod metrics;
pub mod stats;
pub mod train;
pub mod vad;

pub use error::{Error, Result};
pub use vad::{Dimension, Vad};

/// Version of this library, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
