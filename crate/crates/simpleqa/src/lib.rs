//! Question answering over a triple knowledge base: given a simple natural
//! language question, predict the (subject, predicate) pair whose object
//! answers it.
//!
//! The pipeline is: a surface-form index retrieves subject candidates for a
//! recognized entity mention, `Pred(s)` expands them into candidate pairs,
//! and one of four predicate models supplies P(p|q); pairs are ranked by
//! P(p|q) * P(s|q). Modules:
//!
//! - [`kbstore`]: triple store with subject → predicates and
//!   (subject, predicate) → objects maps.
//! - [`surface`]: normalized surface-form index with frequencies.
//! - [`spanner`]: weakly supervised span labels, the IO-tagging recognizer,
//!   and edit-distance snapping.
//! - [`graphembed`]: role-specific KB embeddings via negative sampling.
//! - [`predicate`]: the four predicate-prediction models.
//! - [`ranker`]: candidate generation and pair scoring.
//! - [`eval`]: component-wise metrics and the error taxonomy.
//! - [`synth`]: deterministic micro-KB and dataset generator.

pub mod encoder;
pub mod error;
pub mod eval;
pub mod graphembed;
pub mod kbstore;
pub mod predicate;
pub mod ranker;
pub mod spanner;
pub mod surface;
pub mod synth;
pub mod wordvec;

pub use error::{Error, Result};
