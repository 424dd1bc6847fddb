//! Unsupervised OCR post-correction.
//!
//! The pipeline mines its own training data from a noisy corpus: word
//! embeddings surface OCR-corrupted variants next to their correct
//! spellings, a lexicon oracle tells the two apart, and edit-distance
//! grouping turns them into (error, correct) pairs. A character-level
//! attention encoder-decoder trained on those pairs then corrects unseen
//! erroneous forms, optionally cascaded behind a cheaper embedding-only
//! corrector.
//!
//! Stages are exposed as modules in pipeline order: [`corpus`] ingestion,
//! the [`lexicon`] oracle, [`embeddings`] training and neighbor queries,
//! parallel-data [`extraction`], the [`nmt`] corrector network, the
//! [`corrector`] front ends, and the evaluation [`harness`].

pub mod corpus;
pub mod corrector;
pub mod embeddings;
pub mod error;
pub mod extraction;
pub mod harness;
pub mod lexicon;
pub mod nmt;

pub use error::{EmendError, Result};
