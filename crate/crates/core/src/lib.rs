//! Verse-aligned translation analytics.
//!
//! Parses parallel translations of a chaptered text, runs a deterministic
//! preprocessing pipeline and derives n-gram tables, lexicon polarity,
//! multi-label sentiment aggregates and cross-translation comparisons.

pub mod compare;
pub mod corpus;
pub mod data;
pub mod error;
pub mod labels;
pub mod ngrams;
pub mod polarity;
pub mod preprocess;
pub mod report;

pub use error::{Error, Result};
