//! Cross-lingual document and sentence alignment for news corpora: corpus
//! ingestion, embedding, date-bucketed similarity, alignment strategies,
//! threshold tuning, cleanup, sentence alignment, comparability metrics and
//! reporting.

pub mod align;
pub mod cleanup;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod metrics;
pub mod report;
pub mod sentences;
pub mod similarity;
pub mod tune;

pub use error::{Error, Result};
