//! Measuring gender bias in legal text: gendered word extraction, word
//! embeddings, bias categories, WEAT scoring and temporal analysis.

pub mod cli;
pub mod clustering;
pub mod embedding;
pub mod error;
pub mod fixtures;
pub mod ingest;
pub mod plot;
pub mod special;
pub mod temporal;
pub mod weat;
pub mod wlor;

pub use error::{Error, Result};
