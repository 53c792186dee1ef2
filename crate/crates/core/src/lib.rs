//! Affordance-aware retrieval over HTML corpora.
//!
//! Documents are segmented into structural blocks, each block is scored
//! against a fixed topic lexicon to give an *affordance vector*, and every
//! document becomes a case: a small weighted term set used for lexical
//! retrieval plus the summed affordance vector used to re-rank candidates.
//!
//! The pipeline, bottom to top:
//!
//! - [`segmenter`]: HTML decoding, block segmentation, link-density
//!   filtering, sentence de-duplication and tokenization.
//! - [`lexicon`]: the ordered topic list and term matching.
//! - [`affordance`]: affordance vectors and their cosine comparison.
//! - [`casebase`]: case construction, persistence and revision.
//! - [`retrieval`]: tf-idf candidate retrieval and affordance re-ranking.
//! - [`harness`]: query files, experiment runs and CSV reports.

pub mod affordance;
pub mod casebase;
mod error;
pub mod harness;
pub mod lexicon;
pub mod retrieval;
pub mod segmenter;

pub use affordance::AffordanceVector;
pub use casebase::{BuildConfig, Case, CaseBase};
pub use error::{Error, Result};
pub use lexicon::{Lexicon, Topic};
pub use retrieval::{InvertedIndex, Query, RankedResult};
pub use segmenter::{Block, BlockKind, RawDocument, Tokenizer};
