//! Phrase-to-box visual grounding, built from scratch.
//!
//! A query phrase is encoded by an LSTM over learned word embeddings. Each
//! candidate proposal contributes an L2-normalized appearance feature plus
//! a 5-d spatial feature; both are concatenated with the query, fused by a
//! ReLU layer, and fed to a ranking score and a 4-d box refinement. Ranking
//! is trained against IoU-derived soft labels with a KL objective, refinement
//! with smooth L1. Proposal sets are judged by discrimination (coverage) and
//! diversity (non-redundancy) scores.

pub mod ablation;
pub mod config;
pub mod error;
pub mod geometry;
pub mod gradcheck;
pub mod head;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod query;
pub mod synth;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
