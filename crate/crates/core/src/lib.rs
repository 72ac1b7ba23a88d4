//! Query segmentation by classifying each gap between adjacent query tokens
//! from the embeddings of the two tokens, plus the n-gram frequency baseline,
//! the evaluation metrics and a synthetic corpus generator.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar for the common cases.

pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
pub mod ngram;
pub mod scalar;
pub mod segmenter;
pub mod synth;

pub use corpus::{AnnotatedQuery, QueryTokens, Segmentation, SplitSpec};
pub use error::{Error, Result};
pub use eval::{EvalReport, Segmenter};
pub use ngram::{NGramTable, ScoreWeight};
pub use scalar::Scalar;
pub use segmenter::FeatureMode;

pub type EmbeddingTable64 = embeddings::EmbeddingTable<f64>;
pub type EmbeddingTable32 = embeddings::EmbeddingTable<f32>;
pub type BoundaryModel64 = segmenter::BoundaryModel<f64>;
pub type BoundaryModel32 = segmenter::BoundaryModel<f32>;
pub type LogisticModel64 = segmenter::LogisticModel<f64>;
pub type GbdtModel64 = segmenter::GbdtModel<f64>;
pub type Dataset64 = segmenter::Dataset<f64>;
pub type ModelFile64 = segmenter::ModelFile<f64>;
