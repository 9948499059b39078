//! Core algorithms: corpus ingestion, LDA user modeling, the intermediary
//! topic graph, diversity-aware people recommendation, data portraits and a
//! planted-community evaluation harness.

pub mod corpus;
pub mod error;
pub mod portrait;
pub mod recsys;
pub mod synth;
pub mod topicgraph;
pub mod topics;

pub use error::{Error, Result};
