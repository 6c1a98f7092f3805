//! Turn orchestration for the affect pipeline: configuration, the
//! per-turn pipeline, metrics, batch evaluation and a synthetic corpus.

pub mod config;
pub mod corpus;
pub mod eval;
pub mod metrics;
pub mod pipeline;
