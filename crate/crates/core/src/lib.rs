//! Traceable multimodal affect inference.
//!
//! Heuristic audio and text channels each yield an emotion distribution and
//! a VAD estimate. A Mamdani rule base weighs them into one fused result,
//! guardrails screen the outcome, and every inference is sealed as a
//! canonical, hashed audit event that can be anchored and verified later.

pub mod audio;
pub mod audit;
pub mod clock;
pub mod emotion;
pub mod fusion;
pub mod fuzzy;
pub mod guardrails;
pub mod text;
