//! Mamdani inference of the text-channel fusion weight.
//!
//! Min t-norm over antecedents, max aggregation per output set, centroid
//! defuzzification on a 1001-point grid. Every inference returns a
//! [`FuzzyTrace`] that lists each rule with its firing strength.

mod engine;
mod membership;
mod rulebase;

use thiserror::Error;

pub use engine::{
    aggregate_outputs, aggregated_membership, defuzzify_centroid, defuzzify_centroid_with, evaluate_rules,
    infer_w_text, input_memberships, FiredRule, FuzzyInputs, FuzzyTrace, Memberships, CENTROID_GRID_POINTS,
};
pub use membership::{membership, MembershipFunction};
pub use rulebase::{
    Condition, FuzzyRule, FuzzySet, LinguisticVariable, RuleBase, DEFAULT_RULE_BASE, INPUT_VARIABLES, TRACE_RULE_BASE,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FuzzyError {
    #[error("membership points must be finite and ordered a <= b <= c <= d, got {points:?}")]
    InvalidMembership { points: [f64; 4] },

    #[error("invalid rule base: {0}")]
    InvalidRuleBase(String),

    #[error("no output set is activated")]
    ZeroActivation,
}

impl FuzzyError {
    fn invalid(msg: impl Into<String>) -> Self {
        FuzzyError::InvalidRuleBase(msg.into())
    }
}
