//! Heuristic Spanish text affect: dictionary lemmatization, negation scope,
//! intensifier multipliers and lexicon scoring.

pub mod lexicon;
mod preprocess;

use std::path::PathBuf;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emotion::{EmotionDistribution, EmotionLabel, EmotionResult, VadState};

pub use lexicon::{LemmaDictionary, Lexicon, LexiconEntry};
pub use preprocess::{
    preprocess, AppliedIntensifier, IntensifierTable, TextAnalysis, Token, TokenKind, DEFAULT_INTENSIFIERS,
    DEFAULT_NEGATIONS,
};

#[derive(Debug, Error)]
pub enum TextError {
    #[error("lexicon line {line}: {reason}")]
    Lexicon { line: usize, reason: String },

    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextConfig {
    /// TSV lexicon; the shipped seed lexicon when absent.
    pub lexicon_path: Option<PathBuf>,
    /// TSV surface→lemma dictionary; the shipped seed when absent.
    pub lemma_path: Option<PathBuf>,
    pub negation_markers: Vec<String>,
    pub negation_scope: usize,
    pub intensifiers: IndexMap<String, f64>,
}

impl Default for TextConfig {
    fn default() -> Self {
        Self {
            lexicon_path: None,
            lemma_path: None,
            negation_markers: DEFAULT_NEGATIONS.iter().map(|s| s.to_string()).collect(),
            negation_scope: 3,
            intensifiers: DEFAULT_INTENSIFIERS.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

/// Loaded dictionaries plus the configuration they came from.
#[derive(Debug, Clone)]
pub struct TextAnalyzer {
    pub lexicon: Lexicon,
    pub lemmas: LemmaDictionary,
    pub negation_markers: Vec<String>,
    pub intensifiers: IntensifierTable,
    pub negation_scope: usize,
}

impl TextAnalyzer {
    pub fn from_config(config: &TextConfig) -> Result<Self, TextError> {
        let lexicon = match &config.lexicon_path {
            Some(p) => Lexicon::load(p)?,
            None => Lexicon::seed(),
        };
        let lemmas = match &config.lemma_path {
            Some(p) => LemmaDictionary::load(p)?,
            None => LemmaDictionary::seed(),
        };
        Ok(Self {
            lexicon,
            lemmas,
            negation_markers: config.negation_markers.iter().map(|m| m.to_lowercase()).collect(),
            intensifiers: IntensifierTable::new(config.intensifiers.iter().map(|(k, v)| (k.as_str(), *v))),
            negation_scope: config.negation_scope,
        })
    }

    pub fn seed() -> Self {
        Self::from_config(&TextConfig::default()).expect("seed resources are well-formed")
    }

    pub fn preprocess(&self, text: &str) -> TextAnalysis {
        preprocess(
            text,
            &self.lemmas,
            &self.negation_markers,
            &self.intensifiers,
            self.negation_scope,
        )
    }

    pub fn analyze(&self, text: &str) -> (EmotionResult, TextAnalysis) {
        text_emotion(self, text)
    }
}

/// Where a negated lemma's mass goes: joy and sadness swap, every other
/// emotion collapses to neutral.
pub fn negate_emotion(label: EmotionLabel) -> EmotionLabel {
    match label {
        EmotionLabel::Joy => EmotionLabel::Sadness,
        EmotionLabel::Sadness => EmotionLabel::Joy,
        _ => EmotionLabel::Neutral,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextScores {
    pub raw: [f64; EmotionLabel::COUNT],
    pub valence: f64,
    pub matched_tokens: usize,
}

pub fn score_text(analysis: &TextAnalysis, lexicon: &Lexicon) -> TextScores {
    let mut raw = [0.0; EmotionLabel::COUNT];
    let mut valence_sum = 0.0;
    let mut matched = 0;
    for token in analysis.content_tokens() {
        let Some(entry) = lexicon.get(&token.lemma) else {
            continue;
        };
        matched += 1;
        let mut emotion = entry.emotion;
        let mut contribution = entry.weight * token.multiplier;
        let mut valence = entry.valence * token.multiplier;
        if token.negated {
            emotion = negate_emotion(emotion);
            contribution *= 0.5;
            valence *= -0.5;
        }
        raw[emotion.index()] += contribution;
        valence_sum += valence;
    }
    TextScores {
        raw,
        valence: (valence_sum / matched.max(1) as f64).clamp(-1.0, 1.0),
        matched_tokens: matched,
    }
}

pub fn text_emotion(analyzer: &TextAnalyzer, text: &str) -> (EmotionResult, TextAnalysis) {
    let analysis = analyzer.preprocess(text);
    let scores = score_text(&analysis, &analyzer.lexicon);
    let distribution = EmotionDistribution::normalize(scores.raw).unwrap_or_else(|_| EmotionDistribution::neutral());
    let valence = scores.valence;
    let vad = VadState::new(valence, 0.5 * valence.abs() + 0.1, 0.5);
    let confidence = (scores.matched_tokens as f64 / 5.0).min(1.0);
    let lemmas: Vec<&str> = analysis.content_tokens().map(|t| t.lemma.as_str()).collect();
    let result = EmotionResult::new(distribution, vad, confidence)
        .with_meta("matched_tokens", scores.matched_tokens)
        .with_meta("negations_detected", analysis.negations_detected)
        .with_meta("intensifiers_applied", analysis.intensifiers_applied.len())
        .with_meta("lemmas", lemmas.join(" "))
        .with_meta("dominance", vad.dominance);
    (result, analysis)
}
