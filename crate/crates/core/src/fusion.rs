//! Late fusion of the text and audio channels.
//!
//! The fuzzy engine decides the text weight; a convex mixture combines the
//! two distributions. If the engine cannot produce a weight, the SNR-adjusted
//! ASR confidence is used directly as the weight.

use serde::{Deserialize, Serialize};

use crate::emotion::{EmotionDistribution, EmotionLabel, EmotionResult, VadState};
use crate::fuzzy::{infer_w_text, FuzzyTrace, RuleBase};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnrPenalty {
    /// Below this SNR the low-quality factor applies.
    pub low_db: f64,
    /// Below this SNR (and at or above `low_db`) the moderate factor applies.
    pub moderate_db: f64,
    pub low_factor: f64,
    pub moderate_factor: f64,
}

impl Default for SnrPenalty {
    fn default() -> Self {
        Self {
            low_db: 5.0,
            moderate_db: 12.0,
            low_factor: 0.6,
            moderate_factor: 0.85,
        }
    }
}

pub fn adjust_asr_confidence(asr_conf: f64, snr_db: f64, penalty: &SnrPenalty) -> f64 {
    let factor = if snr_db < penalty.low_db {
        penalty.low_factor
    } else if snr_db < penalty.moderate_db {
        penalty.moderate_factor
    } else {
        1.0
    };
    (asr_conf * factor).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoherenceVariant {
    /// Arousal difference halved, so C ranges over [0.25, 1].
    #[default]
    AsPrinted,
    /// Arousal difference taken over its full range, so C spans [0, 1].
    RangeNormalized,
}

pub fn coherence_index(audio: &VadState, text: &VadState, variant: CoherenceVariant) -> f64 {
    let dv = (audio.valence - text.valence).abs() / 2.0;
    let da = match variant {
        CoherenceVariant::AsPrinted => (audio.arousal - text.arousal).abs() / 2.0,
        CoherenceVariant::RangeNormalized => (audio.arousal - text.arousal).abs(),
    };
    1.0 - (dv + da) / 2.0
}

/// `w_text * p_text + (1 - w_text) * p_audio`.
pub fn fuse_distributions(
    p_text: &EmotionDistribution,
    p_audio: &EmotionDistribution,
    w_text: f64,
) -> EmotionDistribution {
    let w = w_text.clamp(0.0, 1.0);
    let mut mixed = [0.0; EmotionLabel::COUNT];
    for (slot, (t, a)) in mixed.iter_mut().zip(p_text.as_array().iter().zip(p_audio.as_array())) {
        *slot = w * t + (1.0 - w) * a;
    }
    EmotionDistribution::from_probabilities(mixed)
}

/// Arousal from the audio channel, valence as the mean of both channels.
pub fn fuse_vad(audio: &VadState, text: &VadState) -> VadState {
    VadState::new((audio.valence + text.valence) / 2.0, audio.arousal.clamp(0.0, 1.0), 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    Fuzzy,
    LinearFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusionOutcome {
    pub final_distribution: EmotionDistribution,
    pub final_vad: VadState,
    pub w_text: f64,
    pub w_audio: f64,
    pub mode: FusionMode,
    pub coherence: f64,
    pub trace: Option<FuzzyTrace>,
    /// Why the engine was bypassed, when it was.
    pub fallback_reason: Option<String>,
}

impl FusionOutcome {
    pub fn dominant(&self) -> (EmotionLabel, f64) {
        self.final_distribution.dominant()
    }
}

pub fn fuse(
    text: &EmotionResult,
    audio: &EmotionResult,
    adjusted_asr_conf: f64,
    rule_base: &RuleBase,
    coherence_variant: CoherenceVariant,
) -> FusionOutcome {
    let final_vad = fuse_vad(&audio.vad, &text.vad);
    let (w_text, mode, trace, fallback_reason) =
        match infer_w_text(rule_base, adjusted_asr_conf, audio.vad.arousal, final_vad.valence) {
            Ok(trace) if trace.w_text.is_finite() => (trace.w_text, FusionMode::Fuzzy, Some(trace), None),
            Ok(_) => (
                adjusted_asr_conf,
                FusionMode::LinearFallback,
                None,
                Some("non-finite engine output".to_string()),
            ),
            Err(e) => (adjusted_asr_conf, FusionMode::LinearFallback, None, Some(e.to_string())),
        };
    let w_text = w_text.clamp(0.0, 1.0);
    FusionOutcome {
        final_distribution: fuse_distributions(&text.distribution, &audio.distribution, w_text),
        final_vad,
        w_text,
        w_audio: 1.0 - w_text,
        mode,
        coherence: coherence_index(&audio.vad, &text.vad, coherence_variant),
        trace,
        fallback_reason,
    }
}

/// Fixed-weight mixture used by baselines and ablations; no engine.
pub fn fuse_with_weight(
    text: &EmotionResult,
    audio: &EmotionResult,
    w_text: f64,
    coherence_variant: CoherenceVariant,
) -> FusionOutcome {
    let w_text = w_text.clamp(0.0, 1.0);
    FusionOutcome {
        final_distribution: fuse_distributions(&text.distribution, &audio.distribution, w_text),
        final_vad: fuse_vad(&audio.vad, &text.vad),
        w_text,
        w_audio: 1.0 - w_text,
        mode: FusionMode::LinearFallback,
        coherence: coherence_index(&audio.vad, &text.vad, coherence_variant),
        trace: None,
        fallback_reason: None,
    }
}
