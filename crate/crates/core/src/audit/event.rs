use serde::Serialize;

use crate::audio::AcousticFeatures;
use crate::emotion::{EmotionDistribution, VadState};
use crate::fusion::{CoherenceVariant, FusionMode};
use crate::fuzzy::FuzzyTrace;
use crate::guardrails::Escalation;

use super::canonical::{canonicalize, compute_txid, CANONICAL_VERSION};
use super::redact::RedactionReport;
use super::CanonicalizationError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Weights {
    pub w_text: f64,
    pub w_audio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AcousticRecord {
    pub arousal_raw: f64,
    pub arousal_smoothed: f64,
    pub zcr_raw: f64,
    pub zcr_norm: f64,
    pub rms: f64,
    pub rms_norm: f64,
    pub timbre_score: f64,
    pub mfcc_present: bool,
    pub snr_db: f64,
}

impl From<&AcousticFeatures> for AcousticRecord {
    fn from(f: &AcousticFeatures) -> Self {
        Self {
            arousal_raw: f.arousal_raw,
            arousal_smoothed: f.arousal_smoothed,
            zcr_raw: f.zcr_raw,
            zcr_norm: f.zcr_norm,
            rms: f.rms,
            rms_norm: f.rms_norm,
            timbre_score: f.timbre_score,
            mfcc_present: f.mfcc_present,
            snr_db: f.snr_db,
        }
    }
}

/// Escalation as hashed into the event. Webhook delivery happens after
/// the txid exists, so the delivery flag is not part of it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EscalationBlock {
    pub triggered: bool,
    pub reasons: Vec<String>,
    pub timestamp: String,
}

impl From<&Escalation> for EscalationBlock {
    fn from(e: &Escalation) -> Self {
        Self {
            triggered: e.triggered,
            reasons: e.reasons.clone(),
            timestamp: e.timestamp.clone(),
        }
    }
}

/// One redacted inference record. Its canonical bytes are the stored
/// artifact and their SHA-256 is the txid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditEvent {
    pub canonical_version: String,
    pub event_id: String,
    pub timestamp: String,
    pub session_id: String,
    pub transcript: String,
    pub response: String,
    /// Confidence as reported by the recognizer.
    pub asr_conf: f64,
    /// After the SNR penalty; this is what the engine sees.
    pub asr_conf_adjusted: f64,
    pub emotion_audio_conf: f64,
    pub emotion_text_conf: f64,
    pub emotion_audio: EmotionDistribution,
    pub emotion_text: EmotionDistribution,
    pub weights: Weights,
    pub mode: FusionMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fusion_fuzzy: Option<FuzzyTrace>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback_reason: Option<String>,
    pub coherence: f64,
    pub coherence_variant: CoherenceVariant,
    pub final_distribution: EmotionDistribution,
    pub final_vad: VadState,
    pub acoustic: AcousticRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub escalation: Option<EscalationBlock>,
    pub redaction: RedactionReport,
    pub rule_base: String,
    pub model_size: String,
    pub run_id: String,
}

fn check(field: &str, x: f64, lo: f64, hi: f64) -> Result<(), CanonicalizationError> {
    if !x.is_finite() {
        return Err(CanonicalizationError::NonFinite(format!("{field}={x}")));
    }
    if x < lo || x > hi {
        return Err(CanonicalizationError::OutOfRange {
            field: field.to_string(),
            value: x,
        });
    }
    Ok(())
}

fn check_distribution(field: &str, d: &EmotionDistribution) -> Result<(), CanonicalizationError> {
    for (label, p) in d.iter() {
        check(&format!("{field}.{label}"), p, 0.0, 1.0)?;
    }
    Ok(())
}

impl AuditEvent {
    pub fn version() -> String {
        CANONICAL_VERSION.to_string()
    }

    /// Every number finite and in range; trace present iff the engine ran.
    pub fn validate(&self) -> Result<(), CanonicalizationError> {
        for (name, v) in [
            ("asr_conf", self.asr_conf),
            ("asr_conf_adjusted", self.asr_conf_adjusted),
            ("emotion_audio_conf", self.emotion_audio_conf),
            ("emotion_text_conf", self.emotion_text_conf),
            ("weights.w_text", self.weights.w_text),
            ("weights.w_audio", self.weights.w_audio),
            ("coherence", self.coherence),
            ("final_vad.arousal", self.final_vad.arousal),
            ("final_vad.dominance", self.final_vad.dominance),
            ("acoustic.arousal_raw", self.acoustic.arousal_raw),
            ("acoustic.arousal_smoothed", self.acoustic.arousal_smoothed),
            ("acoustic.zcr_raw", self.acoustic.zcr_raw),
            ("acoustic.zcr_norm", self.acoustic.zcr_norm),
            ("acoustic.rms", self.acoustic.rms),
            ("acoustic.rms_norm", self.acoustic.rms_norm),
            ("acoustic.timbre_score", self.acoustic.timbre_score),
        ] {
            check(name, v, 0.0, 1.0)?;
        }
        check("final_vad.valence", self.final_vad.valence, -1.0, 1.0)?;
        check("acoustic.snr_db", self.acoustic.snr_db, 0.0, 80.0)?;
        check_distribution("emotion_audio", &self.emotion_audio)?;
        check_distribution("emotion_text", &self.emotion_text)?;
        check_distribution("final_distribution", &self.final_distribution)?;

        if let Some(trace) = &self.fusion_fuzzy {
            for (name, v) in [
                ("fusion_fuzzy.inputs.asr_conf", trace.inputs.asr_conf),
                ("fusion_fuzzy.inputs.arousal", trace.inputs.arousal),
                ("fusion_fuzzy.w_text", trace.w_text),
            ] {
                check(name, v, 0.0, 1.0)?;
            }
            check("fusion_fuzzy.inputs.valence", trace.inputs.valence, -1.0, 1.0)?;
            for (i, rule) in trace.fired_rules.iter().enumerate() {
                check(
                    &format!("fusion_fuzzy.fired_rules[{i}].strength"),
                    rule.strength,
                    0.0,
                    1.0,
                )?;
            }
            for (label, v) in &trace.out_sets {
                check(&format!("fusion_fuzzy.out_sets.{label}"), *v, 0.0, 1.0)?;
            }
            for (var, sets) in &trace.memberships {
                for (label, v) in sets {
                    check(&format!("fusion_fuzzy.memberships.{var}.{label}"), *v, 0.0, 1.0)?;
                }
            }
        }
        let has_trace = self.fusion_fuzzy.is_some();
        if has_trace != (self.mode == FusionMode::Fuzzy) {
            return Err(CanonicalizationError::Inconsistent(
                "fusion_fuzzy must be present exactly when mode is fuzzy".into(),
            ));
        }
        Ok(())
    }

    pub fn canonical_bytes(&self) -> Result<Vec<u8>, CanonicalizationError> {
        self.validate()?;
        canonicalize(self)
    }

    /// Canonical bytes and their txid.
    pub fn seal(&self) -> Result<(Vec<u8>, String), CanonicalizationError> {
        let bytes = self.canonical_bytes()?;
        let txid = compute_txid(&bytes);
        Ok((bytes, txid))
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::reference_event;
    use super::*;

    #[test]
    fn canonical_bytes_are_stable() {
        let e = reference_event();
        let (a, txid_a) = e.seal().unwrap();
        let (b, txid_b) = e.clone().seal().unwrap();
        assert_eq!(a, b);
        assert_eq!(txid_a, txid_b);
        assert!(!a.contains(&b'\n'));
        let s = String::from_utf8(a).unwrap();
        assert!(s.starts_with(r#"{"acoustic":{"arousal_raw":0.12,"#), "{s}");
        assert!(s.contains(r#""canonical_version":"1""#));
        assert!(s.contains(r#""mode":"fuzzy""#));
        assert!(
            s.contains(r#""out_sets":{"high":0.916414709468,"low":0,"mid":1}"#),
            "{s}"
        );
        assert!(!s.contains("escalation"));
    }

    #[test]
    fn stored_fields_present() {
        let bytes = reference_event().canonical_bytes().unwrap();
        let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        for key in [
            "asr_conf",
            "emotion_audio_conf",
            "emotion_text_conf",
            "weights",
            "fusion_fuzzy",
            "coherence",
            "final_distribution",
            "final_vad",
            "acoustic",
            "redaction",
            "rule_base",
            "model_size",
            "run_id",
            "event_id",
            "timestamp",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        for key in [
            "arousal_raw",
            "zcr_raw",
            "zcr_norm",
            "timbre_score",
            "mfcc_present",
            "arousal_smoothed",
            "snr_db",
        ] {
            assert!(v["acoustic"].get(key).is_some(), "missing acoustic.{key}");
        }
        assert_eq!(v["fusion_fuzzy"]["fired_rules"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn non_finite_rejected() {
        let mut e = reference_event();
        e.coherence = f64::NAN;
        assert!(matches!(e.canonical_bytes(), Err(CanonicalizationError::NonFinite(_))));
        let mut e = reference_event();
        e.acoustic.snr_db = f64::INFINITY;
        assert!(e.seal().is_err());
    }

    #[test]
    fn out_of_range_rejected() {
        let mut e = reference_event();
        e.weights.w_text = 1.5;
        assert!(matches!(e.validate(), Err(CanonicalizationError::OutOfRange { .. })));
    }

    #[test]
    fn trace_presence_follows_mode() {
        let mut e = reference_event();
        e.mode = FusionMode::LinearFallback;
        assert!(matches!(e.validate(), Err(CanonicalizationError::Inconsistent(_))));
        e.fusion_fuzzy = None;
        e.fallback_reason = Some("no output set is activated".into());
        assert!(e.validate().is_ok());
    }

    #[test]
    fn escalation_block_serialized_when_present() {
        let mut e = reference_event();
        e.escalation = Some(EscalationBlock {
            triggered: true,
            reasons: vec!["fear>0.7".into()],
            timestamp: e.timestamp.clone(),
        });
        let s = String::from_utf8(e.canonical_bytes().unwrap()).unwrap();
        assert!(s.contains(r#""escalation":{"reasons":["fear>0.7"],"timestamp":"#));
        assert!(!s.contains("notified"));
    }
}
