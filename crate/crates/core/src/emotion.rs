//! Emotion ontology shared by every backend.
//!
//! Six discrete labels with a fixed canonical order, probability
//! distributions over them, the continuous valence/arousal/dominance
//! state, and [`EmotionResult`], the contract every modality backend
//! returns to the fusion stage.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmotionError {
    #[error("score for {label} must be a finite non-negative number, got {value}")]
    InvalidScore { label: EmotionLabel, value: f64 },

    #[error("unknown emotion label '{0}'")]
    UnknownLabel(String),
}

/// Canonical emotion labels. Declaration order is the canonical order and
/// is used for tie-breaking everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EmotionLabel {
    Joy,
    Sadness,
    Anger,
    Fear,
    Disgust,
    Neutral,
}

impl EmotionLabel {
    pub const COUNT: usize = 6;

    pub const ALL: [EmotionLabel; 6] = [
        EmotionLabel::Joy,
        EmotionLabel::Sadness,
        EmotionLabel::Anger,
        EmotionLabel::Fear,
        EmotionLabel::Disgust,
        EmotionLabel::Neutral,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EmotionLabel::Joy => "joy",
            EmotionLabel::Sadness => "sadness",
            EmotionLabel::Anger => "anger",
            EmotionLabel::Fear => "fear",
            EmotionLabel::Disgust => "disgust",
            EmotionLabel::Neutral => "neutral",
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmotionLabel {
    type Err = EmotionError;

    /// Accepts the English canonical names and the Spanish aliases.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let label = match s.trim().to_lowercase().as_str() {
            "joy" | "alegría" | "alegria" => EmotionLabel::Joy,
            "sadness" | "tristeza" => EmotionLabel::Sadness,
            "anger" | "ira" => EmotionLabel::Anger,
            "fear" | "miedo" => EmotionLabel::Fear,
            "disgust" | "asco" => EmotionLabel::Disgust,
            "neutral" => EmotionLabel::Neutral,
            _ => return Err(EmotionError::UnknownLabel(s.to_string())),
        };
        Ok(label)
    }
}

impl Serialize for EmotionLabel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EmotionLabel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

/// A probability distribution over the six canonical labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmotionDistribution([f64; EmotionLabel::COUNT]);

impl EmotionDistribution {
    pub fn one_hot(label: EmotionLabel) -> Self {
        let mut probs = [0.0; EmotionLabel::COUNT];
        probs[label.index()] = 1.0;
        Self(probs)
    }

    pub fn neutral() -> Self {
        Self::one_hot(EmotionLabel::Neutral)
    }

    /// Normalizes non-negative evidence scores into a distribution.
    ///
    /// All-zero evidence yields one-hot neutral. Scores are rescaled by their
    /// maximum before summing so mixes of extreme magnitudes cannot overflow.
    pub fn normalize(raw: [f64; EmotionLabel::COUNT]) -> Result<Self, EmotionError> {
        for (label, &value) in EmotionLabel::ALL.iter().zip(raw.iter()) {
            if !value.is_finite() || value < 0.0 {
                return Err(EmotionError::InvalidScore { label: *label, value });
            }
        }
        let max = raw.iter().copied().fold(0.0_f64, f64::max);
        if max == 0.0 {
            return Ok(Self::neutral());
        }
        let scaled = raw.map(|v| v / max);
        let total: f64 = scaled.iter().sum();
        Ok(Self(scaled.map(|v| v / total)))
    }

    /// Builds a distribution from a sparse label→score map.
    pub fn from_scores<'a, I>(scores: I) -> Result<Self, EmotionError>
    where
        I: IntoIterator<Item = (&'a EmotionLabel, &'a f64)>,
    {
        let mut raw = [0.0; EmotionLabel::COUNT];
        for (label, value) in scores {
            raw[label.index()] += *value;
        }
        Self::normalize(raw)
    }

    pub fn get(&self, label: EmotionLabel) -> f64 {
        self.0[label.index()]
    }

    pub fn as_array(&self) -> &[f64; EmotionLabel::COUNT] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = (EmotionLabel, f64)> + '_ {
        EmotionLabel::ALL.iter().map(move |l| (*l, self.0[l.index()]))
    }

    /// Label with the highest probability; ties resolve to the label that
    /// comes first in canonical order.
    pub fn dominant(&self) -> (EmotionLabel, f64) {
        let mut best = (EmotionLabel::Joy, self.0[0]);
        for (label, p) in self.iter().skip(1) {
            if p > best.1 {
                best = (label, p);
            }
        }
        best
    }

    /// Wraps probabilities that are already normalized up to rounding drift,
    /// renormalizing to absorb it.
    pub(crate) fn from_probabilities(probs: [f64; EmotionLabel::COUNT]) -> Self {
        let total: f64 = probs.iter().sum();
        if total > 0.0 && (total - 1.0).abs() > f64::EPSILON {
            Self(probs.map(|p| (p / total).clamp(0.0, 1.0)))
        } else {
            Self(probs.map(|p| p.clamp(0.0, 1.0)))
        }
    }
}

/// Free-function form of [`EmotionDistribution::normalize`].
pub fn normalize_distribution(raw: [f64; EmotionLabel::COUNT]) -> Result<EmotionDistribution, EmotionError> {
    EmotionDistribution::normalize(raw)
}

pub fn dominant_emotion(dist: &EmotionDistribution) -> (EmotionLabel, f64) {
    dist.dominant()
}

impl Serialize for EmotionDistribution {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let map: BTreeMap<&str, f64> = self.iter().map(|(l, p)| (l.as_str(), p)).collect();
        map.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for EmotionDistribution {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let map = BTreeMap::<EmotionLabel, f64>::deserialize(deserializer)?;
        let mut raw = [0.0; EmotionLabel::COUNT];
        for (label, p) in map {
            raw[label.index()] = p;
        }
        EmotionDistribution::normalize(raw).map_err(serde::de::Error::custom)
    }
}

/// Valence in [-1, 1]; arousal and dominance in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VadState {
    pub valence: f64,
    pub arousal: f64,
    pub dominance: f64,
}

impl VadState {
    /// Clamps every component into its interval. NaN components collapse to
    /// the interval's neutral point.
    pub fn new(valence: f64, arousal: f64, dominance: f64) -> Self {
        fn clamp_or(v: f64, lo: f64, hi: f64, fallback: f64) -> f64 {
            if v.is_nan() {
                fallback
            } else {
                v.clamp(lo, hi)
            }
        }
        Self {
            valence: clamp_or(valence, -1.0, 1.0, 0.0),
            arousal: clamp_or(arousal, 0.0, 1.0, 0.0),
            dominance: clamp_or(dominance, 0.0, 1.0, 0.5),
        }
    }
}

impl Default for VadState {
    fn default() -> Self {
        Self::new(0.0, 0.0, 0.5)
    }
}

/// Scalar metadata value carried alongside a backend result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetaValue {
    Bool(bool),
    Int(i64),
    Num(f64),
    Text(String),
}

impl From<bool> for MetaValue {
    fn from(v: bool) -> Self {
        MetaValue::Bool(v)
    }
}

impl From<f64> for MetaValue {
    fn from(v: f64) -> Self {
        MetaValue::Num(v)
    }
}

impl From<i64> for MetaValue {
    fn from(v: i64) -> Self {
        MetaValue::Int(v)
    }
}

impl From<usize> for MetaValue {
    fn from(v: usize) -> Self {
        MetaValue::Int(v as i64)
    }
}

impl From<&str> for MetaValue {
    fn from(v: &str) -> Self {
        MetaValue::Text(v.to_string())
    }
}

impl From<String> for MetaValue {
    fn from(v: String) -> Self {
        MetaValue::Text(v)
    }
}

/// Output of one modality backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionResult {
    pub distribution: EmotionDistribution,
    pub vad: VadState,
    pub confidence: f64,
    pub metadata: BTreeMap<String, MetaValue>,
}

impl EmotionResult {
    pub fn new(distribution: EmotionDistribution, vad: VadState, confidence: f64) -> Self {
        Self {
            distribution,
            vad,
            confidence: if confidence.is_nan() {
                0.0
            } else {
                confidence.clamp(0.0, 1.0)
            },
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<MetaValue>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }

    pub fn dominant(&self) -> (EmotionLabel, f64) {
        self.distribution.dominant()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scores(pairs: &[(EmotionLabel, f64)]) -> [f64; 6] {
        let mut raw = [0.0; 6];
        for (l, v) in pairs {
            raw[l.index()] = *v;
        }
        raw
    }

    #[test]
    fn normalize_symmetric_pair() {
        let d = normalize_distribution(scores(&[(EmotionLabel::Joy, 2.0), (EmotionLabel::Sadness, 2.0)])).unwrap();
        assert_eq!(d.get(EmotionLabel::Joy), 0.5);
        assert_eq!(d.get(EmotionLabel::Sadness), 0.5);
        assert_eq!(d.get(EmotionLabel::Neutral), 0.0);
    }

    #[test]
    fn normalize_all_zero_is_neutral() {
        let d = normalize_distribution([0.0; 6]).unwrap();
        assert_eq!(d, EmotionDistribution::neutral());
    }

    #[test]
    fn normalize_one_three() {
        let d = normalize_distribution(scores(&[(EmotionLabel::Joy, 1.0), (EmotionLabel::Anger, 3.0)])).unwrap();
        assert!((d.get(EmotionLabel::Joy) - 0.25).abs() < 1e-15);
        assert!((d.get(EmotionLabel::Anger) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn normalize_rejects_negative_and_nan() {
        let err = normalize_distribution(scores(&[(EmotionLabel::Fear, -0.1)])).unwrap_err();
        assert!(matches!(
            err,
            EmotionError::InvalidScore {
                label: EmotionLabel::Fear,
                ..
            }
        ));
        assert!(normalize_distribution(scores(&[(EmotionLabel::Joy, f64::NAN)])).is_err());
    }

    #[test]
    fn dominant_cases() {
        assert_eq!(EmotionDistribution::neutral().dominant(), (EmotionLabel::Neutral, 1.0));
        let tie = normalize_distribution(scores(&[(EmotionLabel::Joy, 0.5), (EmotionLabel::Sadness, 0.5)])).unwrap();
        assert_eq!(tie.dominant(), (EmotionLabel::Joy, 0.5));
        let d = normalize_distribution(scores(&[
            (EmotionLabel::Anger, 0.4),
            (EmotionLabel::Fear, 0.35),
            (EmotionLabel::Neutral, 0.25),
        ]))
        .unwrap();
        let (label, p) = dominant_emotion(&d);
        assert_eq!(label, EmotionLabel::Anger);
        assert!((p - 0.4).abs() < 1e-12);
    }

    #[test]
    fn spanish_aliases() {
        for (alias, label) in [
            ("alegría", EmotionLabel::Joy),
            ("tristeza", EmotionLabel::Sadness),
            ("ira", EmotionLabel::Anger),
            ("miedo", EmotionLabel::Fear),
            ("asco", EmotionLabel::Disgust),
            ("Neutral", EmotionLabel::Neutral),
        ] {
            assert_eq!(alias.parse::<EmotionLabel>().unwrap(), label);
        }
        assert!("sorpresa".parse::<EmotionLabel>().is_err());
    }

    #[test]
    fn vad_is_clamped() {
        let v = VadState::new(-3.0, 1.5, -0.2);
        assert_eq!(
            v,
            VadState {
                valence: -1.0,
                arousal: 1.0,
                dominance: 0.0
            }
        );
    }

    #[test]
    fn distribution_serde_uses_label_keys() {
        let d = EmotionDistribution::one_hot(EmotionLabel::Fear);
        let json = serde_json::to_string(&d).unwrap();
        assert!(json.contains("\"fear\":1.0"));
        let back: EmotionDistribution = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
    }

    fn magnitude() -> impl Strategy<Value = f64> {
        prop_oneof![Just(0.0), 1e-300..1e-290f64, 0.0..10.0f64, 1e290..1e300f64,]
    }

    proptest! {
        #[test]
        fn normalized_sums_to_one(raw in prop::array::uniform6(magnitude())) {
            let d = normalize_distribution(raw).unwrap();
            let total: f64 = d.as_array().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            prop_assert!(d.as_array().iter().all(|p| (0.0..=1.0).contains(p)));
        }

        #[test]
        fn argmax_invariant_under_scaling(raw in prop::array::uniform6(0.0..5.0f64), s in 1e-3..1e3f64) {
            let a = normalize_distribution(raw).unwrap().dominant().0;
            let b = normalize_distribution(raw.map(|v| v * s)).unwrap().dominant().0;
            prop_assert_eq!(a, b);
        }
    }
}
