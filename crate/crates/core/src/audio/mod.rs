//! Heuristic prosodic affect from 16 kHz mono audio.
//!
//! Energy (RMS) drives arousal with zero-crossing rate as a fine 0.9/0.1
//! adjustment; an optional MFCC-derived timbre score nudges valence and
//! arousal; arousal is EMA-smoothed across turns of a session.

mod features;
pub mod mfcc;
pub mod wav;

pub use wav::read_wav;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emotion::{EmotionDistribution, EmotionLabel, EmotionResult, VadState};

pub use features::{
    compute_snr_db, extract_acoustic_features, rms, zero_crossing_rate, zero_crossings, AcousticFeatures,
};

pub const SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("audio buffer is empty")]
    EmptyAudio,

    #[error("sample {index} = {value} is outside [-1, 1]")]
    SampleOutOfRange { index: usize, value: f32 },

    #[error("sample rate must be {SAMPLE_RATE} Hz after ingest, got {0}")]
    SampleRate(u32),

    #[error("cannot read WAV {path}: {message}")]
    Wav { path: String, message: String },
}

/// Mono samples in [-1, 1] at 16 kHz.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self, AudioError> {
        if samples.is_empty() {
            return Err(AudioError::EmptyAudio);
        }
        if sample_rate != SAMPLE_RATE {
            return Err(AudioError::SampleRate(sample_rate));
        }
        if let Some((index, &value)) = samples.iter().enumerate().find(|(_, s)| !(-1.0..=1.0).contains(*s)) {
            return Err(AudioError::SampleOutOfRange { index, value });
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AudioConfig {
    pub alpha_ema: f64,
    pub norm_factor: f64,
    pub use_mfcc: bool,
    pub snr_block_size: usize,
    /// Valence of the audio channel before the timbre adjustment.
    pub base_valence: f64,
    pub prototype_temperature: f64,
}

impl Default for AudioConfig {
    fn default() -> Self {
        Self {
            alpha_ema: 0.3,
            norm_factor: 0.2,
            use_mfcc: true,
            snr_block_size: 512,
            base_valence: 0.0,
            prototype_temperature: 0.15,
        }
    }
}

/// Turn-to-turn exponential moving average of arousal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArousalSmoother {
    alpha: f64,
    previous: Option<f64>,
}

impl ArousalSmoother {
    /// `alpha` is clamped into (0, 1]; non-positive values become 1.
    pub fn new(alpha: f64) -> Self {
        let alpha = if alpha > 0.0 && alpha <= 1.0 { alpha } else { 1.0 };
        Self { alpha, previous: None }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn previous(&self) -> Option<f64> {
        self.previous
    }

    pub fn with_previous(mut self, previous: f64) -> Self {
        self.previous = Some(previous.clamp(0.0, 1.0));
        self
    }

    pub fn update(&mut self, current: f64) -> f64 {
        let smoothed = match self.previous {
            None => current,
            Some(prev) => self.alpha * current + (1.0 - self.alpha) * prev,
        };
        let smoothed = smoothed.clamp(0.0, 1.0);
        self.previous = Some(smoothed);
        smoothed
    }
}

/// Combines features into arousal/valence, updates the smoother, and writes
/// `arousal_raw` / `arousal_smoothed` back into `features`.
pub fn derive_audio_vad(
    features: &mut AcousticFeatures,
    smoother: &mut ArousalSmoother,
    base_valence: f64,
) -> VadState {
    let mut arousal = (features.rms_norm * (0.9 + 0.1 * features.zcr_norm)).min(1.0);
    let mut valence = base_valence.clamp(-1.0, 1.0);
    if features.mfcc_present {
        valence = (valence + (features.timbre_score - 0.5) * 0.2).clamp(-1.0, 1.0);
        arousal = (arousal + features.timbre_score * 0.05).min(1.0);
    }
    features.arousal_raw = arousal;
    features.arousal_smoothed = smoother.update(arousal);
    VadState::new(valence, features.arousal_smoothed, 0.5)
}

/// Circumplex placement (valence, arousal) of each label.
pub const PROTOTYPES: [(EmotionLabel, f64, f64); 6] = [
    (EmotionLabel::Joy, 0.8, 0.7),
    (EmotionLabel::Sadness, -0.7, 0.25),
    (EmotionLabel::Anger, -0.7, 0.8),
    (EmotionLabel::Fear, -0.6, 0.7),
    (EmotionLabel::Disgust, -0.6, 0.45),
    (EmotionLabel::Neutral, 0.0, 0.3),
];

/// Softmax over negative squared distances to the label prototypes.
pub fn vad_to_distribution(vad: &VadState, temperature: f64) -> EmotionDistribution {
    let temperature = if temperature > 0.0 { temperature } else { 0.15 };
    let d2: Vec<f64> = PROTOTYPES
        .iter()
        .map(|(_, v, a)| (vad.valence - v).powi(2) + (vad.arousal - a).powi(2))
        .collect();
    let nearest = d2.iter().copied().fold(f64::INFINITY, f64::min);
    let mut raw = [0.0; EmotionLabel::COUNT];
    for ((label, _, _), d) in PROTOTYPES.iter().zip(&d2) {
        // shifting by the nearest distance keeps the largest weight at 1
        raw[label.index()] = (-(d - nearest) / temperature).exp();
    }
    EmotionDistribution::normalize(raw).unwrap_or_else(|_| EmotionDistribution::neutral())
}

/// Full audio backend for one turn.
pub fn audio_emotion(
    buffer: &AudioBuffer,
    smoother: &mut ArousalSmoother,
    config: &AudioConfig,
) -> (EmotionResult, AcousticFeatures) {
    let mut features = extract_acoustic_features(buffer, config.norm_factor, config.use_mfcc, config.snr_block_size);
    let vad = derive_audio_vad(&mut features, smoother, config.base_valence);
    let distribution = vad_to_distribution(&vad, config.prototype_temperature);
    let confidence = 0.5 + 0.5 * (features.snr_db / 30.0).min(1.0);
    let result = EmotionResult::new(distribution, vad, confidence)
        .with_meta("rms", features.rms)
        .with_meta("rms_norm", features.rms_norm)
        .with_meta("zcr_raw", features.zcr_raw)
        .with_meta("zcr_norm", features.zcr_norm)
        .with_meta("timbre_score", features.timbre_score)
        .with_meta("mfcc_present", features.mfcc_present)
        .with_meta("snr_db", features.snr_db)
        .with_meta("arousal_raw", features.arousal_raw)
        .with_meta("arousal_smoothed", features.arousal_smoothed)
        .with_meta("dominance", vad.dominance);
    (result, features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn features(rms_norm: f64, zcr_norm: f64, timbre: Option<f64>) -> AcousticFeatures {
        AcousticFeatures {
            rms: 0.0,
            rms_norm,
            zcr_raw: zcr_norm / 10.0,
            zcr_norm,
            timbre_score: timbre.unwrap_or(0.5),
            mfcc_present: timbre.is_some(),
            snr_db: 0.0,
            arousal_raw: 0.0,
            arousal_smoothed: 0.0,
        }
    }

    #[test]
    fn buffer_validation() {
        assert!(matches!(AudioBuffer::new(vec![], 16_000), Err(AudioError::EmptyAudio)));
        assert!(matches!(
            AudioBuffer::new(vec![0.1], 8_000),
            Err(AudioError::SampleRate(8_000))
        ));
        assert!(matches!(
            AudioBuffer::new(vec![0.1, 1.5], 16_000),
            Err(AudioError::SampleOutOfRange { index: 1, .. })
        ));
    }

    #[test]
    fn saturated_arousal() {
        let mut f = features(1.0, 1.0, None);
        let vad = derive_audio_vad(&mut f, &mut ArousalSmoother::new(0.3), 0.0);
        assert_eq!(vad.arousal, 1.0);
        assert_eq!(f.arousal_raw, 1.0);
    }

    #[test]
    fn neutral_timbre_leaves_valence() {
        let mut f = features(0.4, 0.2, Some(0.5));
        let vad = derive_audio_vad(&mut f, &mut ArousalSmoother::new(1.0), 0.3);
        assert_eq!(vad.valence, 0.3);
        assert!((f.arousal_raw - (0.4 * 0.92 + 0.025)).abs() < 1e-15);
    }

    #[test]
    fn ema_second_turn() {
        let mut smoother = ArousalSmoother::new(0.3).with_previous(0.0);
        let mut f = features(0.5, 0.0, None);
        let vad = derive_audio_vad(&mut f, &mut smoother, 0.0);
        assert!((f.arousal_raw - 0.45).abs() < 1e-15);
        assert!((f.arousal_smoothed - 0.135).abs() < 1e-15);
        assert_eq!(vad.arousal, f.arousal_smoothed);
        assert_eq!(vad.dominance, 0.5);
    }

    #[test]
    fn first_turn_is_unsmoothed() {
        let mut smoother = ArousalSmoother::new(0.3);
        assert_eq!(smoother.update(0.8), 0.8);
        assert!((smoother.update(0.0) - 0.56).abs() < 1e-15);
    }

    #[test]
    fn silence_is_neutral() {
        let buf = AudioBuffer::new(vec![0.0; 16_000], SAMPLE_RATE).unwrap();
        let (res, _) = audio_emotion(&buf, &mut ArousalSmoother::new(0.3), &AudioConfig::default());
        assert_eq!(res.vad, VadState::new(0.0, 0.0, 0.5));
        assert_eq!(res.dominant().0, EmotionLabel::Neutral);
        assert_eq!(res.confidence, 0.5);
        assert_eq!(res.metadata["mfcc_present"], false.into());
    }

    /// Independent re-derivation of the softmax by explicit exp/sum.
    fn oracle_probs(v: f64, a: f64) -> Vec<(EmotionLabel, f64)> {
        let w: Vec<f64> = PROTOTYPES
            .iter()
            .map(|(_, pv, pa)| (-((v - pv).powi(2) + (a - pa).powi(2)) / 0.15).exp())
            .collect();
        let z: f64 = w.iter().sum();
        PROTOTYPES.iter().zip(w).map(|((l, _, _), x)| (*l, x / z)).collect()
    }

    #[test]
    fn prototype_softmax_matches_oracle() {
        for (v, a, expected) in [
            (-0.6, 0.9, EmotionLabel::Anger),
            (0.8, 0.9, EmotionLabel::Joy),
            (0.0, 0.0, EmotionLabel::Neutral),
        ] {
            let d = vad_to_distribution(&VadState::new(v, a, 0.5), 0.15);
            assert_eq!(d.dominant().0, expected);
            for (label, p) in oracle_probs(v, a) {
                assert!((d.get(label) - p).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn features_stay_in_range(samples in prop::collection::vec(-1.0f32..=1.0, 1..4000)) {
            let buf = AudioBuffer::new(samples, SAMPLE_RATE).unwrap();
            let (_, f) = audio_emotion(&buf, &mut ArousalSmoother::new(0.3), &AudioConfig::default());
            for v in [f.rms_norm, f.zcr_norm, f.zcr_raw, f.arousal_raw, f.arousal_smoothed, f.timbre_score] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!((0.0..=80.0).contains(&f.snr_db));
        }

        #[test]
        fn arousal_monotone_in_rms(r1 in 0.0..1.0f64, r2 in 0.0..1.0f64, z in 0.0..1.0f64, t in prop::option::of(0.0..1.0f64)) {
            let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
            let mut a = features(lo, z, t);
            let mut b = features(hi, z, t);
            derive_audio_vad(&mut a, &mut ArousalSmoother::new(1.0), 0.0);
            derive_audio_vad(&mut b, &mut ArousalSmoother::new(1.0), 0.0);
            prop_assert!(a.arousal_raw <= b.arousal_raw);
        }

        #[test]
        fn ema_converges_geometrically(x in 0.0..1.0f64, start in 0.0..1.0f64, alpha in 0.01..1.0f64) {
            let mut s = ArousalSmoother::new(alpha).with_previous(start);
            let mut gap = (start - x).abs();
            for _ in 0..20 {
                let v = s.update(x);
                let next_gap = (v - x).abs();
                prop_assert!((next_gap - gap * (1.0 - alpha)).abs() < 1e-12);
                gap = next_gap;
            }
        }

        #[test]
        fn zcr_scale_invariant(samples in prop::collection::vec(-1.0f32..=1.0, 2..2000), s in 0.001f32..=1.0) {
            let scaled: Vec<f32> = samples.iter().map(|v| v * s).collect();
            // scaling can underflow tiny samples to zero, which only inherits sign
            prop_assume!(samples.iter().zip(&scaled).all(|(a, b)| (*a == 0.0) == (*b == 0.0)));
            prop_assert_eq!(zero_crossing_rate(&samples), zero_crossing_rate(&scaled));
        }
    }
}
