use serde::{Deserialize, Serialize};

use super::{mfcc, AudioBuffer};

/// Acoustic measurements of one turn. `arousal_raw` and `arousal_smoothed`
/// stay at zero until [`super::derive_audio_vad`] fills them in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcousticFeatures {
    pub rms: f64,
    pub rms_norm: f64,
    pub zcr_raw: f64,
    pub zcr_norm: f64,
    pub timbre_score: f64,
    pub mfcc_present: bool,
    pub snr_db: f64,
    pub arousal_raw: f64,
    pub arousal_smoothed: f64,
}

pub fn rms(samples: &[f32]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let sum_sq: f64 = samples.iter().map(|&s| f64::from(s) * f64::from(s)).sum();
    (sum_sq / samples.len() as f64).sqrt()
}

/// Number of adjacent sample pairs with strictly opposite sign. Zero-valued
/// samples take the sign of the last non-zero sample.
pub fn zero_crossings(samples: &[f32]) -> usize {
    let mut prev = 0_i8;
    let mut count = 0;
    for &s in samples {
        let sign = if s > 0.0 {
            1
        } else if s < 0.0 {
            -1
        } else {
            prev
        };
        if prev != 0 && sign != 0 && sign != prev {
            count += 1;
        }
        prev = sign;
    }
    count
}

pub fn zero_crossing_rate(samples: &[f32]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    zero_crossings(samples) as f64 / samples.len() as f64
}

fn mean_square(block: &[f32]) -> f64 {
    if block.is_empty() {
        return 0.0;
    }
    block.iter().map(|&s| f64::from(s) * f64::from(s)).sum::<f64>() / block.len() as f64
}

/// Block-energy SNR estimate in dB, clamped to [0, 80].
///
/// The noise floor is the nearest-rank 10th percentile of per-block mean
/// square energy. A trailing partial block shorter than half a block is
/// dropped; a longer one is zero-padded to a full block.
pub fn compute_snr_db(samples: &[f32], block_size: usize) -> f64 {
    let block_size = block_size.max(1);
    if samples.len() < block_size {
        return 0.0;
    }
    let mut energies: Vec<f64> = samples
        .chunks(block_size)
        .filter_map(|chunk| {
            if chunk.len() == block_size {
                Some(mean_square(chunk))
            } else if chunk.len() * 2 >= block_size {
                // zero padding leaves the sum unchanged, only the divisor grows
                Some(mean_square(chunk) * chunk.len() as f64 / block_size as f64)
            } else {
                None
            }
        })
        .collect();
    let mean = energies.iter().sum::<f64>() / energies.len() as f64;
    if mean <= 0.0 {
        return 0.0;
    }
    energies.sort_by(f64::total_cmp);
    let rank = ((0.10 * energies.len() as f64).ceil() as usize).max(1);
    let noise_floor = energies[rank - 1];
    let snr = 10.0 * (mean / noise_floor.max(1e-12)).log10();
    if snr.is_nan() {
        0.0
    } else {
        snr.clamp(0.0, 80.0)
    }
}

/// Extracts RMS, ZCR, SNR and (optionally) the MFCC timbre score.
pub fn extract_acoustic_features(
    buffer: &AudioBuffer,
    norm_factor: f64,
    use_mfcc: bool,
    snr_block_size: usize,
) -> AcousticFeatures {
    let samples = buffer.samples();
    let rms = rms(samples);
    let rms_norm = (rms / (norm_factor * 0.92)).min(1.0);
    let zcr_raw = zero_crossing_rate(samples);
    let zcr_norm = (10.0 * zcr_raw).min(1.0);
    let snr_db = compute_snr_db(samples, snr_block_size);
    let timbre = if use_mfcc {
        mfcc::timbre_score(samples, buffer.sample_rate())
    } else {
        None
    };
    AcousticFeatures {
        rms,
        rms_norm,
        zcr_raw,
        zcr_norm,
        timbre_score: timbre.unwrap_or(0.5),
        mfcc_present: timbre.is_some(),
        snr_db,
        arousal_raw: 0.0,
        arousal_smoothed: 0.0,
    }
}
