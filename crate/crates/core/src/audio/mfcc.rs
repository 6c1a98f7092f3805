//! MFCC front end used only to derive the bounded `timbre_score`.
//!
//! 25 ms Hamming frames with a 10 ms hop, 512-point FFT, 26 triangular mel
//! filters spanning 0 Hz to Nyquist, natural-log filter energies and an
//! orthonormal DCT-II keeping 13 coefficients.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

pub const NUM_COEFFS: usize = 13;
pub const NUM_FILTERS: usize = 26;
const FFT_SIZE: usize = 512;
const LOG_FLOOR: f64 = 1e-10;

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular mel filters over the `FFT_SIZE / 2 + 1` power bins.
fn mel_filterbank(sample_rate: u32) -> Vec<Vec<f64>> {
    let bins = FFT_SIZE / 2 + 1;
    let nyquist = f64::from(sample_rate) / 2.0;
    let mel_max = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..NUM_FILTERS + 2)
        .map(|i| mel_to_hz(mel_max * i as f64 / (NUM_FILTERS + 1) as f64))
        .collect();
    let bin_hz = |k: usize| k as f64 * f64::from(sample_rate) / FFT_SIZE as f64;
    (0..NUM_FILTERS)
        .map(|m| {
            let (lo, mid, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..bins)
                .map(|k| {
                    let f = bin_hz(k);
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= mid {
                        (f - lo) / (mid - lo)
                    } else {
                        (hi - f) / (hi - mid)
                    }
                })
                .collect()
        })
        .collect()
}

fn dct_matrix() -> Vec<Vec<f64>> {
    let n = NUM_FILTERS as f64;
    (0..NUM_COEFFS)
        .map(|k| {
            let scale = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
            (0..NUM_FILTERS)
                .map(|i| scale * (PI * k as f64 * (i as f64 + 0.5) / n).cos())
                .collect()
        })
        .collect()
}

/// Per-frame MFCC vectors, or `None` when the signal is shorter than one
/// frame or carries no energy at all.
pub fn mfcc_frames(samples: &[f32], sample_rate: u32) -> Option<Vec<[f64; NUM_COEFFS]>> {
    let frame_len = (sample_rate as usize * 25) / 1000;
    let hop = (sample_rate as usize * 10) / 1000;
    if frame_len == 0 || hop == 0 || samples.len() < frame_len || frame_len > FFT_SIZE {
        return None;
    }
    if samples.iter().all(|&s| s == 0.0) {
        return None;
    }

    let window: Vec<f64> = (0..frame_len)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / (frame_len - 1) as f64).cos())
        .collect();
    let filters = mel_filterbank(sample_rate);
    let dct = dct_matrix();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(FFT_SIZE);
    let mut spectrum = vec![Complex::new(0.0, 0.0); FFT_SIZE];
    let mut log_energies = [0.0_f64; NUM_FILTERS];

    let n_frames = 1 + (samples.len() - frame_len) / hop;
    let mut frames = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let frame = &samples[f * hop..f * hop + frame_len];
        for (slot, (s, w)) in spectrum.iter_mut().zip(frame.iter().zip(&window)) {
            *slot = Complex::new(f64::from(*s) * w, 0.0);
        }
        for slot in spectrum.iter_mut().skip(frame_len) {
            *slot = Complex::new(0.0, 0.0);
        }
        fft.process(&mut spectrum);
        let power: Vec<f64> = spectrum[..FFT_SIZE / 2 + 1]
            .iter()
            .map(|c| c.norm_sqr() / FFT_SIZE as f64)
            .collect();
        for (e, filter) in log_energies.iter_mut().zip(&filters) {
            let energy: f64 = filter.iter().zip(&power).map(|(w, p)| w * p).sum();
            *e = energy.max(LOG_FLOOR).ln();
        }
        let mut coeffs = [0.0; NUM_COEFFS];
        for (c, row) in coeffs.iter_mut().zip(&dct) {
            *c = row.iter().zip(&log_energies).map(|(a, b)| a * b).sum();
        }
        frames.push(coeffs);
    }
    Some(frames)
}

/// Mean absolute value of coefficients 2..=13 over all frames, mapped
/// through `min(1, v / 20)`.
pub fn timbre_score(samples: &[f32], sample_rate: u32) -> Option<f64> {
    let frames = mfcc_frames(samples, sample_rate)?;
    let total: f64 = frames.iter().map(|c| c[1..].iter().map(|v| v.abs()).sum::<f64>()).sum();
    let mean = total / (frames.len() * (NUM_COEFFS - 1)) as f64;
    Some((mean / 20.0).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_scale_round_trip() {
        for hz in [0.0, 100.0, 1000.0, 8000.0] {
            assert!((mel_to_hz(hz_to_mel(hz)) - hz).abs() < 1e-6);
        }
    }

    #[test]
    fn dct_rows_are_orthonormal() {
        let d = dct_matrix();
        for i in 0..NUM_COEFFS {
            for j in 0..NUM_COEFFS {
                let dot: f64 = d[i].iter().zip(&d[j]).map(|(a, b)| a * b).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn too_short_or_silent_has_no_timbre() {
        assert_eq!(timbre_score(&[0.1; 399], 16_000), None);
        assert_eq!(timbre_score(&[0.0; 16_000], 16_000), None);
    }

    #[test]
    fn timbre_is_bounded() {
        let tone: Vec<f32> = (0..16_000)
            .map(|i| (0.3 * (2.0 * PI * 220.0 * i as f64 / 16_000.0).sin()) as f32)
            .collect();
        let t = timbre_score(&tone, 16_000).unwrap();
        assert!((0.0..=1.0).contains(&t));
        let frames = mfcc_frames(&tone, 16_000).unwrap();
        assert_eq!(frames.len(), 1 + (16_000 - 400) / 160);
    }
}
