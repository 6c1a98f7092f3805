//! Seeded synthetic evaluation corpus: tone-burst WAVs at a label's
//! prototype arousal with noise at a requested SNR, and lexicon-built
//! transcripts whose recognizer confidence drops as they are corrupted.

use std::io::Write;
use std::path::{Path, PathBuf};

use affex_core::audio::{PROTOTYPES, SAMPLE_RATE};
use affex_core::emotion::EmotionLabel;
use affex_core::text::{negate_emotion, TextAnalyzer};
use anyhow::Context;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub seed: u64,
    pub size: usize,
    pub snr_levels_db: Vec<f64>,
    /// Fraction of transcript words garbled or confused, per row.
    pub corruption_levels: Vec<f64>,
    pub duration_secs: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            size: 500,
            snr_levels_db: vec![5.0, 10.0, 20.0, 30.0],
            corruption_levels: vec![0.0, 0.25, 0.5, 0.75],
            duration_secs: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRow {
    pub id: String,
    pub audio: PathBuf,
    pub transcript: String,
    pub asr_confidence: f64,
    pub label: EmotionLabel,
    pub corruption: f64,
    pub target_snr_db: f64,
}

/// Same normalization the audio channel applies to RMS.
const RMS_SCALE: f64 = 0.2 * 0.92;
const BURST_MS: usize = 200;
const GAP_MS: usize = 100;
const RAMP_MS: usize = 10;
const NEGATION_RATE: f64 = 0.25;

const FILLERS: [&str; 20] = [
    "hoy", "la", "verdad", "que", "me", "siento", "estoy", "con", "esto", "todo", "el", "trabajo", "casa", "de", "en",
    "mi", "una", "vez", "semana", "porque",
];

fn pitch(label: EmotionLabel) -> f64 {
    match label {
        EmotionLabel::Joy => 330.0,
        EmotionLabel::Sadness => 160.0,
        EmotionLabel::Anger => 280.0,
        EmotionLabel::Fear => 420.0,
        EmotionLabel::Disgust => 200.0,
        EmotionLabel::Neutral => 190.0,
    }
}

pub fn prototype_arousal(label: EmotionLabel) -> f64 {
    PROTOTYPES.iter().find(|p| p.0 == label).map_or(0.3, |p| p.2)
}

/// Tone bursts (fundamental plus half-amplitude second harmonic) whose
/// overall RMS targets `arousal`, plus white noise set so that mean power
/// over noise power equals `snr_db`.
pub fn synthesize_audio(label: EmotionLabel, arousal: f64, snr_db: f64, seconds: f64, rng: &mut impl Rng) -> Vec<f32> {
    let fs = SAMPLE_RATE as f64;
    let n = (seconds * fs) as usize;
    let f0 = pitch(label) * rng.gen_range(0.9..1.1);
    let zcr_norm = (10.0 * 2.0 * f0 / fs).min(1.0);
    // undo the ZCR and timbre terms of the arousal heuristic approximately
    let rms_norm = ((arousal - 0.02) / (0.9 + 0.1 * zcr_norm)).clamp(0.01, 1.0);
    let total_power = (rms_norm * RMS_SCALE).powi(2);
    let noise_power = total_power / 10f64.powf(snr_db / 10.0);
    let duty = BURST_MS as f64 / (BURST_MS + GAP_MS) as f64;
    let burst_power = (total_power - noise_power).max(0.0) / duty;
    let amplitude = (2.0 * burst_power / 1.25).sqrt();

    let period = (BURST_MS + GAP_MS) * SAMPLE_RATE as usize / 1000;
    let burst = BURST_MS * SAMPLE_RATE as usize / 1000;
    let ramp = RAMP_MS * SAMPLE_RATE as usize / 1000;
    let noise = Normal::new(0.0, noise_power.sqrt()).expect("finite noise level");
    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    (0..n)
        .map(|i| {
            let pos = i % period;
            let envelope = if pos >= burst {
                0.0
            } else if pos < ramp {
                0.5 - 0.5 * (std::f64::consts::PI * pos as f64 / ramp as f64).cos()
            } else if pos >= burst - ramp {
                0.5 - 0.5 * (std::f64::consts::PI * (burst - pos) as f64 / ramp as f64).cos()
            } else {
                1.0
            };
            let t = i as f64 / fs;
            let w = std::f64::consts::TAU * f0 * t + phase;
            let tone = amplitude * envelope * (w.sin() + 0.5 * (2.0 * w).sin());
            (tone + noise.sample(rng)).clamp(-1.0, 1.0) as f32
        })
        .collect()
}

fn garble(analyzer: &TextAnalyzer, rng: &mut impl Rng) -> String {
    const CONSONANTS: &[u8] = b"bcdfgjklmnprstvz";
    const VOWELS: &[u8] = b"aeiou";
    loop {
        let len = rng.gen_range(2..=3);
        let word: String = (0..len)
            .flat_map(|_| {
                [
                    CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char,
                    VOWELS[rng.gen_range(0..VOWELS.len())] as char,
                ]
            })
            .collect();
        if analyzer.lexicon.get(analyzer.lemmas.lemma(&word)).is_none() && !is_marker(analyzer, &word) {
            return word;
        }
    }
}

fn is_marker(analyzer: &TextAnalyzer, word: &str) -> bool {
    analyzer.negation_markers.iter().any(|m| m == word)
        || affex_core::text::DEFAULT_INTENSIFIERS
            .iter()
            .any(|(p, _)| p.split(' ').any(|w| w == word))
}

fn label_words(analyzer: &TextAnalyzer, label: EmotionLabel) -> Vec<String> {
    analyzer
        .lexicon
        .entries()
        .into_iter()
        .filter(|e| e.emotion == label && !is_marker(analyzer, &e.lemma))
        .map(|e| e.lemma.clone())
        .collect()
}

/// A lexicon word whose negation reads as `label`, if any exists.
fn negated_cue(analyzer: &TextAnalyzer, label: EmotionLabel, rng: &mut impl Rng) -> Option<String> {
    let sources: Vec<EmotionLabel> = EmotionLabel::ALL
        .into_iter()
        .filter(|&l| l != label && l != EmotionLabel::Neutral && negate_emotion(l) == label)
        .collect();
    let words: Vec<String> = sources.into_iter().flat_map(|l| label_words(analyzer, l)).collect();
    words.choose(rng).cloned()
}

/// Two or three label words among fillers, an optional intensifier, an
/// optional negated opposite ("no feliz" for sadness), then
/// per-word corruption: a garbled token or, a quarter of the time, a word
/// of another label.
pub fn compose_transcript(analyzer: &TextAnalyzer, label: EmotionLabel, corruption: f64, rng: &mut impl Rng) -> String {
    let own = label_words(analyzer, label);
    let others: Vec<String> = EmotionLabel::ALL
        .iter()
        .filter(|&&l| l != label && l != EmotionLabel::Neutral)
        .flat_map(|&l| label_words(analyzer, l))
        .collect();
    let fillers: Vec<&str> = FILLERS
        .iter()
        .copied()
        .filter(|w| analyzer.lexicon.get(analyzer.lemmas.lemma(w)).is_none() && !is_marker(analyzer, w))
        .collect();

    let mut words: Vec<String> = Vec::new();
    let n_label = rng.gen_range(2..=3);
    for k in 0..n_label {
        for _ in 0..rng.gen_range(1..=2) {
            words.push(fillers.choose(rng).expect("fillers").to_string());
        }
        if k == 0 && label != EmotionLabel::Neutral && rng.gen_bool(0.3) {
            words.push("muy".into());
        }
        // a negated opposite as the last cue, so its scope covers no other cue
        let negated = if k + 1 == n_label && rng.gen_bool(NEGATION_RATE) {
            negated_cue(analyzer, label, rng)
        } else {
            None
        };
        match negated {
            Some(word) => {
                words.push("no".into());
                words.push(word);
            }
            None => words.push(own.choose(rng).expect("every label has lexicon words").clone()),
        }
    }
    words.push(fillers.choose(rng).expect("fillers").to_string());

    let mut out = Vec::with_capacity(words.len());
    for w in words {
        if rng.gen_bool(corruption.clamp(0.0, 1.0)) {
            if rng.gen_bool(0.25) {
                out.push(others.choose(rng).expect("other labels").clone());
            } else {
                out.push(garble(analyzer, rng));
            }
        } else {
            out.push(w);
        }
    }
    out.join(" ")
}

pub fn asr_confidence_for(corruption: f64, rng: &mut impl Rng) -> f64 {
    let jitter = Normal::new(0.0, 0.04).expect("valid");
    (0.97 - 0.75 * corruption + jitter.sample(rng)).clamp(0.05, 1.0)
}

fn write_wav(path: &Path, samples: &[f32]) -> anyhow::Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).with_context(|| format!("creating {}", path.display()))?;
    for &s in samples {
        w.write_sample((s * 32767.0).round() as i16)?;
    }
    w.finalize()?;
    Ok(())
}

/// Writes `wav/<id>.wav` files and `manifest.jsonl` under `out_dir`.
/// Identical specs produce byte-identical output.
pub fn generate_corpus(spec: &CorpusSpec, analyzer: &TextAnalyzer, out_dir: &Path) -> anyhow::Result<Vec<CorpusRow>> {
    anyhow::ensure!(spec.size >= 1, "corpus size must be at least 1");
    anyhow::ensure!(!spec.snr_levels_db.is_empty(), "at least one SNR level is required");
    anyhow::ensure!(
        !spec.corruption_levels.is_empty(),
        "at least one corruption level is required"
    );
    let wav_dir = out_dir.join("wav");
    std::fs::create_dir_all(&wav_dir).with_context(|| format!("creating {}", wav_dir.display()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let jitter = Normal::new(0.0, 0.04).expect("valid");

    let mut rows = Vec::with_capacity(spec.size);
    for i in 0..spec.size {
        let label = EmotionLabel::ALL[i % EmotionLabel::COUNT];
        let snr = *spec.snr_levels_db.choose(&mut rng).expect("non-empty");
        let corruption = *spec.corruption_levels.choose(&mut rng).expect("non-empty");
        let arousal = (prototype_arousal(label) + jitter.sample(&mut rng)).clamp(0.05, 0.95);
        let samples = synthesize_audio(label, arousal, snr, spec.duration_secs, &mut rng);
        let transcript = compose_transcript(analyzer, label, corruption, &mut rng);
        let asr_confidence = asr_confidence_for(corruption, &mut rng);

        let id = format!("syn-{i:05}");
        let rel = PathBuf::from("wav").join(format!("{id}.wav"));
        write_wav(&out_dir.join(&rel), &samples)?;
        rows.push(CorpusRow {
            id,
            audio: rel,
            transcript,
            asr_confidence,
            label,
            corruption,
            target_snr_db: snr,
        });
    }

    let manifest = out_dir.join("manifest.jsonl");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&manifest)?);
    for row in &rows {
        serde_json::to_writer(&mut f, row)?;
        f.write_all(b"\n")?;
    }
    f.flush()?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use affex_core::audio::{
        compute_snr_db, derive_audio_vad, extract_acoustic_features, ArousalSmoother, AudioBuffer,
    };

    #[test]
    fn transcripts_decode_when_clean() {
        let analyzer = TextAnalyzer::seed();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut negated = 0;
        for label in EmotionLabel::ALL {
            for _ in 0..20 {
                let t = compose_transcript(&analyzer, label, 0.0, &mut rng);
                negated += usize::from(t.split(' ').any(|w| w == "no"));
                let (result, _) = affex_core::text::text_emotion(&analyzer, &t);
                assert_eq!(result.dominant().0, label, "{t}");
            }
        }
        assert!(negated > 0);
    }

    #[test]
    fn confidence_falls_with_corruption() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mean = |c: f64, rng: &mut ChaCha8Rng| (0..200).map(|_| asr_confidence_for(c, rng)).sum::<f64>() / 200.0;
        let clean = mean(0.0, &mut rng);
        let noisy = mean(0.75, &mut rng);
        assert!(clean > 0.9 && noisy < 0.5, "{clean} {noisy}");
    }

    #[test]
    fn measured_snr_tracks_request() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for label in EmotionLabel::ALL {
            for snr in [5.0, 10.0, 20.0, 30.0] {
                let s = synthesize_audio(label, prototype_arousal(label), snr, 1.5, &mut rng);
                let measured = compute_snr_db(&s, 512);
                assert!((measured - snr).abs() <= 3.0, "{label} {snr}: {measured}");
            }
        }
    }

    #[test]
    fn arousal_tracks_prototype() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for label in EmotionLabel::ALL {
            let target = prototype_arousal(label);
            let s = synthesize_audio(label, target, 30.0, 1.5, &mut rng);
            let buffer = AudioBuffer::new(s, SAMPLE_RATE).unwrap();
            let mut features = extract_acoustic_features(&buffer, 0.2, false, 512);
            let a = derive_audio_vad(&mut features, &mut ArousalSmoother::new(1.0), 0.0).arousal;
            assert!((a - target).abs() < 0.1, "{label}: {a} vs {target}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let analyzer = TextAnalyzer::seed();
        let spec = CorpusSpec {
            size: 12,
            ..CorpusSpec::default()
        };
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate_corpus(&spec, &analyzer, a.path()).unwrap();
        generate_corpus(&spec, &analyzer, b.path()).unwrap();
        let ma = std::fs::read(a.path().join("manifest.jsonl")).unwrap();
        assert_eq!(ma, std::fs::read(b.path().join("manifest.jsonl")).unwrap());
        assert_eq!(
            std::fs::read(a.path().join("wav/syn-00007.wav")).unwrap(),
            std::fs::read(b.path().join("wav/syn-00007.wav")).unwrap()
        );
        assert_eq!(String::from_utf8(ma).unwrap().lines().count(), 12);
    }
}
