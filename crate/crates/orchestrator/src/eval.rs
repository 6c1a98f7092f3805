//! Batch evaluation: baselines, ablations, classification metrics and the
//! fuzzy-versus-baseline disagreement report.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use affex_core::audio::{read_wav, ArousalSmoother, AudioBuffer};
use affex_core::clock::format_timestamp;
use affex_core::emotion::EmotionLabel;
use anyhow::Context;
use serde::{Deserialize, Serialize};

use crate::pipeline::{Pipeline, WeightPolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub id: String,
    /// Relative paths resolve against the manifest's directory.
    pub audio: PathBuf,
    pub transcript: String,
    pub asr_confidence: f64,
    pub label: EmotionLabel,
}

pub fn read_manifest(path: &Path) -> anyhow::Result<Vec<ManifestRow>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row: ManifestRow =
            serde_json::from_str(line).with_context(|| format!("{} line {}", path.display(), i + 1))?;
        if !(0.0..=1.0).contains(&row.asr_confidence) {
            anyhow::bail!(
                "{} line {}: asr_confidence {} outside [0, 1]",
                path.display(),
                i + 1,
                row.asr_confidence
            );
        }
        if row.audio.is_relative() {
            row.audio = base.join(&row.audio);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        anyhow::bail!("manifest {} has no rows", path.display());
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    TextOnly,
    AudioOnly,
    Linear,
    Fuzzy,
    /// Full pipeline with the transcript removed.
    NoText,
    /// Full pipeline with silent audio.
    NoAudio,
    /// Text weight equal to the raw recognizer confidence.
    NoGating,
    /// Text weight fixed at one half.
    FixedWeight,
}

impl Variant {
    pub const BASELINES: [Variant; 4] = [Variant::TextOnly, Variant::AudioOnly, Variant::Linear, Variant::Fuzzy];
    pub const ABLATIONS: [Variant; 4] = [
        Variant::NoText,
        Variant::NoAudio,
        Variant::NoGating,
        Variant::FixedWeight,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::TextOnly => "text_only",
            Variant::AudioOnly => "audio_only",
            Variant::Linear => "linear",
            Variant::Fuzzy => "fuzzy",
            Variant::NoText => "no_text",
            Variant::NoAudio => "no_audio",
            Variant::NoGating => "no_gating",
            Variant::FixedWeight => "fixed_weight",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::BASELINES
            .iter()
            .chain(Variant::ABLATIONS.iter())
            .find(|v| v.as_str() == s)
            .copied()
            .ok_or_else(|| format!("unknown variant '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub label: EmotionLabel,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub rows: usize,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    /// Counts, gold rows by predicted columns, canonical label order.
    pub confusion: Vec<Vec<u64>>,
    /// Each gold row divided by its support; empty rows stay zero.
    pub confusion_normalized: Vec<Vec<f64>>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class and averaged metrics. Macro averages run over labels that
/// occur in gold or predictions; weighted averages use gold support.
/// Undefined ratios count as 0.
pub fn classification_report(gold: &[EmotionLabel], pred: &[EmotionLabel]) -> ClassificationReport {
    assert_eq!(gold.len(), pred.len(), "gold and predictions differ in length");
    let k = EmotionLabel::COUNT;
    let mut confusion = vec![vec![0u64; k]; k];
    for (g, p) in gold.iter().zip(pred) {
        confusion[g.index()][p.index()] += 1;
    }
    let per_class: Vec<ClassMetrics> = EmotionLabel::ALL
        .iter()
        .map(|&label| {
            let i = label.index();
            let tp = confusion[i][i];
            let support: u64 = confusion[i].iter().sum();
            let predicted: u64 = confusion.iter().map(|row| row[i]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                label,
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();

    let present: Vec<&ClassMetrics> = per_class
        .iter()
        .filter(|c| c.support > 0 || confusion.iter().any(|row| row[c.label.index()] > 0))
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| {
        if present.is_empty() {
            0.0
        } else {
            present.iter().map(|c| f(c)).sum::<f64>() / present.len() as f64
        }
    };
    let total = gold.len() as u64;
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        if total == 0 {
            0.0
        } else {
            per_class.iter().map(|c| f(c) * c.support as f64).sum::<f64>() / total as f64
        }
    };
    let correct: u64 = (0..k).map(|i| confusion[i][i]).sum();
    let confusion_normalized = confusion
        .iter()
        .map(|row| {
            let n: u64 = row.iter().sum();
            row.iter().map(|&c| ratio(c, n)).collect()
        })
        .collect();

    ClassificationReport {
        rows: gold.len(),
        accuracy: ratio(correct, total),
        macro_precision: mean(|c| c.precision),
        macro_recall: mean(|c| c.recall),
        macro_f1: mean(|c| c.f1),
        weighted_precision: weighted(|c| c.precision),
        weighted_recall: weighted(|c| c.recall),
        weighted_f1: weighted(|c| c.f1),
        per_class,
        confusion,
        confusion_normalized,
    }
}

impl ClassificationReport {
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("gold\\pred");
        for l in EmotionLabel::ALL {
            out.push(',');
            out.push_str(l.as_str());
        }
        out.push('\n');
        for (l, row) in EmotionLabel::ALL.iter().zip(&self.confusion_normalized) {
            out.push_str(l.as_str());
            for v in row {
                out.push_str(&format!(",{v:.4}"));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Disagreement {
    pub baseline: Variant,
    /// Rows where fuzzy is right and the baseline is wrong.
    pub fuzzy_corrects: u64,
    /// Rows where the baseline is right and fuzzy is wrong.
    pub fuzzy_breaks: u64,
    pub both_correct: u64,
    pub both_wrong: u64,
    pub corrected_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowPrediction {
    pub id: String,
    pub gold: EmotionLabel,
    pub predictions: BTreeMap<Variant, EmotionLabel>,
    pub w_text: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedRow {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub rows_evaluated: usize,
    pub rows_skipped: usize,
    pub skipped: Vec<SkippedRow>,
    pub variants: BTreeMap<Variant, ClassificationReport>,
    pub disagreements: Vec<Disagreement>,
    pub predictions: Vec<RowPrediction>,
}

fn predict_row(
    pipeline: &Pipeline,
    row: &ManifestRow,
    buffer: &AudioBuffer,
    variants: &[Variant],
) -> anyhow::Result<RowPrediction> {
    let alpha = pipeline.config().audio.alpha_ema;
    let timestamp = format_timestamp(chrono::DateTime::UNIX_EPOCH);
    let infer = |buf: &AudioBuffer, transcript: &str, policy| {
        pipeline.infer(
            buf,
            transcript,
            row.asr_confidence,
            &mut ArousalSmoother::new(alpha),
            policy,
            &timestamp,
        )
    };
    let mut predictions = BTreeMap::new();

    // one session per row keeps rows independent
    let full = pipeline.run_turn_buffer(buffer, &row.transcript, row.asr_confidence, &format!("row-{}", row.id))?;
    let w_text = full.inference.fused.w_text;
    let linear = infer(buffer, &row.transcript, WeightPolicy::RawAsr)?;
    for &v in variants {
        let label = match v {
            Variant::Fuzzy => full.inference.fused.dominant().0,
            Variant::TextOnly => linear.text.dominant().0,
            Variant::AudioOnly => linear.audio.dominant().0,
            Variant::Linear | Variant::NoGating => linear.fused.dominant().0,
            Variant::NoText => infer(buffer, "", WeightPolicy::Engine)?.fused.dominant().0,
            Variant::NoAudio => {
                let silent = AudioBuffer::new(vec![0.0; buffer.len()], buffer.sample_rate())?;
                infer(&silent, &row.transcript, WeightPolicy::Engine)?
                    .fused
                    .dominant()
                    .0
            }
            Variant::FixedWeight => {
                infer(buffer, &row.transcript, WeightPolicy::Fixed(0.5))?
                    .fused
                    .dominant()
                    .0
            }
        };
        predictions.insert(v, label);
    }
    Ok(RowPrediction {
        id: row.id.clone(),
        gold: row.label,
        predictions,
        w_text,
    })
}

/// Runs every requested variant over every row. The fuzzy variant is the
/// full pipeline, so each row also lands in the audit log. Rows whose
/// audio cannot be read are skipped and listed.
pub fn run_batch_eval(pipeline: &Pipeline, rows: &[ManifestRow], variants: &[Variant]) -> anyhow::Result<EvalReport> {
    anyhow::ensure!(!rows.is_empty(), "manifest is empty");
    let mut variants: Vec<Variant> = variants.to_vec();
    if !variants.contains(&Variant::Fuzzy) {
        variants.push(Variant::Fuzzy);
    }
    variants.sort();
    variants.dedup();

    let mut predictions = Vec::new();
    let mut skipped = Vec::new();
    for row in rows {
        let buffer = match read_wav(&row.audio) {
            Ok(b) => b,
            Err(e) => {
                pipeline.metrics().count_error("audio");
                skipped.push(SkippedRow {
                    id: row.id.clone(),
                    reason: e.to_string(),
                });
                continue;
            }
        };
        predictions.push(predict_row(pipeline, row, &buffer, &variants)?);
    }
    Ok(summarize(predictions, skipped, &variants))
}

pub fn summarize(predictions: Vec<RowPrediction>, skipped: Vec<SkippedRow>, variants: &[Variant]) -> EvalReport {
    let gold: Vec<EmotionLabel> = predictions.iter().map(|p| p.gold).collect();
    let column = |v: Variant| -> Vec<EmotionLabel> { predictions.iter().map(|p| p.predictions[&v]).collect() };
    let reports: BTreeMap<Variant, ClassificationReport> = variants
        .iter()
        .map(|&v| (v, classification_report(&gold, &column(v))))
        .collect();

    let disagreements = variants
        .iter()
        .filter(|&&v| v != Variant::Fuzzy)
        .map(|&baseline| {
            let mut d = Disagreement {
                baseline,
                fuzzy_corrects: 0,
                fuzzy_breaks: 0,
                both_correct: 0,
                both_wrong: 0,
                corrected_ids: Vec::new(),
            };
            for p in &predictions {
                let f = p.predictions[&Variant::Fuzzy] == p.gold;
                let b = p.predictions[&baseline] == p.gold;
                match (f, b) {
                    (true, false) => {
                        d.fuzzy_corrects += 1;
                        d.corrected_ids.push(p.id.clone());
                    }
                    (false, true) => d.fuzzy_breaks += 1,
                    (true, true) => d.both_correct += 1,
                    (false, false) => d.both_wrong += 1,
                }
            }
            d
        })
        .collect();

    EvalReport {
        rows_evaluated: predictions.len(),
        rows_skipped: skipped.len(),
        skipped,
        variants: reports,
        disagreements,
        predictions,
    }
}

impl EvalReport {
    /// Writes `report.json` and one `confusion_<variant>.csv` per variant.
    pub fn write(&self, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut written = Vec::new();
        let json = dir.join("report.json");
        std::fs::write(&json, serde_json::to_vec_pretty(self)?)?;
        written.push(json);
        for (variant, report) in &self.variants {
            let path = dir.join(format!("confusion_{variant}.csv"));
            std::fs::write(&path, report.confusion_csv())?;
            written.push(path);
        }
        Ok(written)
    }

    pub fn summary_table(&self) -> String {
        let mut out = format!(
            "{:<14}{:>10}{:>10}{:>12}\n",
            "variant", "accuracy", "macro_f1", "weighted_f1"
        );
        for (v, r) in &self.variants {
            out.push_str(&format!(
                "{:<14}{:>10.3}{:>10.3}{:>12.3}\n",
                v.as_str(),
                r.accuracy,
                r.macro_f1,
                r.weighted_f1
            ));
        }
        for d in &self.disagreements {
            out.push_str(&format!(
                "fuzzy vs {:<12} corrects {:>4}  breaks {:>4}\n",
                d.baseline.as_str(),
                d.fuzzy_corrects,
                d.fuzzy_breaks
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use EmotionLabel::*;

    #[test]
    fn perfect_predictor() {
        let gold = [Joy, Sadness, Anger, Fear, Disgust, Neutral, Joy];
        let r = classification_report(&gold, &gold);
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.macro_f1, 1.0);
        assert_eq!(r.weighted_f1, 1.0);
        assert_eq!(r.weighted_precision, 1.0);
        assert_eq!(r.confusion_normalized[0][0], 1.0);
    }

    #[test]
    fn single_class_weighted_equals_class_f1() {
        let gold = [Fear; 4];
        let pred = [Fear, Fear, Neutral, Joy];
        let r = classification_report(&gold, &pred);
        let fear = &r.per_class[Fear.index()];
        assert_eq!(r.weighted_f1, fear.f1);
        assert!((fear.recall - 0.5).abs() < 1e-15);
        assert_eq!(fear.precision, 1.0);
        // macro averages over fear, neutral and joy
        assert!((r.macro_f1 - fear.f1 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::BASELINES.iter().chain(Variant::ABLATIONS.iter()) {
            assert_eq!(v.as_str().parse::<Variant>().unwrap(), *v);
        }
        assert!("best".parse::<Variant>().is_err());
    }

    #[test]
    fn disagreement_counts() {
        let row = |id: &str, gold, fuzzy, linear| RowPrediction {
            id: id.into(),
            gold,
            predictions: [(Variant::Fuzzy, fuzzy), (Variant::Linear, linear)]
                .into_iter()
                .collect(),
            w_text: 0.5,
        };
        let rows = vec![
            row("a", Joy, Joy, Fear),
            row("b", Joy, Fear, Joy),
            row("c", Fear, Fear, Fear),
            row("d", Anger, Fear, Joy),
            row("e", Sadness, Sadness, Neutral),
        ];
        let report = summarize(rows, vec![], &[Variant::Linear, Variant::Fuzzy]);
        let d = &report.disagreements[0];
        assert_eq!(
            (d.fuzzy_corrects, d.fuzzy_breaks, d.both_correct, d.both_wrong),
            (2, 1, 1, 1)
        );
        assert_eq!(d.corrected_ids, ["a", "e"]);
    }

    #[test]
    fn manifest_paths_resolve_relative_to_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.jsonl");
        std::fs::write(
            &path,
            r#"{"id":"r1","audio":"wav/r1.wav","transcript":"hola","asr_confidence":0.8,"label":"alegría","extra":1}"#,
        )
        .unwrap();
        let rows = read_manifest(&path).unwrap();
        assert_eq!(rows[0].audio, dir.path().join("wav/r1.wav"));
        assert_eq!(rows[0].label, Joy);
        std::fs::write(
            &path,
            r#"{"id":"r1","audio":"a.wav","transcript":"","asr_confidence":1.2,"label":"joy"}"#,
        )
        .unwrap();
        assert!(read_manifest(&path).is_err());
    }
}
