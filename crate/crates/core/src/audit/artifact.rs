//! Per-event explainability files: the fired-rule JSON and a
//! rules-by-conditions matrix as CSV and as a grayscale pixmap.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::fuzzy::{FiredRule, FuzzyInputs, FuzzyTrace};

use super::canonical::canonicalize;
use super::ExportError;

/// Side length of one matrix cell in the raster, in pixels.
pub const CELL_PX: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArtifactPaths {
    pub json: PathBuf,
    pub csv: PathBuf,
    pub image: PathBuf,
}

#[derive(Serialize)]
struct ArtifactJson<'a> {
    txid: &'a str,
    fired_rules: &'a [FiredRule],
    inputs: &'a FuzzyInputs,
    out_sets: &'a std::collections::BTreeMap<String, f64>,
}

/// Rows are rules; columns are every distinct antecedent condition in
/// first-seen order, then the rule strength. A cell holds the membership
/// degree of the condition when the rule uses it, otherwise `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleMatrix {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl RuleMatrix {
    pub fn from_trace(trace: &FuzzyTrace) -> Self {
        let mut conditions: Vec<String> = Vec::new();
        for rule in &trace.fired_rules {
            for c in &rule.conditions {
                if !conditions.contains(c) {
                    conditions.push(c.clone());
                }
            }
        }
        let degree = |condition: &str| -> Option<f64> {
            let (var, set) = condition.split_once(" is ")?;
            trace.memberships.get(var)?.get(set).copied()
        };
        let rows = trace
            .fired_rules
            .iter()
            .map(|rule| {
                let mut row: Vec<Option<f64>> = conditions
                    .iter()
                    .map(|c| if rule.conditions.contains(c) { degree(c) } else { None })
                    .collect();
                row.push(Some(rule.strength));
                row
            })
            .collect();
        let mut columns = conditions;
        columns.push("strength".into());
        Self { columns, rows }
    }

    pub fn to_csv(&self, trace: &FuzzyTrace) -> String {
        let quote = |s: &str| format!("\"{}\"", s.replace('"', "\"\""));
        let mut out = String::from("rule");
        for c in &self.columns {
            out.push(',');
            out.push_str(&quote(c));
        }
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            let label = format!(
                "{} -> {}",
                trace.fired_rules[i].conditions.join(" AND "),
                trace.fired_rules[i].then
            );
            out.push_str(&quote(&label));
            for cell in row {
                out.push(',');
                if let Some(v) = cell {
                    out.push_str(&format!("{v:.6}"));
                }
            }
            out.push('\n');
        }
        out
    }

    /// Binary PPM (P6) with equal channels; intensity = round(255 * value),
    /// unused cells black.
    pub fn to_ppm(&self) -> Vec<u8> {
        let width = self.columns.len() * CELL_PX;
        let height = self.rows.len().max(1) * CELL_PX;
        let mut out = format!("P6\n{width} {height}\n255\n").into_bytes();
        let header = out.len();
        out.resize(header + width * height * 3, 0);
        for (r, row) in self.rows.iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                let level = intensity(cell.unwrap_or(0.0));
                for y in r * CELL_PX..(r + 1) * CELL_PX {
                    let start = header + (y * width + c * CELL_PX) * 3;
                    out[start..start + CELL_PX * 3].fill(level);
                }
            }
        }
        out
    }
}

pub fn intensity(value: f64) -> u8 {
    (255.0 * value.clamp(0.0, 1.0)).round() as u8
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), ExportError> {
    std::fs::write(path, bytes).map_err(|e| ExportError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Writes `<txid>.json`, `<txid>.csv` and `<txid>.ppm` under `dir`.
pub fn export_explainability_artifact(
    trace: &FuzzyTrace,
    txid: &str,
    dir: &Path,
) -> Result<ArtifactPaths, ExportError> {
    std::fs::create_dir_all(dir).map_err(|e| ExportError::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })?;
    let paths = ArtifactPaths {
        json: dir.join(format!("{txid}.json")),
        csv: dir.join(format!("{txid}.csv")),
        image: dir.join(format!("{txid}.ppm")),
    };
    let doc = ArtifactJson {
        txid,
        fired_rules: &trace.fired_rules,
        inputs: &trace.inputs,
        out_sets: &trace.out_sets,
    };
    let json = canonicalize(&doc).map_err(|e| ExportError::Encode(e.to_string()))?;
    let matrix = RuleMatrix::from_trace(trace);
    write(&paths.json, &json)?;
    write(&paths.csv, matrix.to_csv(trace).as_bytes())?;
    write(&paths.image, &matrix.to_ppm())?;
    Ok(paths)
}
