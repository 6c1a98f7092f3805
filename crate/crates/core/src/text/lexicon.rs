use std::collections::HashMap;
use std::path::Path;

use serde::Serialize;

use super::TextError;
use crate::emotion::EmotionLabel;

pub const SEED_LEXICON: &str = include_str!("../../data/lexicon_es.tsv");
pub const SEED_LEMMAS: &str = include_str!("../../data/lemmas_es.tsv");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LexiconEntry {
    pub lemma: String,
    pub emotion: EmotionLabel,
    pub weight: f64,
    pub valence: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: HashMap<String, LexiconEntry>,
}

fn data_lines(source: &str) -> impl Iterator<Item = (usize, &str)> {
    source
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

impl Lexicon {
    /// Parses `lemma<TAB>emotion<TAB>weight<TAB>valence` rows. A first row
    /// starting with `lemma` is treated as a header.
    pub fn parse_tsv(source: &str) -> Result<Self, TextError> {
        let mut entries = HashMap::new();
        for (line_no, line) in data_lines(source) {
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if cols.first() == Some(&"lemma") {
                continue;
            }
            let bad = |reason: String| TextError::Lexicon { line: line_no, reason };
            if cols.len() != 4 {
                return Err(bad(format!("expected 4 columns, found {}", cols.len())));
            }
            let lemma = cols[0].to_lowercase();
            if lemma.is_empty() {
                return Err(bad("empty lemma".into()));
            }
            let emotion: EmotionLabel = cols[1].parse().map_err(|e| bad(format!("{e}")))?;
            let weight: f64 = cols[2].parse().map_err(|_| bad(format!("bad weight '{}'", cols[2])))?;
            if !(weight > 0.0 && weight <= 1.0) {
                return Err(bad(format!("weight {weight} outside (0, 1]")));
            }
            let valence: f64 = cols[3].parse().map_err(|_| bad(format!("bad valence '{}'", cols[3])))?;
            if !(-1.0..=1.0).contains(&valence) {
                return Err(bad(format!("valence {valence} outside [-1, 1]")));
            }
            entries.insert(
                lemma.clone(),
                LexiconEntry {
                    lemma,
                    emotion,
                    weight,
                    valence,
                },
            );
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, TextError> {
        let source = std::fs::read_to_string(path).map_err(|e| TextError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse_tsv(&source)
    }

    pub fn seed() -> Self {
        Self::parse_tsv(SEED_LEXICON).expect("seed lexicon is well-formed")
    }

    pub fn from_entries(entries: impl IntoIterator<Item = LexiconEntry>) -> Self {
        Self {
            entries: entries.into_iter().map(|e| (e.lemma.clone(), e)).collect(),
        }
    }

    pub fn get(&self, lemma: &str) -> Option<&LexiconEntry> {
        self.entries.get(lemma)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries sorted by lemma.
    pub fn entries(&self) -> Vec<&LexiconEntry> {
        let mut all: Vec<_> = self.entries.values().collect();
        all.sort_by(|a, b| a.lemma.cmp(&b.lemma));
        all
    }
}

/// Surface form → lemma lookup with identity fallback.
#[derive(Debug, Clone, Default)]
pub struct LemmaDictionary {
    map: HashMap<String, String>,
}

impl LemmaDictionary {
    pub fn parse_tsv(source: &str) -> Result<Self, TextError> {
        let mut map = HashMap::new();
        for (line_no, line) in data_lines(source) {
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if cols.len() != 2 || cols[0].is_empty() || cols[1].is_empty() {
                return Err(TextError::Lexicon {
                    line: line_no,
                    reason: "expected surface<TAB>lemma".into(),
                });
            }
            map.insert(cols[0].to_lowercase(), cols[1].to_lowercase());
        }
        Ok(Self { map })
    }

    pub fn load(path: &Path) -> Result<Self, TextError> {
        let source = std::fs::read_to_string(path).map_err(|e| TextError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse_tsv(&source)
    }

    pub fn seed() -> Self {
        Self::parse_tsv(SEED_LEMMAS).expect("seed lemma dictionary is well-formed")
    }

    pub fn lemma<'a>(&'a self, surface: &'a str) -> &'a str {
        self.map.get(surface).map(String::as_str).unwrap_or(surface)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lexicon_covers_all_emotions() {
        let lex = Lexicon::seed();
        assert!(lex.len() >= 55, "seed has {} lemmas", lex.len());
        for label in EmotionLabel::ALL {
            assert!(lex.entries().iter().any(|e| e.emotion == label), "{label} missing");
        }
        let feliz = lex.get("feliz").unwrap();
        assert_eq!(
            (feliz.emotion, feliz.weight, feliz.valence),
            (EmotionLabel::Joy, 0.8, 0.8)
        );
    }

    #[test]
    fn lexicon_rejects_bad_rows() {
        assert!(Lexicon::parse_tsv("feliz\tjoy\t0\t0.5").is_err());
        assert!(Lexicon::parse_tsv("feliz\tjoy\t0.5\t1.5").is_err());
        assert!(Lexicon::parse_tsv("feliz\tsurprise\t0.5\t0.5").is_err());
        assert!(Lexicon::parse_tsv("feliz\tjoy\t0.5").is_err());
        let lex = Lexicon::parse_tsv("Alegre\talegría\t0.5\t0.5\n").unwrap();
        assert_eq!(lex.get("alegre").unwrap().emotion, EmotionLabel::Joy);
    }

    #[test]
    fn lemma_identity_fallback() {
        let d = LemmaDictionary::seed();
        assert_eq!(d.lemma("contenta"), "contento");
        assert_eq!(d.lemma("mesa"), "mesa");
    }
}
