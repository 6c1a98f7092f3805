//! Pattern-based PII redaction applied to free text before it is hashed
//! or persisted.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PiiClass {
    Email,
    Phone,
    Id,
}

impl PiiClass {
    /// Application order: a phone number must not be eaten by the ID rule.
    pub const ALL: [PiiClass; 3] = [PiiClass::Email, PiiClass::Phone, PiiClass::Id];

    pub fn as_str(self) -> &'static str {
        match self {
            PiiClass::Email => "EMAIL",
            PiiClass::Phone => "PHONE",
            PiiClass::Id => "ID",
        }
    }

    pub fn placeholder(self) -> String {
        format!("[REDACTED:{}]", self.as_str())
    }

    fn pattern(self) -> &'static Regex {
        static EMAIL: OnceLock<Regex> = OnceLock::new();
        static PHONE: OnceLock<Regex> = OnceLock::new();
        static ID: OnceLock<Regex> = OnceLock::new();
        match self {
            PiiClass::Email => EMAIL.get_or_init(|| {
                Regex::new(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}").unwrap()
            }),
            // international prefix, or at least two separators between digit groups
            PiiClass::Phone => PHONE.get_or_init(|| {
                Regex::new(r"\+\d{1,3}(?:[ \-]?\(?\d{1,4}\)?){2,5}|\b\d{2,4}(?:[ \-]\d{2,4}){2,4}\b").unwrap()
            }),
            // 7 to 9 digit identifiers, optionally dotted as 12.345.678
            PiiClass::Id => ID.get_or_init(|| Regex::new(r"\b(?:\d{1,3}\.\d{3}\.\d{3}|\d{7,9})\b").unwrap()),
        }
    }
}

/// Matches replaced per class. Classes with no match are omitted.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RedactionReport {
    pub counts: BTreeMap<PiiClass, u64>,
}

impl RedactionReport {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn merge(&mut self, other: &RedactionReport) {
        for (class, n) in &other.counts {
            *self.counts.entry(*class).or_default() += n;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Redactor {
    classes: Vec<PiiClass>,
}

impl Default for Redactor {
    fn default() -> Self {
        Self::new(PiiClass::ALL)
    }
}

impl Redactor {
    pub fn new(classes: impl IntoIterator<Item = PiiClass>) -> Self {
        let mut classes: Vec<PiiClass> = classes.into_iter().collect();
        classes.sort();
        classes.dedup();
        Self { classes }
    }

    pub fn redact(&self, text: &str, report: &mut RedactionReport) -> String {
        let mut out = text.to_string();
        for &class in &self.classes {
            let n = class.pattern().find_iter(&out).count() as u64;
            if n > 0 {
                out = class
                    .pattern()
                    .replace_all(&out, class.placeholder().as_str())
                    .into_owned();
                *report.counts.entry(class).or_default() += n;
            }
        }
        out
    }
}

/// Redacts every default class from `text`.
pub fn redact_pii(text: &str) -> (String, RedactionReport) {
    let mut report = RedactionReport::default();
    let out = Redactor::default().redact(text, &mut report);
    (out, report)
}
