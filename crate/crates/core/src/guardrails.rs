//! Post-fusion risk checks, escalation notification and templated
//! responses.

use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::emotion::EmotionLabel;
use crate::fusion::FusionOutcome;

pub const SEED_KEYWORDS: &str = include_str!("../data/keywords_es.txt");
pub const SEED_TEMPLATES: &str = include_str!("../data/templates_es.txt");
pub const SAFE_HANDOFF_KEY: &str = "safe_handoff";

#[derive(Debug, Error)]
pub enum GuardrailError {
    #[error("template file line {line}: {reason}")]
    Template { line: usize, reason: String },

    #[error("template set is missing '{0}'")]
    MissingTemplate(String),

    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityThreshold {
    pub label: EmotionLabel,
    /// Triggers when the fused probability is strictly greater.
    pub above: f64,
}

impl ProbabilityThreshold {
    pub fn reason(&self) -> String {
        format!("{}>{}", self.label, self.above)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuardrailConfig {
    pub thresholds: Vec<ProbabilityThreshold>,
    /// One phrase per line; shipped seed list when absent.
    pub keywords_path: Option<std::path::PathBuf>,
    /// `key = text` lines; shipped seed templates when absent.
    pub templates_path: Option<std::path::PathBuf>,
    pub escalation_webhook: Option<String>,
    /// Below this dominant probability the hedged template is used.
    pub hedge_probability: f64,
    /// Below this coherence the hedged template is used.
    pub hedge_coherence: f64,
}

impl Default for GuardrailConfig {
    fn default() -> Self {
        Self {
            thresholds: vec![
                ProbabilityThreshold {
                    label: EmotionLabel::Fear,
                    above: 0.7,
                },
                ProbabilityThreshold {
                    label: EmotionLabel::Sadness,
                    above: 0.85,
                },
            ],
            keywords_path: None,
            templates_path: None,
            escalation_webhook: None,
            hedge_probability: 0.5,
            hedge_coherence: 0.4,
        }
    }
}

/// Lowercase, strip combining marks, collapse whitespace.
pub fn normalize_for_match(text: &str) -> String {
    let folded: String = text
        .nfd()
        .filter(|c| !unicode_normalization::char::is_combining_mark(*c))
        .flat_map(char::to_lowercase)
        .collect();
    folded.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeywordList {
    // (original, normalized)
    phrases: Vec<(String, String)>,
}

impl KeywordList {
    pub fn parse(source: &str) -> Self {
        let phrases = source
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| (l.to_string(), normalize_for_match(l)))
            .collect();
        Self { phrases }
    }

    pub fn seed() -> Self {
        Self::parse(SEED_KEYWORDS)
    }

    pub fn load(path: &Path) -> Result<Self, GuardrailError> {
        std::fs::read_to_string(path)
            .map(|s| Self::parse(&s))
            .map_err(|e| GuardrailError::Io {
                path: path.display().to_string(),
                message: e.to_string(),
            })
    }

    pub fn matches<'a>(&'a self, text: &str) -> Vec<&'a str> {
        let haystack = normalize_for_match(text);
        self.phrases
            .iter()
            .filter(|(_, needle)| !needle.is_empty() && haystack.contains(needle.as_str()))
            .map(|(orig, _)| orig.as_str())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Escalation {
    pub triggered: bool,
    pub reasons: Vec<String>,
    pub notified: bool,
    pub timestamp: String,
}

pub fn evaluate_guardrails(
    fused: &FusionOutcome,
    transcript: &str,
    thresholds: &[ProbabilityThreshold],
    keywords: &KeywordList,
    timestamp: &str,
) -> Escalation {
    let mut reasons: Vec<String> = thresholds
        .iter()
        .filter(|t| fused.final_distribution.get(t.label) > t.above)
        .map(ProbabilityThreshold::reason)
        .collect();
    reasons.extend(keywords.matches(transcript).into_iter().map(|k| format!("keyword:{k}")));
    Escalation {
        triggered: !reasons.is_empty(),
        reasons,
        notified: false,
        timestamp: timestamp.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "detail")]
pub enum DeliveryStatus {
    Skipped,
    Delivered,
    Failed(String),
}

#[derive(Debug, Serialize)]
struct WebhookBody<'a> {
    txid: &'a str,
    reasons: &'a [String],
    timestamp: &'a str,
    run_id: &'a str,
}

/// POSTs the escalation to the webhook, if one is configured. Sets
/// `notified` on a 2xx answer; every failure is reported, never raised.
pub fn notify_escalation(
    escalation: &mut Escalation,
    webhook_url: Option<&str>,
    txid: &str,
    run_id: &str,
) -> DeliveryStatus {
    let Some(url) = webhook_url.filter(|u| !u.trim().is_empty()) else {
        return DeliveryStatus::Skipped;
    };
    if !escalation.triggered {
        return DeliveryStatus::Skipped;
    }
    let body = WebhookBody {
        txid,
        reasons: &escalation.reasons,
        timestamp: &escalation.timestamp,
        run_id,
    };
    let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(5)).build();
    match agent.post(url).send_json(&body) {
        Ok(resp) if (200..300).contains(&resp.status()) => {
            escalation.notified = true;
            DeliveryStatus::Delivered
        }
        Ok(resp) => DeliveryStatus::Failed(format!("HTTP {}", resp.status())),
        Err(ureq::Error::Status(code, _)) => DeliveryStatus::Failed(format!("HTTP {code}")),
        Err(e) => DeliveryStatus::Failed(e.to_string()),
    }
}

/// Response templates: a plain and a hedged variant per emotion plus the
/// safe hand-off message.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateSet {
    templates: HashMap<String, String>,
}

impl TemplateSet {
    pub fn required_keys() -> Vec<String> {
        let mut keys: Vec<String> = EmotionLabel::ALL
            .iter()
            .flat_map(|l| [l.as_str().to_string(), format!("{}.hedged", l.as_str())])
            .collect();
        keys.push(SAFE_HANDOFF_KEY.to_string());
        keys
    }

    pub fn parse(source: &str) -> Result<Self, GuardrailError> {
        let mut templates = HashMap::new();
        for (i, line) in source.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, text) = line.split_once('=').ok_or(GuardrailError::Template {
                line: i + 1,
                reason: "expected 'key = text'".into(),
            })?;
            let (key, text) = (key.trim(), text.trim());
            if text.is_empty() {
                return Err(GuardrailError::Template {
                    line: i + 1,
                    reason: format!("empty template for '{key}'"),
                });
            }
            templates.insert(key.to_string(), text.to_string());
        }
        for key in Self::required_keys() {
            if !templates.contains_key(&key) {
                return Err(GuardrailError::MissingTemplate(key));
            }
        }
        Ok(Self { templates })
    }

    pub fn seed() -> Self {
        Self::parse(SEED_TEMPLATES).expect("seed templates are complete")
    }

    pub fn load(path: &Path) -> Result<Self, GuardrailError> {
        let source = std::fs::read_to_string(path).map_err(|e| GuardrailError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&source)
    }

    pub fn get(&self, key: &str) -> &str {
        // parse() guarantees every required key
        &self.templates[key]
    }
}

pub fn plan_response(
    fused: &FusionOutcome,
    escalation: &Escalation,
    templates: &TemplateSet,
    config: &GuardrailConfig,
) -> String {
    if escalation.triggered {
        return templates.get(SAFE_HANDOFF_KEY).to_string();
    }
    let (label, p) = fused.dominant();
    let hedged = p < config.hedge_probability || fused.coherence < config.hedge_coherence;
    let key = if hedged {
        format!("{}.hedged", label.as_str())
    } else {
        label.as_str().to_string()
    };
    templates.get(&key).to_string()
}
