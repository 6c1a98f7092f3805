//! Pipeline configuration: YAML file plus `APP__SECTION__KEY` environment
//! overrides, validated with errors that name the offending key.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use affex_core::audio::AudioConfig;
use affex_core::audit::SealPolicy;
use affex_core::fusion::{CoherenceVariant, SnrPenalty};
use affex_core::fuzzy::RuleBase;
use affex_core::guardrails::GuardrailConfig;
use affex_core::text::TextConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_PREFIX: &str = "APP";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {message}")]
    File { path: String, message: String },

    #[error("invalid configuration: {0}")]
    Parse(String),

    #[error("{key}: {reason}")]
    Invalid { key: String, reason: String },
}

impl ConfigError {
    fn invalid(key: &str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    /// Dotted key path the error refers to, when known.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { key, .. } => Some(key),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run_id: String,
    pub model_size: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            run_id: "local".into(),
            model_size: "small".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// `trace`, `default-r1r4`, or a path to a rule-base YAML file.
    pub rule_base: String,
    pub coherence_variant: CoherenceVariant,
    pub snr_penalty: SnrPenalty,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            rule_base: "default-r1r4".into(),
            coherence_variant: CoherenceVariant::AsPrinted,
            snr_penalty: SnrPenalty::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnchoringConfig {
    pub enabled: bool,
    pub ledger_path: PathBuf,
    /// Account identifier recorded with every ledger entry.
    pub sender: String,
    /// Leave sealing to the caller instead of a background thread.
    pub manual_seal: bool,
    pub seal: SealPolicy,
}

impl Default for AnchoringConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            ledger_path: PathBuf::from("audit/ledger.json"),
            sender: "0x00000000000000000000000000000000affec7ed".into(),
            manual_seal: false,
            seal: SealPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditConfig {
    pub log_path: PathBuf,
    pub artifacts_dir: PathBuf,
    /// Write the per-event rule matrix files.
    pub export_artifacts: bool,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            log_path: PathBuf::from("audit/events.jsonl"),
            artifacts_dir: PathBuf::from("audit/fired_rules"),
            export_artifacts: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub port: u16,
    /// When set, batch commands dump the exposition text here.
    pub dump_path: Option<PathBuf>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            port: 9464,
            dump_path: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub run: RunConfig,
    pub audio: AudioConfig,
    pub text: TextConfig,
    pub fusion: FusionConfig,
    pub guardrails: GuardrailConfig,
    pub anchoring: AnchoringConfig,
    pub audit: AuditConfig,
    pub metrics: MetricsConfig,
}

/// Loads `path` (if any) and applies overrides from `env`, or from the
/// process environment when `env` is `None`.
pub fn load_config(path: Option<&Path>, env: Option<HashMap<String, String>>) -> Result<PipelineConfig, ConfigError> {
    let mut builder = config::Config::builder();
    if let Some(path) = path {
        if !path.is_file() {
            return Err(ConfigError::File {
                path: path.display().to_string(),
                message: "no such file".into(),
            });
        }
        builder = builder.add_source(config::File::from(path).format(config::FileFormat::Yaml));
    }
    let environment = config::Environment::with_prefix(ENV_PREFIX)
        .prefix_separator("__")
        .separator("__")
        .try_parsing(true)
        .source(env);
    let merged = builder
        .add_source(environment)
        .build()
        .map_err(|e| ConfigError::Parse(e.to_string()))?;
    let cfg: PipelineConfig = merged
        .try_deserialize()
        .map_err(|e| ConfigError::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn in_range(key: &str, v: f64, lo: f64, hi: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v >= lo && v <= hi {
        Ok(())
    } else {
        Err(ConfigError::invalid(key, format!("{v} is outside [{lo}, {hi}]")))
    }
}

fn file_exists(key: &str, path: &Option<PathBuf>) -> Result<(), ConfigError> {
    match path {
        Some(p) if !p.is_file() => Err(ConfigError::invalid(key, format!("{} does not exist", p.display()))),
        _ => Ok(()),
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let a = &self.audio;
        if !(a.alpha_ema > 0.0 && a.alpha_ema <= 1.0) {
            return Err(ConfigError::invalid(
                "audio.alpha_ema",
                format!("{} is outside (0, 1]", a.alpha_ema),
            ));
        }
        if !(a.norm_factor.is_finite() && a.norm_factor > 0.0) {
            return Err(ConfigError::invalid("audio.norm_factor", "must be positive"));
        }
        if a.snr_block_size < 2 {
            return Err(ConfigError::invalid("audio.snr_block_size", "must be at least 2"));
        }
        in_range("audio.base_valence", a.base_valence, -1.0, 1.0)?;
        if !(a.prototype_temperature.is_finite() && a.prototype_temperature > 0.0) {
            return Err(ConfigError::invalid("audio.prototype_temperature", "must be positive"));
        }

        file_exists("text.lexicon_path", &self.text.lexicon_path)?;
        file_exists("text.lemma_path", &self.text.lemma_path)?;
        for (word, m) in &self.text.intensifiers {
            if !(m.is_finite() && *m > 0.0) {
                return Err(ConfigError::invalid(
                    &format!("text.intensifiers.{word}"),
                    "multiplier must be positive",
                ));
            }
        }

        let p = &self.fusion.snr_penalty;
        if !(p.low_db.is_finite() && p.moderate_db.is_finite() && p.low_db <= p.moderate_db) {
            return Err(ConfigError::invalid(
                "fusion.snr_penalty.low_db",
                "must not exceed moderate_db",
            ));
        }
        in_range("fusion.snr_penalty.low_factor", p.low_factor, 0.0, 1.0)?;
        in_range("fusion.snr_penalty.moderate_factor", p.moderate_factor, 0.0, 1.0)?;
        RuleBase::resolve(&self.fusion.rule_base)
            .map_err(|e| ConfigError::invalid("fusion.rule_base", e.to_string()))?;

        let g = &self.guardrails;
        for (i, t) in g.thresholds.iter().enumerate() {
            in_range(&format!("guardrails.thresholds[{i}].above"), t.above, 0.0, 1.0)?;
        }
        in_range("guardrails.hedge_probability", g.hedge_probability, 0.0, 1.0)?;
        in_range("guardrails.hedge_coherence", g.hedge_coherence, 0.0, 1.0)?;
        file_exists("guardrails.keywords_path", &g.keywords_path)?;
        file_exists("guardrails.templates_path", &g.templates_path)?;
        if let Some(url) = &g.escalation_webhook {
            if !(url.is_empty() || url.starts_with("http://") || url.starts_with("https://")) {
                return Err(ConfigError::invalid(
                    "guardrails.escalation_webhook",
                    "must be an http(s) URL",
                ));
            }
        }

        let s = &self.anchoring.seal;
        if s.max_block_entries == 0 {
            return Err(ConfigError::invalid(
                "anchoring.seal.max_block_entries",
                "must be at least 1",
            ));
        }
        if s.queue_capacity == 0 {
            return Err(ConfigError::invalid(
                "anchoring.seal.queue_capacity",
                "must be at least 1",
            ));
        }
        if s.block_interval.is_zero() {
            return Err(ConfigError::invalid(
                "anchoring.seal.block_interval_ms",
                "must be positive",
            ));
        }
        if self.anchoring.sender.trim().is_empty() {
            return Err(ConfigError::invalid("anchoring.sender", "must not be empty"));
        }
        if self.run.run_id.trim().is_empty() {
            return Err(ConfigError::invalid("run.run_id", "must not be empty"));
        }
        Ok(())
    }

    /// The webhook URL, treating an empty string as unset.
    pub fn webhook(&self) -> Option<&str> {
        self.guardrails
            .escalation_webhook
            .as_deref()
            .filter(|u| !u.trim().is_empty())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> Option<HashMap<String, String>> {
        Some(pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect())
    }

    fn write(dir: &tempfile::TempDir, yaml: &str) -> PathBuf {
        let p = dir.path().join("config.yaml");
        std::fs::write(&p, yaml).unwrap();
        p
    }

    #[test]
    fn defaults_without_file() {
        let cfg = load_config(None, env(&[])).unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!(cfg.audio.alpha_ema, 0.3);
        assert!(cfg.webhook().is_none());
    }

    #[test]
    fn environment_overrides_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "audio:\n  alpha_ema: 0.3\nrun:\n  run_id: from-file\n");
        let cfg = load_config(Some(&p), env(&[])).unwrap();
        assert_eq!(cfg.audio.alpha_ema, 0.3);
        assert_eq!(cfg.run.run_id, "from-file");
        let cfg = load_config(
            Some(&p),
            env(&[
                ("APP__AUDIO__ALPHA_EMA", "0.5"),
                ("APP__ANCHORING__ENABLED", "false"),
                ("APP__RUN__RUN_ID", "42"),
            ]),
        )
        .unwrap();
        assert_eq!(cfg.audio.alpha_ema, 0.5);
        assert!(!cfg.anchoring.enabled);
        assert_eq!(cfg.run.run_id, "42");
    }

    #[test]
    fn out_of_range_names_key() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "audio:\n  alpha_ema: 1.5\n");
        let err = load_config(Some(&p), env(&[])).unwrap_err();
        assert_eq!(err.key(), Some("audio.alpha_ema"));
        assert!(err.to_string().contains("audio.alpha_ema"));
    }

    #[test]
    fn missing_file_and_unknown_key() {
        assert!(matches!(
            load_config(Some(Path::new("/nonexistent.yaml")), env(&[])),
            Err(ConfigError::File { .. })
        ));
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "audio:\n  alpha: 0.5\n");
        assert!(matches!(load_config(Some(&p), env(&[])), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn referenced_files_must_exist() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "text:\n  lexicon_path: /nonexistent/lexicon.tsv\n");
        assert_eq!(
            load_config(Some(&p), env(&[])).unwrap_err().key(),
            Some("text.lexicon_path")
        );
        let p = write(&dir, "fusion:\n  rule_base: /nonexistent/rules.yaml\n");
        assert_eq!(
            load_config(Some(&p), env(&[])).unwrap_err().key(),
            Some("fusion.rule_base")
        );
    }

    #[test]
    fn nested_sections_parse() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "fusion:\n  rule_base: trace\n  coherence_variant: range_normalized\n  snr_penalty:\n    low_factor: 0.5\n\
             guardrails:\n  thresholds:\n    - {label: miedo, above: 0.6}\n  escalation_webhook: http://127.0.0.1:9/hook\n\
             anchoring:\n  seal:\n    block_interval_ms: 500\n    max_block_entries: 16\n",
        );
        let cfg = load_config(Some(&p), env(&[])).unwrap();
        assert_eq!(cfg.fusion.coherence_variant, CoherenceVariant::RangeNormalized);
        assert_eq!(cfg.fusion.snr_penalty.low_factor, 0.5);
        assert_eq!(cfg.fusion.snr_penalty.moderate_factor, 0.85);
        assert_eq!(cfg.guardrails.thresholds[0].reason(), "fear>0.6");
        assert_eq!(cfg.webhook(), Some("http://127.0.0.1:9/hook"));
        assert_eq!(cfg.anchoring.seal.block_interval, std::time::Duration::from_millis(500));
        assert_eq!(cfg.anchoring.seal.max_block_entries, 16);
    }
}
