//! One conversational turn, end to end: channel estimates, fusion,
//! guardrails, response, then redaction, hashing, audit append, artifacts
//! and asynchronous anchoring.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use affex_core::audio::{audio_emotion, read_wav, AcousticFeatures, ArousalSmoother, AudioBuffer, AudioError};
use affex_core::audit::{
    export_explainability_artifact, AcousticRecord, AnchorError, AnchorRecord, Anchorer, ArtifactPaths, AuditEvent,
    AuditLog, AuditWriteError, CanonicalizationError, EscalationBlock, Ledger, RedactionReport, Redactor, Weights,
};
use affex_core::clock::{format_timestamp, Clock, SystemClock};
use affex_core::emotion::EmotionResult;
use affex_core::fusion::{adjust_asr_confidence, fuse, fuse_with_weight, FusionOutcome};
use affex_core::fuzzy::{FuzzyError, RuleBase};
use affex_core::guardrails::{
    evaluate_guardrails, notify_escalation, plan_response, DeliveryStatus, Escalation, GuardrailError, KeywordList,
    TemplateSet,
};
use affex_core::text::{text_emotion, TextAnalysis, TextAnalyzer, TextError};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::PipelineConfig;
use crate::metrics::{stage, Metrics};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid turn input: {0}")]
    Input(String),

    #[error(transparent)]
    Audio(#[from] AudioError),

    #[error("cannot build pipeline: {0}")]
    Setup(String),

    #[error("audit event rejected: {0}")]
    Canonical(#[from] CanonicalizationError),

    #[error("audit write failed: {0}")]
    AuditWrite(#[from] AuditWriteError),

    #[error("anchoring failed: {0}")]
    Anchor(#[from] AnchorError),
}

impl From<TextError> for PipelineError {
    fn from(e: TextError) -> Self {
        PipelineError::Setup(e.to_string())
    }
}

impl From<GuardrailError> for PipelineError {
    fn from(e: GuardrailError) -> Self {
        PipelineError::Setup(e.to_string())
    }
}

impl From<FuzzyError> for PipelineError {
    fn from(e: FuzzyError) -> Self {
        PipelineError::Setup(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnInput {
    pub audio: PathBuf,
    pub transcript: String,
    pub asr_confidence: f64,
    pub session_id: String,
}

/// Speech recognizer boundary. The built-in adapter passes through the
/// transcript and confidence supplied with the turn.
pub trait AsrAdapter: Send + Sync {
    fn transcribe(&self, audio: &AudioBuffer, transcript_hint: &str, confidence_hint: f64) -> (String, f64);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct ManifestAsr;

impl AsrAdapter for ManifestAsr {
    fn transcribe(&self, _audio: &AudioBuffer, transcript_hint: &str, confidence_hint: f64) -> (String, f64) {
        (transcript_hint.to_string(), confidence_hint)
    }
}

/// How the fusion weight is chosen. Anything but `Engine` is a baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightPolicy {
    Engine,
    /// Raw recognizer confidence, no SNR penalty, no engine.
    RawAsr,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageLatencies {
    pub asr: Duration,
    pub audio: Duration,
    pub text: Duration,
    pub fusion: Duration,
    pub guardrails: Duration,
    pub audit: Duration,
}

impl StageLatencies {
    /// Everything except the recognizer.
    pub fn non_asr(&self) -> Duration {
        self.audio + self.text + self.fusion + self.guardrails + self.audit
    }
}

/// Everything computed before persistence.
#[derive(Debug, Clone)]
pub struct Inference {
    pub transcript: String,
    pub asr_conf: f64,
    pub asr_conf_adjusted: f64,
    pub audio: EmotionResult,
    pub features: AcousticFeatures,
    pub text: EmotionResult,
    pub text_analysis: TextAnalysis,
    pub fused: FusionOutcome,
    pub escalation: Escalation,
    pub response: String,
    pub latencies: StageLatencies,
}

#[derive(Debug)]
pub struct TurnOutcome {
    pub response: String,
    pub event: AuditEvent,
    pub canonical: Vec<u8>,
    pub txid: String,
    pub audit_line: u64,
    pub anchor: AnchorRecord,
    pub artifacts: Option<ArtifactPaths>,
    pub inference: Inference,
    pub latencies: StageLatencies,
    /// When the response became available to the caller.
    pub responded_at: DateTime<Utc>,
    /// Webhook delivery runs off the response path.
    pub notification: Option<JoinHandle<DeliveryStatus>>,
}

#[derive(Debug)]
struct Session {
    smoother: ArousalSmoother,
    turns: u64,
}

pub struct Pipeline {
    config: PipelineConfig,
    analyzer: TextAnalyzer,
    rule_base: RuleBase,
    keywords: KeywordList,
    templates: TemplateSet,
    redactor: Redactor,
    asr: Box<dyn AsrAdapter>,
    audit_log: AuditLog,
    anchorer: Anchorer,
    metrics: Metrics,
    clock: Arc<dyn Clock>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Session>>>>,
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline")
            .field("rule_base", &self.rule_base.id)
            .field("audit_log", &self.audit_log.path())
            .field("anchorer", &self.anchorer)
            .finish_non_exhaustive()
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

impl Pipeline {
    /// Builds a pipeline with the system clock and an anchorer following
    /// the configuration.
    pub fn new(config: PipelineConfig) -> Result<Self, PipelineError> {
        Self::with_clock(config, Arc::new(SystemClock))
    }

    pub fn with_clock(config: PipelineConfig, clock: Arc<dyn Clock>) -> Result<Self, PipelineError> {
        let anchorer = if config.anchoring.enabled {
            let ledger = Arc::new(Ledger::open(
                &config.anchoring.ledger_path,
                config.anchoring.sender.clone(),
                config.anchoring.seal,
                Arc::clone(&clock),
            )?);
            if config.anchoring.manual_seal {
                Anchorer::manual(ledger)
            } else {
                Anchorer::background(ledger)
            }
        } else {
            Anchorer::disabled()
        };
        Self::with_parts(config, clock, anchorer)
    }

    pub fn with_parts(
        config: PipelineConfig,
        clock: Arc<dyn Clock>,
        anchorer: Anchorer,
    ) -> Result<Self, PipelineError> {
        let analyzer = TextAnalyzer::from_config(&config.text)?;
        let rule_base = RuleBase::resolve(&config.fusion.rule_base)?;
        let keywords = match &config.guardrails.keywords_path {
            Some(p) => KeywordList::load(p)?,
            None => KeywordList::seed(),
        };
        let templates = match &config.guardrails.templates_path {
            Some(p) => TemplateSet::load(p)?,
            None => TemplateSet::seed(),
        };
        let audit_log = AuditLog::open(&config.audit.log_path)?;
        let metrics = Metrics::new(&config.run.model_size, &config.run.run_id);
        Ok(Self {
            config,
            analyzer,
            rule_base,
            keywords,
            templates,
            redactor: Redactor::default(),
            asr: Box::new(ManifestAsr),
            audit_log,
            anchorer,
            metrics,
            clock,
            sessions: Mutex::new(HashMap::new()),
        })
    }

    /// Replaces the rule base, e.g. to exercise the fallback path.
    pub fn set_rule_base(&mut self, rule_base: RuleBase) {
        self.rule_base = rule_base;
    }

    pub fn set_asr_adapter(&mut self, asr: Box<dyn AsrAdapter>) {
        self.asr = asr;
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    pub fn anchorer(&self) -> &Anchorer {
        &self.anchorer
    }

    pub fn ledger(&self) -> Option<&Arc<Ledger>> {
        self.anchorer.ledger()
    }

    pub fn analyzer(&self) -> &TextAnalyzer {
        &self.analyzer
    }

    pub fn rule_base(&self) -> &RuleBase {
        &self.rule_base
    }

    fn session(&self, id: &str) -> Arc<Mutex<Session>> {
        let mut sessions = self.sessions.lock().unwrap_or_else(|p| p.into_inner());
        Arc::clone(sessions.entry(id.to_string()).or_insert_with(|| {
            Arc::new(Mutex::new(Session {
                smoother: ArousalSmoother::new(self.config.audio.alpha_ema),
                turns: 0,
            }))
        }))
    }

    /// Channel estimates, fusion, guardrails and response; nothing is
    /// persisted. `smoother` carries the session's arousal history.
    pub fn infer(
        &self,
        buffer: &AudioBuffer,
        transcript_hint: &str,
        asr_hint: f64,
        smoother: &mut ArousalSmoother,
        policy: WeightPolicy,
        timestamp: &str,
    ) -> Result<Inference, PipelineError> {
        if !(0.0..=1.0).contains(&asr_hint) {
            return Err(PipelineError::Input(format!(
                "asr_confidence {asr_hint} is outside [0, 1]"
            )));
        }
        let mut lat = StageLatencies::default();
        let ((transcript, asr_conf), t) = timed(|| self.asr.transcribe(buffer, transcript_hint, asr_hint));
        lat.asr = t;
        let asr_conf = asr_conf.clamp(0.0, 1.0);

        let ((audio, features), t) = timed(|| audio_emotion(buffer, smoother, &self.config.audio));
        lat.audio = t;
        let ((text, text_analysis), t) = timed(|| text_emotion(&self.analyzer, &transcript));
        lat.text = t;

        let ((asr_conf_adjusted, fused), t) = timed(|| {
            let adjusted = adjust_asr_confidence(asr_conf, features.snr_db, &self.config.fusion.snr_penalty);
            let variant = self.config.fusion.coherence_variant;
            let fused = match policy {
                WeightPolicy::Engine => fuse(&text, &audio, adjusted, &self.rule_base, variant),
                WeightPolicy::RawAsr => fuse_with_weight(&text, &audio, asr_conf, variant),
                WeightPolicy::Fixed(w) => fuse_with_weight(&text, &audio, w, variant),
            };
            (adjusted, fused)
        });
        lat.fusion = t;

        let ((escalation, response), t) = timed(|| {
            let escalation = evaluate_guardrails(
                &fused,
                &transcript,
                &self.config.guardrails.thresholds,
                &self.keywords,
                timestamp,
            );
            let response = plan_response(&fused, &escalation, &self.templates, &self.config.guardrails);
            (escalation, response)
        });
        lat.guardrails = t;

        Ok(Inference {
            transcript,
            asr_conf,
            asr_conf_adjusted,
            audio,
            features,
            text,
            text_analysis,
            fused,
            escalation,
            response,
            latencies: lat,
        })
    }

    /// Reads the turn's WAV file and runs [`Pipeline::run_turn_buffer`].
    pub fn run_turn(&self, input: &TurnInput) -> Result<TurnOutcome, PipelineError> {
        let buffer = read_wav(&input.audio).inspect_err(|_| self.metrics.count_error(stage::AUDIO))?;
        self.run_turn_buffer(&buffer, &input.transcript, input.asr_confidence, &input.session_id)
    }

    pub fn run_turn_buffer(
        &self,
        buffer: &AudioBuffer,
        transcript: &str,
        asr_confidence: f64,
        session_id: &str,
    ) -> Result<TurnOutcome, PipelineError> {
        let session = self.session(session_id);
        // turns of one session are serialized by holding its lock throughout
        let mut session = session.lock().unwrap_or_else(|p| p.into_inner());
        session.turns += 1;
        let turn = session.turns;
        let timestamp = format_timestamp(self.clock.now());

        let inference = self
            .infer(
                buffer,
                transcript,
                asr_confidence,
                &mut session.smoother,
                WeightPolicy::Engine,
                &timestamp,
            )
            .inspect_err(|_| self.metrics.count_error("input"))?;
        if inference.fused.fallback_reason.is_some() {
            self.metrics.count_error(stage::FUSION);
        }

        let audit_start = Instant::now();
        let event = self.build_event(&inference, session_id, turn, &timestamp);
        let sealed = event.seal().inspect_err(|_| self.metrics.count_error(stage::AUDIT))?;
        let (canonical, txid) = sealed;
        let audit_line = self
            .audit_log
            .append(&canonical)
            .inspect_err(|_| self.metrics.count_error(stage::AUDIT))?;
        let responded_at = self.clock.now();

        let artifacts = match (&event.fusion_fuzzy, self.config.audit.export_artifacts) {
            (Some(trace), true) => match export_explainability_artifact(trace, &txid, &self.config.audit.artifacts_dir)
            {
                Ok(paths) => Some(paths),
                Err(e) => {
                    log::warn!("explainability export failed for {txid}: {e}");
                    self.metrics.count_error("export");
                    None
                }
            },
            _ => None,
        };
        let anchor = self
            .anchorer
            .anchor_txid(&txid)
            .inspect_err(|_| self.metrics.count_error("anchor"))?;

        let notification = self
            .config
            .webhook()
            .filter(|_| inference.escalation.triggered)
            .map(|url| {
                let mut escalation = inference.escalation.clone();
                let url = url.to_string();
                let txid = txid.clone();
                let run_id = self.config.run.run_id.clone();
                let errors = self.metrics.pipeline_errors.clone();
                std::thread::spawn(move || {
                    let status = notify_escalation(&mut escalation, Some(&url), &txid, &run_id);
                    if let DeliveryStatus::Failed(reason) = &status {
                        log::warn!("escalation webhook failed for {txid}: {reason}");
                        errors.with_label_values(&["webhook"]).inc();
                    }
                    status
                })
            });

        let mut latencies = inference.latencies;
        latencies.audit = audit_start.elapsed();
        self.record_metrics(&inference, &event.redaction, &latencies);

        Ok(TurnOutcome {
            response: inference.response.clone(),
            event,
            canonical,
            txid,
            audit_line,
            anchor,
            artifacts,
            inference,
            latencies,
            responded_at,
            notification,
        })
    }

    fn record_metrics(&self, inference: &Inference, redaction: &RedactionReport, lat: &StageLatencies) {
        let m = &self.metrics;
        m.observe_stage(stage::ASR, lat.asr);
        m.observe_stage(stage::AUDIO, lat.audio);
        m.observe_stage(stage::TEXT, lat.text);
        m.observe_stage(stage::FUSION, lat.fusion);
        m.observe_stage(stage::GUARDRAILS, lat.guardrails);
        m.observe_stage(stage::AUDIT, lat.audit);
        m.pii_redactions.inc_by(redaction.total());
        m.audio_snr_db.set(inference.features.snr_db);
        m.coherence.set(inference.fused.coherence);
    }

    fn build_event(&self, inf: &Inference, session_id: &str, turn: u64, timestamp: &str) -> AuditEvent {
        let mut redaction = RedactionReport::default();
        let transcript = self.redactor.redact(&inf.transcript, &mut redaction);
        let response = self.redactor.redact(&inf.response, &mut redaction);
        let fused = &inf.fused;
        let run = &self.config.run;
        AuditEvent {
            canonical_version: AuditEvent::version(),
            event_id: format!("{}-{}-{:06}", run.run_id, session_id, turn),
            timestamp: timestamp.to_string(),
            session_id: session_id.to_string(),
            transcript,
            response,
            asr_conf: inf.asr_conf,
            asr_conf_adjusted: inf.asr_conf_adjusted,
            emotion_audio_conf: inf.audio.confidence,
            emotion_text_conf: inf.text.confidence,
            emotion_audio: inf.audio.distribution,
            emotion_text: inf.text.distribution,
            weights: Weights {
                w_text: fused.w_text,
                w_audio: fused.w_audio,
            },
            mode: fused.mode,
            fusion_fuzzy: fused.trace.clone(),
            fallback_reason: fused.fallback_reason.clone(),
            coherence: fused.coherence,
            coherence_variant: self.config.fusion.coherence_variant,
            final_distribution: fused.final_distribution,
            final_vad: fused.final_vad,
            acoustic: AcousticRecord::from(&inf.features),
            escalation: inf.escalation.triggered.then(|| EscalationBlock::from(&inf.escalation)),
            redaction,
            rule_base: self.rule_base.id.clone(),
            model_size: run.model_size.clone(),
            run_id: run.run_id.clone(),
        }
    }

    /// Stops background sealing after sealing everything queued.
    pub fn shutdown(&mut self) {
        self.anchorer.shutdown();
    }
}
