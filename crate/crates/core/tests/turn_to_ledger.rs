//! One turn through the core stages by hand: WAV ingest, both channels,
//! fusion, guardrails, persistence, anchoring and verification.

use std::sync::Arc;

use affex_core::audio::{audio_emotion, read_wav, ArousalSmoother, AudioConfig, SAMPLE_RATE};
use affex_core::audit::{
    canonicalize, compute_txid, export_explainability_artifact, load_blocks, redact_pii, verify_anchorage_file,
    AuditLog, Ledger, SealPolicy, Verdict,
};
use affex_core::clock::ManualClock;
use affex_core::emotion::EmotionLabel;
use affex_core::fusion::{adjust_asr_confidence, fuse, CoherenceVariant, FusionMode, SnrPenalty};
use affex_core::fuzzy::RuleBase;
use affex_core::guardrails::{evaluate_guardrails, plan_response, GuardrailConfig, KeywordList, TemplateSet};
use affex_core::text::{text_emotion, TextAnalyzer};
use serde_json::json;

fn write_tone(path: &std::path::Path, rate: u32, seconds: f64, amp: f64) {
    let spec = hound::WavSpec {
        channels: 2,
        sample_rate: rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut w = hound::WavWriter::create(path, spec).unwrap();
    for i in 0..(seconds * rate as f64) as usize {
        let t = i as f64 / rate as f64;
        let s = (amp * (std::f64::consts::TAU * 220.0 * t).sin() * 32767.0) as i16;
        w.write_sample(s).unwrap();
        w.write_sample(s).unwrap();
    }
    w.finalize().unwrap();
}

#[test]
fn stereo_44k_turn_is_anchored_and_verifiable() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("turn.wav");
    write_tone(&wav, 44_100, 1.0, 0.4);

    let buffer = read_wav(&wav).unwrap();
    assert_eq!(buffer.sample_rate(), SAMPLE_RATE);
    assert!((buffer.duration_secs() - 1.0).abs() < 0.01);

    let (audio, features) = audio_emotion(&buffer, &mut ArousalSmoother::new(0.3), &AudioConfig::default());
    assert!(features.rms_norm > 0.9, "{features:?}");

    let transcript = "me quiero morir, escríbeme a ana@example.com";
    let analyzer = TextAnalyzer::seed();
    let (text, _) = text_emotion(&analyzer, transcript);
    let asr = adjust_asr_confidence(0.92, features.snr_db, &SnrPenalty::default());
    let fused = fuse(
        &text,
        &audio,
        asr,
        &RuleBase::default_base(),
        CoherenceVariant::AsPrinted,
    );
    assert_eq!(fused.mode, FusionMode::Fuzzy);
    let total: f64 = fused.final_distribution.iter().map(|(_, p)| p).sum();
    assert!((total - 1.0).abs() < 1e-9);

    let config = GuardrailConfig::default();
    let escalation = evaluate_guardrails(
        &fused,
        transcript,
        &config.thresholds,
        &KeywordList::seed(),
        "2025-01-01T00:00:00Z",
    );
    assert!(escalation.triggered);
    assert!(
        escalation.reasons.iter().any(|r| r == "keyword:me quiero morir"),
        "{:?}",
        escalation.reasons
    );
    let templates = TemplateSet::seed();
    let response = plan_response(&fused, &escalation, &templates, &config);
    assert_eq!(response, templates.get("safe_handoff"));

    let (redacted, report) = redact_pii(transcript);
    assert!(!redacted.contains("ana@example.com"));
    assert_eq!(report.total(), 1);
    let record = json!({
        "transcript": redacted,
        "w_text": fused.w_text,
        "dominant": fused.dominant().0,
        "escalated": escalation.triggered,
    });
    let bytes = canonicalize(&record).unwrap();
    let txid = compute_txid(&bytes);

    let log = AuditLog::open(dir.path().join("audit/events.jsonl")).unwrap();
    assert_eq!(log.append(&bytes).unwrap(), 1);
    let artifacts =
        export_explainability_artifact(fused.trace.as_ref().unwrap(), &txid, &dir.path().join("rules")).unwrap();
    assert!(artifacts.image.exists());

    let ledger_path = dir.path().join("ledger.json");
    let clock = Arc::new(ManualClock::pinned());
    {
        let ledger = Ledger::open(&ledger_path, "0xcore", SealPolicy::default(), clock.clone()).unwrap();
        ledger.submit(&txid).unwrap();
        ledger.seal().unwrap();
    }
    assert_eq!(load_blocks(&ledger_path).unwrap().len(), 1);

    let stored = std::fs::read_to_string(log.path()).unwrap();
    let line = stored.lines().next().unwrap().as_bytes();
    assert!(matches!(
        verify_anchorage_file(line, &txid, &ledger_path),
        Verdict::Verified { block_number: 0, .. }
    ));

    let mut tampered = line.to_vec();
    let at = tampered.iter().position(|&b| b == b't').unwrap();
    tampered[at] = b'f';
    assert!(matches!(
        verify_anchorage_file(&tampered, &txid, &ledger_path),
        Verdict::TamperDetected { .. }
    ));

    // reopening keeps the sealed history and continues the chain
    let ledger = Ledger::open(&ledger_path, "0xcore", SealPolicy::default(), clock).unwrap();
    ledger.submit(&compute_txid(b"next")).unwrap();
    let block = ledger.seal().unwrap().unwrap();
    assert_eq!(block.block_number, 1);
    assert_eq!(
        block.previous_block_hash,
        load_blocks(&ledger_path).unwrap()[0].block_hash
    );
}

#[test]
fn fear_probability_threshold_escalates_without_keywords() {
    let analyzer = TextAnalyzer::seed();
    let (text, _) = text_emotion(&analyzer, "tengo mucho miedo, estoy aterrado y asustado");
    assert_eq!(text.dominant().0, EmotionLabel::Fear);
    let (audio, _) = text_emotion(&analyzer, "miedo");
    let fused = fuse(
        &text,
        &audio,
        0.95,
        &RuleBase::default_base(),
        CoherenceVariant::AsPrinted,
    );
    let config = GuardrailConfig::default();
    let esc = evaluate_guardrails(
        &fused,
        "tengo mucho miedo",
        &config.thresholds,
        &KeywordList::seed(),
        "t",
    );
    assert!(esc.triggered);
    assert_eq!(esc.reasons, vec!["fear>0.7".to_string()]);
}
