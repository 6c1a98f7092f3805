//! Prometheus instrumentation. Every series carries the `model_size` and
//! `run_id` labels.

use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use prometheus::{Encoder, Gauge, HistogramOpts, HistogramVec, IntCounter, IntCounterVec, Opts, Registry, TextEncoder};

/// Stage names used for the latency histogram.
pub mod stage {
    pub const ASR: &str = "asr_adapter";
    pub const AUDIO: &str = "audio_emotion";
    pub const TEXT: &str = "text_emotion";
    pub const FUSION: &str = "fusion";
    pub const GUARDRAILS: &str = "guardrails";
    pub const AUDIT: &str = "audit";
}

const LATENCY_BUCKETS: [f64; 12] = [
    0.0005, 0.001, 0.0025, 0.005, 0.01, 0.025, 0.05, 0.1, 0.25, 0.5, 1.0, 5.0,
];

#[derive(Debug, Clone)]
pub struct Metrics {
    registry: Registry,
    pub stage_latency: HistogramVec,
    pub pii_redactions: IntCounter,
    pub pipeline_errors: IntCounterVec,
    pub audio_snr_db: Gauge,
    pub coherence: Gauge,
}

impl Metrics {
    pub fn new(model_size: &str, run_id: &str) -> Self {
        let labels: HashMap<String, String> = [
            ("model_size".to_string(), model_size.to_string()),
            ("run_id".to_string(), run_id.to_string()),
        ]
        .into_iter()
        .collect();
        // const labels on each family (not on the registry) so the exposition
        // lists them in a stable, sorted order
        let registry = Registry::new();

        let stage_latency = HistogramVec::new(
            HistogramOpts::new("pipeline_stage_latency_seconds", "Wall time per pipeline stage")
                .const_labels(labels.clone())
                .buckets(LATENCY_BUCKETS.to_vec()),
            &["stage"],
        )
        .expect("valid histogram");
        let pii_redactions = IntCounter::with_opts(
            Opts::new("pii_redactions_total", "PII matches replaced before persistence").const_labels(labels.clone()),
        )
        .expect("valid counter");
        let pipeline_errors = IntCounterVec::new(
            Opts::new("pipeline_errors_total", "Errors raised or absorbed by the pipeline")
                .const_labels(labels.clone()),
            &["stage"],
        )
        .expect("valid counter");
        let audio_snr_db = Gauge::with_opts(
            Opts::new("audio_snr_db", "Estimated SNR of the last turn in dB").const_labels(labels.clone()),
        )
        .expect("valid gauge");
        let coherence = Gauge::with_opts(
            Opts::new("cross_modal_coherence", "Audio/text VAD coherence of the last turn")
                .const_labels(labels.clone()),
        )
        .expect("valid gauge");

        registry
            .register(Box::new(stage_latency.clone()))
            .expect("unique metric");
        registry
            .register(Box::new(pii_redactions.clone()))
            .expect("unique metric");
        registry
            .register(Box::new(pipeline_errors.clone()))
            .expect("unique metric");
        registry
            .register(Box::new(audio_snr_db.clone()))
            .expect("unique metric");
        registry.register(Box::new(coherence.clone())).expect("unique metric");

        // stage series exist from the start so scrapes see zero counts
        for s in [
            stage::ASR,
            stage::AUDIO,
            stage::TEXT,
            stage::FUSION,
            stage::GUARDRAILS,
            stage::AUDIT,
        ] {
            stage_latency.with_label_values(&[s]);
        }

        Self {
            registry,
            stage_latency,
            pii_redactions,
            pipeline_errors,
            audio_snr_db,
            coherence,
        }
    }

    pub fn observe_stage(&self, stage: &str, elapsed: Duration) {
        self.stage_latency
            .with_label_values(&[stage])
            .observe(elapsed.as_secs_f64());
    }

    pub fn count_error(&self, stage: &str) {
        self.pipeline_errors.with_label_values(&[stage]).inc();
    }

    /// Text exposition format 0.0.4.
    pub fn render(&self) -> String {
        let mut buf = Vec::new();
        TextEncoder::new()
            .encode(&self.registry.gather(), &mut buf)
            .expect("text encoding cannot fail on gathered families");
        String::from_utf8(buf).expect("exposition is UTF-8")
    }

    pub fn dump(&self, path: &Path) -> std::io::Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, self.render())
    }

    /// Serves `/metrics` until the process exits.
    pub fn serve(&self, addr: &str) -> anyhow::Result<()> {
        let server = tiny_http::Server::http(addr).map_err(|e| anyhow::anyhow!("cannot bind {addr}: {e}"))?;
        log::info!("serving metrics on http://{addr}/metrics");
        let content_type = tiny_http::Header::from_bytes(&b"Content-Type"[..], &b"text/plain; version=0.0.4"[..])
            .expect("static header");
        for request in server.incoming_requests() {
            let response = if request.url() == "/metrics" {
                tiny_http::Response::from_string(self.render()).with_header(content_type.clone())
            } else {
                tiny_http::Response::from_string("not found").with_status_code(404)
            };
            if let Err(e) = request.respond(response) {
                log::warn!("metrics response failed: {e}");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exposition_carries_labels() {
        let m = Metrics::new("small", "run-1");
        m.audio_snr_db.set(21.5);
        m.coherence.set(0.8);
        m.pii_redactions.inc_by(2);
        m.observe_stage(stage::FUSION, Duration::from_millis(3));
        m.count_error(stage::AUDIT);
        let text = m.render();
        assert!(
            text.contains(r#"audio_snr_db{model_size="small",run_id="run-1"} 21.5"#),
            "{text}"
        );
        assert!(text.contains(r#"cross_modal_coherence{model_size="small",run_id="run-1"} 0.8"#));
        assert!(text.contains(r#"pii_redactions_total{model_size="small",run_id="run-1"} 2"#));
        assert!(
            text.contains(r#"pipeline_errors_total{model_size="small",run_id="run-1",stage="audit"} 1"#),
            "{text}"
        );
        assert!(text.contains(
            r#"pipeline_stage_latency_seconds_bucket{model_size="small",run_id="run-1",stage="fusion",le="0.005"} 1"#
        ));
        assert!(text.contains(r#"stage="asr_adapter""#));
    }

    #[test]
    fn serves_over_http() {
        let m = Metrics::new("small", "http");
        m.audio_snr_db.set(12.0);
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap().to_string();
        drop(listener);
        let served = m.clone();
        let addr_s = addr.clone();
        std::thread::spawn(move || served.serve(&addr_s));
        let mut body = String::new();
        for _ in 0..50 {
            if let Ok(mut stream) = std::net::TcpStream::connect(&addr) {
                use std::io::{Read, Write};
                stream.write_all(b"GET /metrics HTTP/1.0\r\n\r\n").unwrap();
                stream.read_to_string(&mut body).unwrap();
                break;
            }
            std::thread::sleep(Duration::from_millis(20));
        }
        assert!(body.contains("200"), "{body}");
        assert!(body.contains(r#"audio_snr_db{model_size="small",run_id="http"} 12"#));
    }
}
