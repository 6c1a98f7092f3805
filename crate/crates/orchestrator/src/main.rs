use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use affex::config::{load_config, ConfigError, PipelineConfig};
use affex::corpus::{generate_corpus, CorpusSpec};
use affex::eval::{read_manifest, run_batch_eval, Variant};
use affex::metrics::Metrics;
use affex::pipeline::{Pipeline, TurnInput};
use affex_core::audit::{verify_anchorage_file, Ledger, Verdict};
use affex_core::clock::SystemClock;
use affex_core::text::TextAnalyzer;
use clap::{Parser, Subcommand};

const EXIT_CONFIG: u8 = 1;
const EXIT_VERIFY: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "affex", version, about = "Auditable multimodal affect pipeline")]
struct Cli {
    /// YAML configuration; `APP__SECTION__KEY` variables override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one turn and print the response, txid and anchor record.
    Analyze {
        #[arg(long)]
        audio: PathBuf,
        #[arg(long)]
        transcript: String,
        #[arg(long)]
        asr_confidence: f64,
        #[arg(long, default_value = "cli")]
        session: String,
        /// Print the full audit event as well.
        #[arg(long)]
        event: bool,
    },
    /// Evaluate baselines and ablations over a JSONL manifest.
    BatchEval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "reports")]
        out: PathBuf,
        /// Comma-separated variant names; defaults to all of them.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<Variant>,
    },
    /// Write a seeded synthetic corpus (WAVs plus manifest.jsonl).
    GenCorpus {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        size: usize,
    },
    /// Check stored event bytes against a txid and the ledger.
    Verify {
        /// File holding the canonical event; with --line, an audit log.
        #[arg(long)]
        event: PathBuf,
        /// 1-based line of the audit log to check.
        #[arg(long)]
        line: Option<usize>,
        #[arg(long)]
        txid: String,
        /// Defaults to the configured ledger path.
        #[arg(long)]
        ledger: Option<PathBuf>,
    },
    /// Show the anchoring record of a txid.
    AnchorStatus {
        #[arg(long)]
        txid: String,
        #[arg(long)]
        ledger: Option<PathBuf>,
    },
    /// Serve Prometheus metrics on the configured port.
    MetricsServe {
        #[arg(long)]
        addr: Option<String>,
    },
}

enum Failure {
    Config(ConfigError),
    Verification(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast::<ConfigError>() {
            Ok(c) => Failure::Config(c),
            Err(e) => Failure::Runtime(e),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Verification(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(EXIT_VERIFY)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let config = load_config(cli.config.as_deref(), None).map_err(Failure::Config)?;
    match cli.command {
        Command::Analyze {
            audio,
            transcript,
            asr_confidence,
            session,
            event,
        } => analyze(config, audio, transcript, asr_confidence, session, event)?,
        Command::BatchEval {
            manifest,
            out,
            variants,
        } => batch_eval(config, &manifest, &out, variants)?,
        Command::GenCorpus { out, seed, size } => {
            let analyzer = TextAnalyzer::from_config(&config.text).map_err(anyhow::Error::from)?;
            let spec = CorpusSpec {
                seed,
                size,
                ..CorpusSpec::default()
            };
            let rows = generate_corpus(&spec, &analyzer, &out)?;
            println!("wrote {} rows to {}", rows.len(), out.join("manifest.jsonl").display());
        }
        Command::Verify {
            event,
            line,
            txid,
            ledger,
        } => verify(&config, &event, line, &txid, ledger)?,
        Command::AnchorStatus { txid, ledger } => {
            let path = ledger.unwrap_or_else(|| config.anchoring.ledger_path.clone());
            let ledger = Ledger::open(
                &path,
                config.anchoring.sender.clone(),
                config.anchoring.seal,
                Arc::new(SystemClock),
            )
            .map_err(anyhow::Error::from)?;
            match ledger.record(&txid) {
                Some(record) => println!("{}", to_json(&record)?),
                None => return Err(Failure::Verification(format!("{txid} is not in {}", path.display()))),
            }
        }
        Command::MetricsServe { addr } => {
            let metrics = Metrics::new(&config.run.model_size, &config.run.run_id);
            let addr = addr.unwrap_or_else(|| format!("0.0.0.0:{}", config.metrics.port));
            metrics.serve(&addr)?;
        }
    }
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(value)?)
}

fn analyze(
    config: PipelineConfig,
    audio: PathBuf,
    transcript: String,
    asr_confidence: f64,
    session: String,
    print_event: bool,
) -> anyhow::Result<()> {
    let dump = config.metrics.dump_path.clone();
    let mut pipeline = Pipeline::new(config)?;
    let outcome = pipeline.run_turn(&TurnInput {
        audio,
        transcript,
        asr_confidence,
        session_id: session,
    })?;
    println!("{}", outcome.response);
    let mut summary = serde_json::json!({
        "txid": outcome.txid,
        "audit_line": outcome.audit_line,
        "anchor": outcome.anchor,
        "mode": outcome.event.mode,
        "w_text": outcome.event.weights.w_text,
        "coherence": outcome.event.coherence,
        "escalation": outcome.inference.escalation.triggered,
    });
    if print_event {
        summary["event"] = serde_json::to_value(&outcome.event)?;
    }
    println!("{}", to_json(&summary)?);
    if let Some(handle) = outcome.notification {
        if let Ok(status) = handle.join() {
            log::info!("escalation webhook: {status:?}");
        }
    }
    pipeline.shutdown();
    if let Some(path) = dump {
        pipeline.metrics().dump(&path)?;
    }
    Ok(())
}

fn batch_eval(config: PipelineConfig, manifest: &Path, out: &Path, variants: Vec<Variant>) -> anyhow::Result<()> {
    let variants = if variants.is_empty() {
        Variant::BASELINES
            .iter()
            .chain(Variant::ABLATIONS.iter())
            .copied()
            .collect()
    } else {
        variants
    };
    let dump = config.metrics.dump_path.clone();
    let rows = read_manifest(manifest)?;
    let mut pipeline = Pipeline::new(config)?;
    let report = run_batch_eval(&pipeline, &rows, &variants)?;
    let written = report.write(out)?;
    println!("{}", report.summary_table());
    for path in written {
        log::info!("wrote {}", path.display());
    }
    pipeline.shutdown();
    if let Some(path) = dump {
        pipeline.metrics().dump(&path)?;
    }
    Ok(())
}

fn verify(
    config: &PipelineConfig,
    event: &Path,
    line: Option<usize>,
    txid: &str,
    ledger: Option<PathBuf>,
) -> Result<(), Failure> {
    let raw = std::fs::read(event).map_err(|e| anyhow::anyhow!("reading {}: {e}", event.display()))?;
    let bytes: Vec<u8> = match line {
        Some(n) => raw
            .split(|&b| b == b'\n')
            .nth(n.saturating_sub(1))
            .filter(|_| n >= 1)
            .ok_or_else(|| anyhow::anyhow!("{} has no line {n}", event.display()))?
            .to_vec(),
        None => raw.strip_suffix(b"\n").unwrap_or(&raw).to_vec(),
    };
    let path = ledger.unwrap_or_else(|| config.anchoring.ledger_path.clone());
    let verdict = verify_anchorage_file(&bytes, txid, &path);
    println!("{}", to_json(&verdict)?);
    match verdict {
        Verdict::Verified { .. } => Ok(()),
        Verdict::TamperDetected { computed, .. } => Err(Failure::Verification(format!("content hashes to {computed}"))),
        Verdict::NotAnchored => Err(Failure::Verification(format!("{txid} is not anchored"))),
        Verdict::VerificationUnavailable { reason } => Err(Failure::Verification(reason)),
    }
}
