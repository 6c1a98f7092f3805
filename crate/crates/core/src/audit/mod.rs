//! Audit trail: PII redaction, canonical events and their txids,
//! explainability artifacts, the JSONL log, Merkle aggregation and the
//! simulated anchoring ledger with offline verification.

mod artifact;
mod canonical;
mod cost;
mod event;
mod ledger;
mod log;
mod merkle;
mod redact;

use thiserror::Error;

pub use artifact::{export_explainability_artifact, intensity, ArtifactPaths, RuleMatrix, CELL_PX};
pub use canonical::{
    canonicalize, canonicalize_value, compute_txid, format_real, is_valid_txid, recanonicalize, CANONICAL_VERSION,
};
pub use cost::{estimate_anchor_cost, GAS_PER_ANCHOR};
pub use event::{AcousticRecord, AuditEvent, EscalationBlock, Weights};
pub use ledger::{
    compute_block_hash, compute_tx_hash, load_blocks, pending_path, verify_anchorage, verify_anchorage_file,
    verify_chain, AnchorRecord, AnchorStatus, Anchorer, ChainError, Ledger, LedgerBlock, LedgerEntry, SealPolicy,
    Verdict, GENESIS_PREVIOUS_HASH,
};
pub use log::{append_audit_log, AuditLog};
pub use merkle::{merkle_proof, merkle_root, merkle_verify, MerkleProof, MerkleTree};
pub use redact::{redact_pii, PiiClass, RedactionReport, Redactor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CanonicalizationError {
    #[error("non-finite number: {0}")]
    NonFinite(String),

    #[error("{field} = {value} is out of range")]
    OutOfRange { field: String, value: f64 },

    #[error("inconsistent event: {0}")]
    Inconsistent(String),

    #[error("cannot serialize: {0}")]
    Serialize(String),

    #[error("cannot parse: {0}")]
    Parse(String),
}

#[derive(Debug, Error)]
pub enum AuditWriteError {
    #[error("audit log {path}: {message}")]
    Io { path: String, message: String },

    #[error("audit record contains a newline")]
    EmbeddedNewline,

    #[error("audit log writer poisoned by a panicked thread")]
    Poisoned,
}

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },

    #[error("cannot encode artifact: {0}")]
    Encode(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MerkleError {
    #[error("cannot build a Merkle tree over zero leaves")]
    EmptyBatch,

    #[error("leaf is not a 32-byte hex digest: {0}")]
    InvalidLeaf(String),

    #[error("leaf index {index} out of range for {len} leaves")]
    IndexOutOfRange { index: usize, len: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnchorError {
    #[error("not a 64-character lowercase hex txid: {0}")]
    InvalidTxid(String),

    #[error("ledger corrupted: {0}")]
    Corrupt(String),

    #[error("ledger storage {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CostError {
    #[error("{name} must be finite and non-negative, got {value}")]
    InvalidInput { name: &'static str, value: f64 },

    #[error("batch size must be at least 1")]
    EmptyBatch,
}
