//! Simulated anchoring ledger: a hash chain of sealed blocks fed by an
//! asynchronous submission queue, plus offline verification of stored
//! events against it.

use std::collections::{HashMap, VecDeque};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::clock::{format_timestamp, Clock};

use super::canonical::{canonicalize_value, compute_txid, is_valid_txid};
use super::cost::GAS_PER_ANCHOR;
use super::merkle::merkle_root;
use super::AnchorError;

pub const GENESIS_PREVIOUS_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub txid: String,
    pub sender: String,
    pub tx_hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerBlock {
    pub block_number: u64,
    pub timestamp: String,
    pub entries: Vec<LedgerEntry>,
    /// Merkle root over the entry txids.
    pub merkle_root: String,
    pub previous_block_hash: String,
    pub block_hash: String,
}

/// SHA-256 over `block_number (u64 BE) | txid | sender | index (u32 BE)`.
pub fn compute_tx_hash(block_number: u64, txid: &str, sender: &str, index: u32) -> String {
    let mut h = Sha256::new();
    h.update(block_number.to_be_bytes());
    h.update(txid.as_bytes());
    h.update(sender.as_bytes());
    h.update(index.to_be_bytes());
    hex::encode(h.finalize())
}

/// SHA-256 over the canonical JSON of every block field but the hash.
pub fn compute_block_hash(
    block_number: u64,
    timestamp: &str,
    entries: &[LedgerEntry],
    merkle_root: &str,
    previous_block_hash: &str,
) -> String {
    let content = json!({
        "block_number": block_number,
        "timestamp": timestamp,
        "entries": entries,
        "merkle_root": merkle_root,
        "previous_block_hash": previous_block_hash,
    });
    let bytes = canonicalize_value(&content).expect("block content holds no reals");
    compute_txid(&bytes)
}

impl LedgerBlock {
    fn build(block_number: u64, timestamp: String, txids: &[String], sender: &str, previous: &str) -> Self {
        let entries: Vec<LedgerEntry> = txids
            .iter()
            .enumerate()
            .map(|(i, txid)| LedgerEntry {
                txid: txid.clone(),
                sender: sender.to_string(),
                tx_hash: compute_tx_hash(block_number, txid, sender, i as u32),
            })
            .collect();
        let root = merkle_root(txids).expect("sealed blocks are non-empty and hold valid txids");
        let block_hash = compute_block_hash(block_number, &timestamp, &entries, &root, previous);
        Self {
            block_number,
            timestamp,
            entries,
            merkle_root: root,
            previous_block_hash: previous.to_string(),
            block_hash,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("ledger chain broken at block {block_number}: {reason}")]
pub struct ChainError {
    pub block_number: u64,
    pub reason: String,
}

/// Recomputes every block from genesis: numbering, back links, entry
/// hashes, Merkle roots and block hashes.
pub fn verify_chain(blocks: &[LedgerBlock]) -> Result<(), ChainError> {
    let mut previous = GENESIS_PREVIOUS_HASH.to_string();
    for (i, b) in blocks.iter().enumerate() {
        let fail = |reason: &str| ChainError {
            block_number: i as u64,
            reason: reason.to_string(),
        };
        if b.block_number != i as u64 {
            return Err(fail("block number out of sequence"));
        }
        if b.previous_block_hash != previous {
            return Err(fail("previous_block_hash does not match"));
        }
        if b.entries.is_empty() {
            return Err(fail("block has no entries"));
        }
        for (k, e) in b.entries.iter().enumerate() {
            if !is_valid_txid(&e.txid) || e.tx_hash != compute_tx_hash(b.block_number, &e.txid, &e.sender, k as u32) {
                return Err(fail(&format!("entry {k} does not match its tx_hash")));
            }
        }
        let txids: Vec<String> = b.entries.iter().map(|e| e.txid.clone()).collect();
        if merkle_root(&txids).ok().as_deref() != Some(b.merkle_root.as_str()) {
            return Err(fail("merkle root does not match entries"));
        }
        let expected = compute_block_hash(
            b.block_number,
            &b.timestamp,
            &b.entries,
            &b.merkle_root,
            &b.previous_block_hash,
        );
        if b.block_hash != expected {
            return Err(fail("block hash does not match content"));
        }
        previous = b.block_hash.clone();
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorStatus {
    Disabled,
    Submitted,
    Anchored,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorRecord {
    pub txid: String,
    pub status: AnchorStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_number: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tx_hash: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sender: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gas_used: Option<u64>,
}

impl AnchorRecord {
    pub fn disabled(txid: &str) -> Self {
        Self {
            txid: txid.to_string(),
            status: AnchorStatus::Disabled,
            block_number: None,
            tx_hash: None,
            sender: None,
            gas_used: None,
        }
    }

    fn submitted(txid: &str, sender: &str) -> Self {
        Self {
            sender: Some(sender.to_string()),
            status: AnchorStatus::Submitted,
            ..Self::disabled(txid)
        }
    }

    fn anchored(block: &LedgerBlock, entry: &LedgerEntry) -> Self {
        Self {
            txid: entry.txid.clone(),
            status: AnchorStatus::Anchored,
            block_number: Some(block.block_number),
            tx_hash: Some(entry.tx_hash.clone()),
            sender: Some(entry.sender.clone()),
            gas_used: Some(GAS_PER_ANCHOR),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SealPolicy {
    /// Seal whatever is pending at least this often.
    #[serde(rename = "block_interval_ms", with = "millis")]
    pub block_interval: Duration,
    /// Seal as soon as this many entries are pending; also the block size cap.
    pub max_block_entries: usize,
    /// Pending entries beyond this wait in an overflow list and are retried.
    pub queue_capacity: usize,
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

impl Default for SealPolicy {
    fn default() -> Self {
        Self {
            block_interval: Duration::from_secs(2),
            max_block_entries: 128,
            queue_capacity: 4096,
        }
    }
}

#[derive(Debug, Default)]
struct State {
    blocks: Vec<LedgerBlock>,
    // txid -> (block, entry index)
    index: HashMap<String, (usize, usize)>,
    pending: VecDeque<String>,
    overflow: VecDeque<String>,
    pending_dirty: bool,
    last_error: Option<String>,
}

impl State {
    fn record(&self, txid: &str, sender: &str) -> Option<AnchorRecord> {
        if let Some(&(b, e)) = self.index.get(txid) {
            let block = &self.blocks[b];
            return Some(AnchorRecord::anchored(block, &block.entries[e]));
        }
        let queued = self.pending.iter().chain(self.overflow.iter()).any(|t| t == txid);
        queued.then(|| AnchorRecord::submitted(txid, sender))
    }

    fn queued(&self) -> usize {
        self.pending.len() + self.overflow.len()
    }
}

#[derive(Debug, Clone)]
struct Storage {
    blocks: PathBuf,
    pending: PathBuf,
}

/// Sealed blocks plus the submission queue. Sealed state is persisted as
/// a JSON array of blocks; the queue goes to a sibling `.pending.json`.
pub struct Ledger {
    sender: String,
    policy: SealPolicy,
    clock: Arc<dyn Clock>,
    storage: Option<Storage>,
    state: Mutex<State>,
    sealed: Condvar,
    work: Condvar,
}

impl std::fmt::Debug for Ledger {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Ledger")
            .field("sender", &self.sender)
            .field("policy", &self.policy)
            .field("storage", &self.storage)
            .finish_non_exhaustive()
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> AnchorError {
    AnchorError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), AnchorError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

pub fn pending_path(blocks_path: &Path) -> PathBuf {
    blocks_path.with_extension("pending.json")
}

/// Reads a blocks file. A missing file is an empty ledger.
pub fn load_blocks(path: &Path) -> Result<Vec<LedgerBlock>, AnchorError> {
    match std::fs::read(path) {
        Ok(bytes) => {
            serde_json::from_slice(&bytes).map_err(|e| AnchorError::Corrupt(format!("{}: {e}", path.display())))
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(io_err(path, e)),
    }
}

impl Ledger {
    pub fn in_memory(sender: impl Into<String>, policy: SealPolicy, clock: Arc<dyn Clock>) -> Self {
        Self {
            sender: sender.into(),
            policy,
            clock,
            storage: None,
            state: Mutex::new(State::default()),
            sealed: Condvar::new(),
            work: Condvar::new(),
        }
    }

    /// Loads and re-validates an existing ledger, or starts an empty one.
    pub fn open(
        path: impl Into<PathBuf>,
        sender: impl Into<String>,
        policy: SealPolicy,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, AnchorError> {
        let blocks_path = path.into();
        let blocks = load_blocks(&blocks_path)?;
        verify_chain(&blocks).map_err(|e| AnchorError::Corrupt(e.to_string()))?;
        let storage = Storage {
            pending: pending_path(&blocks_path),
            blocks: blocks_path,
        };
        let pending: Vec<String> = match std::fs::read(&storage.pending) {
            Ok(bytes) => serde_json::from_slice(&bytes)
                .map_err(|e| AnchorError::Corrupt(format!("{}: {e}", storage.pending.display())))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io_err(&storage.pending, e)),
        };
        let mut state = State::default();
        for (b, block) in blocks.iter().enumerate() {
            for (e, entry) in block.entries.iter().enumerate() {
                state.index.insert(entry.txid.clone(), (b, e));
            }
        }
        state.blocks = blocks;
        for txid in pending {
            if !state.index.contains_key(&txid) {
                state.pending.push_back(txid);
            }
        }
        let mut ledger = Self::in_memory(sender, policy, clock);
        ledger.storage = Some(storage);
        ledger.state = Mutex::new(state);
        Ok(ledger)
    }

    fn lock(&self) -> MutexGuard<'_, State> {
        self.state.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn sender(&self) -> &str {
        &self.sender
    }

    pub fn policy(&self) -> SealPolicy {
        self.policy
    }

    /// Queues a txid for the next block. Never blocks on I/O; when the
    /// queue is full the txid waits in an overflow list and is retried at
    /// the next seal.
    pub fn submit(&self, txid: &str) -> Result<AnchorRecord, AnchorError> {
        if !is_valid_txid(txid) {
            return Err(AnchorError::InvalidTxid(txid.to_string()));
        }
        let mut state = self.lock();
        if let Some(existing) = state.record(txid, &self.sender) {
            return Ok(existing);
        }
        if state.pending.len() < self.policy.queue_capacity {
            state.pending.push_back(txid.to_string());
        } else {
            state.overflow.push_back(txid.to_string());
        }
        state.pending_dirty = true;
        if state.pending.len() >= self.policy.max_block_entries {
            self.work.notify_all();
        }
        Ok(AnchorRecord::submitted(txid, &self.sender))
    }

    /// Seals up to `max_block_entries` pending txids into one block.
    pub fn seal(&self) -> Result<Option<LedgerBlock>, AnchorError> {
        let mut state = self.lock();
        while state.pending.len() < self.policy.queue_capacity {
            match state.overflow.pop_front() {
                Some(t) => state.pending.push_back(t),
                None => break,
            }
        }
        if state.pending.is_empty() {
            return Ok(None);
        }
        let take = state.pending.len().min(self.policy.max_block_entries.max(1));
        let txids: Vec<String> = state.pending.iter().take(take).cloned().collect();
        let number = state.blocks.len() as u64;
        let previous = state
            .blocks
            .last()
            .map_or(GENESIS_PREVIOUS_HASH.to_string(), |b| b.block_hash.clone());
        let block = LedgerBlock::build(
            number,
            format_timestamp(self.clock.now()),
            &txids,
            &self.sender,
            &previous,
        );

        if let Some(storage) = &self.storage {
            let mut all = state.blocks.clone();
            all.push(block.clone());
            let bytes = serde_json::to_vec_pretty(&all).map_err(|e| AnchorError::Corrupt(e.to_string()))?;
            write_atomic(&storage.blocks, &bytes)?;
            let rest: Vec<&String> = state.pending.iter().skip(take).chain(state.overflow.iter()).collect();
            write_atomic(&storage.pending, &serde_json::to_vec(&rest).expect("strings serialize"))?;
        }
        state.pending.drain(..take);
        let b = state.blocks.len();
        for (e, entry) in block.entries.iter().enumerate() {
            state.index.insert(entry.txid.clone(), (b, e));
        }
        state.blocks.push(block.clone());
        state.pending_dirty = false;
        drop(state);
        self.sealed.notify_all();
        Ok(Some(block))
    }

    /// Seals until nothing is queued; returns the number of blocks made.
    pub fn seal_all(&self) -> Result<usize, AnchorError> {
        let mut n = 0;
        while self.seal()?.is_some() {
            n += 1;
        }
        Ok(n)
    }

    /// Writes the queue file if it changed since the last write.
    pub fn flush_pending(&self) -> Result<(), AnchorError> {
        let Some(storage) = &self.storage else {
            return Ok(());
        };
        let mut state = self.lock();
        if !state.pending_dirty {
            return Ok(());
        }
        let queued: Vec<&String> = state.pending.iter().chain(state.overflow.iter()).collect();
        write_atomic(
            &storage.pending,
            &serde_json::to_vec(&queued).expect("strings serialize"),
        )?;
        state.pending_dirty = false;
        Ok(())
    }

    pub fn record(&self, txid: &str) -> Option<AnchorRecord> {
        self.lock().record(txid, &self.sender)
    }

    /// Blocks until `txid` is sealed or the timeout passes.
    pub fn wait_anchored(&self, txid: &str, timeout: Duration) -> Option<AnchorRecord> {
        let deadline = Instant::now() + timeout;
        let mut state = self.lock();
        loop {
            if let Some(r) = state
                .record(txid, &self.sender)
                .filter(|r| r.status == AnchorStatus::Anchored)
            {
                return Some(r);
            }
            let now = Instant::now();
            if now >= deadline {
                return None;
            }
            state = self
                .sealed
                .wait_timeout(state, deadline - now)
                .unwrap_or_else(|p| p.into_inner())
                .0;
        }
    }

    pub fn blocks(&self) -> Vec<LedgerBlock> {
        self.lock().blocks.clone()
    }

    pub fn block(&self, number: u64) -> Option<LedgerBlock> {
        self.lock().blocks.get(number as usize).cloned()
    }

    pub fn queued(&self) -> usize {
        self.lock().queued()
    }

    pub fn last_error(&self) -> Option<String> {
        self.lock().last_error.clone()
    }

    fn note_error(&self, e: &AnchorError) {
        self.lock().last_error = Some(e.to_string());
    }
}

/// Front door for anchoring: disabled, manually sealed, or sealed by a
/// background thread according to the ledger's policy.
pub struct Anchorer {
    ledger: Option<Arc<Ledger>>,
    stop: Arc<AtomicBool>,
    worker: Option<JoinHandle<()>>,
}

impl std::fmt::Debug for Anchorer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Anchorer")
            .field("enabled", &self.ledger.is_some())
            .field("background", &self.worker.is_some())
            .finish()
    }
}

impl Anchorer {
    pub fn disabled() -> Self {
        Self {
            ledger: None,
            stop: Arc::new(AtomicBool::new(false)),
            worker: None,
        }
    }

    /// Submissions queue until the caller seals the ledger.
    pub fn manual(ledger: Arc<Ledger>) -> Self {
        Self {
            ledger: Some(ledger),
            stop: Arc::new(AtomicBool::new(false)),
            worker: None,
        }
    }

    /// Spawns the sealing thread.
    pub fn background(ledger: Arc<Ledger>) -> Self {
        let stop = Arc::new(AtomicBool::new(false));
        let worker = {
            let ledger = Arc::clone(&ledger);
            let stop = Arc::clone(&stop);
            std::thread::Builder::new()
                .name("ledger-sealer".into())
                .spawn(move || seal_loop(&ledger, &stop))
                .expect("spawn sealing thread")
        };
        Self {
            ledger: Some(ledger),
            stop,
            worker: Some(worker),
        }
    }

    pub fn ledger(&self) -> Option<&Arc<Ledger>> {
        self.ledger.as_ref()
    }

    pub fn is_enabled(&self) -> bool {
        self.ledger.is_some()
    }

    pub fn anchor_txid(&self, txid: &str) -> Result<AnchorRecord, AnchorError> {
        match &self.ledger {
            None => {
                if !is_valid_txid(txid) {
                    return Err(AnchorError::InvalidTxid(txid.to_string()));
                }
                Ok(AnchorRecord::disabled(txid))
            }
            Some(ledger) => ledger.submit(txid),
        }
    }

    /// Stops the sealing thread after it seals everything queued.
    pub fn shutdown(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(ledger) = &self.ledger {
            ledger.work.notify_all();
        }
        if let Some(worker) = self.worker.take() {
            let _ = worker.join();
        }
    }
}

impl Drop for Anchorer {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn seal_loop(ledger: &Ledger, stop: &AtomicBool) {
    let interval = ledger.policy.block_interval;
    let mut last_seal = Instant::now();
    loop {
        {
            let mut state = ledger.lock();
            loop {
                if stop.load(Ordering::SeqCst) || state.pending.len() >= ledger.policy.max_block_entries {
                    break;
                }
                let elapsed = last_seal.elapsed();
                if elapsed >= interval {
                    break;
                }
                state = ledger
                    .work
                    .wait_timeout(state, interval - elapsed)
                    .unwrap_or_else(|p| p.into_inner())
                    .0;
            }
        }
        let stopping = stop.load(Ordering::SeqCst);
        let result = if stopping {
            ledger.seal_all().map(|_| ())
        } else {
            ledger.seal().map(|_| ())
        };
        let result = result.and_then(|_| ledger.flush_pending());
        if let Err(e) = result {
            ledger.note_error(&e);
        }
        last_seal = Instant::now();
        if stopping {
            return;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Verified {
        block_number: u64,
        tx_hash: String,
        sender: String,
    },
    TamperDetected {
        claimed: String,
        computed: String,
    },
    NotAnchored,
    VerificationUnavailable {
        reason: String,
    },
}

/// Hashes the stored bytes, compares to the claimed txid and looks the
/// txid up in a chain that must validate from genesis.
pub fn verify_anchorage(event_bytes: &[u8], claimed_txid: &str, blocks: &[LedgerBlock]) -> Verdict {
    let computed = compute_txid(event_bytes);
    if computed != claimed_txid.trim().to_ascii_lowercase() {
        return Verdict::TamperDetected {
            claimed: claimed_txid.to_string(),
            computed,
        };
    }
    if let Err(e) = verify_chain(blocks) {
        return Verdict::VerificationUnavailable { reason: e.to_string() };
    }
    blocks
        .iter()
        .find_map(|b| {
            b.entries
                .iter()
                .find(|e| e.txid == computed)
                .map(|e| Verdict::Verified {
                    block_number: b.block_number,
                    tx_hash: e.tx_hash.clone(),
                    sender: e.sender.clone(),
                })
        })
        .unwrap_or(Verdict::NotAnchored)
}

/// As [`verify_anchorage`], reading the ledger from its blocks file.
pub fn verify_anchorage_file(event_bytes: &[u8], claimed_txid: &str, ledger_path: &Path) -> Verdict {
    let blocks = match std::fs::read(ledger_path) {
        Ok(bytes) => match serde_json::from_slice::<Vec<LedgerBlock>>(&bytes) {
            Ok(b) => b,
            Err(e) => {
                return Verdict::VerificationUnavailable {
                    reason: format!("{}: {e}", ledger_path.display()),
                }
            }
        },
        Err(e) => {
            return Verdict::VerificationUnavailable {
                reason: format!("{}: {e}", ledger_path.display()),
            }
        }
    };
    verify_anchorage(event_bytes, claimed_txid, &blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::ManualClock;

    fn txid(i: usize) -> String {
        compute_txid(format!("event {i}").as_bytes())
    }

    fn manual_ledger(policy: SealPolicy) -> Arc<Ledger> {
        Arc::new(Ledger::in_memory("0xaffe", policy, Arc::new(ManualClock::pinned())))
    }

    #[test]
    fn tx_hash_layout() {
        let mut bytes = 3u64.to_be_bytes().to_vec();
        bytes.extend(txid(0).as_bytes());
        bytes.extend(b"0xaffe");
        bytes.extend(1u32.to_be_bytes());
        assert_eq!(compute_tx_hash(3, &txid(0), "0xaffe", 1), compute_txid(&bytes));
    }

    #[test]
    fn disabled_anchoring() {
        let a = Anchorer::disabled();
        let r = a.anchor_txid(&txid(1)).unwrap();
        assert_eq!(r.status, AnchorStatus::Disabled);
        assert!(r.block_number.is_none());
        assert!(a.anchor_txid("nothex").is_err());
    }

    #[test]
    fn submitted_then_anchored() {
        let ledger = manual_ledger(SealPolicy::default());
        let a = Anchorer::manual(Arc::clone(&ledger));
        let t = txid(1);
        let r = a.anchor_txid(&t).unwrap();
        assert_eq!(r.status, AnchorStatus::Submitted);
        assert_eq!(ledger.record(&t).unwrap().status, AnchorStatus::Submitted);
        let block = ledger.seal().unwrap().unwrap();
        assert_eq!(block.block_number, 0);
        assert_eq!(block.previous_block_hash, GENESIS_PREVIOUS_HASH);
        let r = ledger.record(&t).unwrap();
        assert_eq!(r.status, AnchorStatus::Anchored);
        assert_eq!(r.block_number, Some(0));
        assert_eq!(r.gas_used, Some(47_000));
        assert_eq!(r.tx_hash.unwrap(), compute_tx_hash(0, &t, "0xaffe", 0));
        // resubmitting an anchored txid reports the existing anchor
        assert_eq!(a.anchor_txid(&t).unwrap().status, AnchorStatus::Anchored);
        assert!(ledger.seal().unwrap().is_none());
    }

    #[test]
    fn block_size_cap_and_overflow_retry() {
        let policy = SealPolicy {
            max_block_entries: 4,
            queue_capacity: 6,
            ..SealPolicy::default()
        };
        let ledger = manual_ledger(policy);
        for i in 0..10 {
            assert_eq!(ledger.submit(&txid(i)).unwrap().status, AnchorStatus::Submitted);
        }
        assert_eq!(ledger.queued(), 10);
        assert_eq!(ledger.seal_all().unwrap(), 3);
        let blocks = ledger.blocks();
        assert_eq!(blocks.iter().map(|b| b.entries.len()).collect::<Vec<_>>(), [4, 4, 2]);
        let order: Vec<String> = blocks
            .iter()
            .flat_map(|b| b.entries.iter().map(|e| e.txid.clone()))
            .collect();
        assert_eq!(order, (0..10).map(txid).collect::<Vec<_>>());
        verify_chain(&blocks).unwrap();
    }

    #[test]
    fn chain_detects_mutation() {
        let ledger = manual_ledger(SealPolicy {
            max_block_entries: 2,
            ..SealPolicy::default()
        });
        for i in 0..8 {
            ledger.submit(&txid(i)).unwrap();
        }
        ledger.seal_all().unwrap();
        let blocks = ledger.blocks();
        verify_chain(&blocks).unwrap();

        let mut bad = blocks.clone();
        bad[1].entries[0].txid = txid(99);
        assert_eq!(verify_chain(&bad).unwrap_err().block_number, 1);

        let mut bad = blocks.clone();
        bad[2].timestamp = "2030-01-01T00:00:00Z".into();
        assert_eq!(verify_chain(&bad).unwrap_err().block_number, 2);

        // recomputing one block's hash still breaks its successor
        let mut bad = blocks.clone();
        bad[0].entries[1].txid = txid(77);
        bad[0].entries[1].tx_hash = compute_tx_hash(0, &txid(77), "0xaffe", 1);
        bad[0].merkle_root = merkle_root(&[txid(0), txid(77)]).unwrap();
        bad[0].block_hash = compute_block_hash(
            0,
            &bad[0].timestamp,
            &bad[0].entries,
            &bad[0].merkle_root,
            GENESIS_PREVIOUS_HASH,
        );
        assert_eq!(verify_chain(&bad).unwrap_err().block_number, 1);
    }

    #[test]
    fn verification_verdicts() {
        let ledger = manual_ledger(SealPolicy::default());
        let event = br#"{"a":1}"#;
        let t = compute_txid(event);
        ledger.submit(&t).unwrap();
        assert_eq!(verify_anchorage(event, &t, &ledger.blocks()), Verdict::NotAnchored);
        ledger.seal().unwrap();
        let blocks = ledger.blocks();
        assert!(matches!(
            verify_anchorage(event, &t, &blocks),
            Verdict::Verified { block_number: 0, .. }
        ));
        assert!(matches!(
            verify_anchorage(br#"{"a":2}"#, &t, &blocks),
            Verdict::TamperDetected { .. }
        ));
        let missing = Path::new("/nonexistent/ledger.json");
        assert!(matches!(
            verify_anchorage_file(event, &t, missing),
            Verdict::VerificationUnavailable { .. }
        ));
    }

    #[test]
    fn persistence_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger/ledger.json");
        let clock: Arc<dyn Clock> = Arc::new(ManualClock::pinned());
        {
            let ledger = Ledger::open(&path, "0xaffe", SealPolicy::default(), Arc::clone(&clock)).unwrap();
            ledger.submit(&txid(0)).unwrap();
            ledger.seal().unwrap();
            ledger.submit(&txid(1)).unwrap();
            ledger.flush_pending().unwrap();
        }
        let pending: Vec<String> = serde_json::from_slice(&std::fs::read(pending_path(&path)).unwrap()).unwrap();
        assert_eq!(pending, [txid(1)]);
        let ledger = Ledger::open(&path, "0xaffe", SealPolicy::default(), Arc::clone(&clock)).unwrap();
        assert_eq!(ledger.record(&txid(0)).unwrap().status, AnchorStatus::Anchored);
        assert_eq!(ledger.record(&txid(1)).unwrap().status, AnchorStatus::Submitted);
        ledger.seal().unwrap();
        assert_eq!(ledger.record(&txid(1)).unwrap().block_number, Some(1));
        assert!(matches!(
            verify_anchorage_file(b"event 1", &txid(1), &path),
            Verdict::Verified { block_number: 1, .. }
        ));

        // corrupt the file on disk: reopening refuses it
        let text = std::fs::read_to_string(&path).unwrap().replace(&txid(0), &txid(5));
        std::fs::write(&path, text).unwrap();
        assert!(matches!(
            Ledger::open(&path, "0xaffe", SealPolicy::default(), clock),
            Err(AnchorError::Corrupt(_))
        ));
    }

    #[test]
    fn background_sealing_by_size_and_interval() {
        let policy = SealPolicy {
            block_interval: Duration::from_millis(50),
            max_block_entries: 3,
            queue_capacity: 100,
        };
        let ledger = Arc::new(Ledger::in_memory("0xaffe", policy, Arc::new(crate::clock::SystemClock)));
        let anchorer = Anchorer::background(Arc::clone(&ledger));
        for i in 0..7 {
            anchorer.anchor_txid(&txid(i)).unwrap();
        }
        for i in 0..7 {
            assert!(
                ledger.wait_anchored(&txid(i), Duration::from_secs(5)).is_some(),
                "txid {i}"
            );
        }
        verify_chain(&ledger.blocks()).unwrap();
        assert!(ledger.blocks().iter().all(|b| b.entries.len() <= 3));
    }

    #[test]
    fn drop_seals_remaining() {
        let policy = SealPolicy {
            block_interval: Duration::from_secs(3600),
            ..SealPolicy::default()
        };
        let ledger = Arc::new(Ledger::in_memory("0xaffe", policy, Arc::new(ManualClock::pinned())));
        let anchorer = Anchorer::background(Arc::clone(&ledger));
        anchorer.anchor_txid(&txid(1)).unwrap();
        assert_eq!(ledger.record(&txid(1)).unwrap().status, AnchorStatus::Submitted);
        drop(anchorer);
        assert_eq!(ledger.record(&txid(1)).unwrap().status, AnchorStatus::Anchored);
    }
}
