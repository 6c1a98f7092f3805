//! Append-only JSONL audit log, one canonical event per line.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::AuditWriteError;

#[derive(Debug)]
struct Writer {
    file: File,
    lines: u64,
}

/// Serializes appends from any number of threads onto one file handle
/// opened in append mode.
#[derive(Debug)]
pub struct AuditLog {
    path: PathBuf,
    writer: Mutex<Writer>,
}

fn io_error(path: &Path, e: std::io::Error) -> AuditWriteError {
    AuditWriteError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

impl AuditLog {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, AuditWriteError> {
        let path = path.into();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| io_error(parent, e))?;
        }
        let lines = match File::open(&path) {
            Ok(f) => BufReader::new(f).split(b'\n').count() as u64,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => 0,
            Err(e) => return Err(io_error(&path, e)),
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| io_error(&path, e))?;
        Ok(Self {
            path,
            writer: Mutex::new(Writer { file, lines }),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends `bytes` plus a newline in a single write and returns the
    /// 1-based line number.
    pub fn append(&self, bytes: &[u8]) -> Result<u64, AuditWriteError> {
        if bytes.contains(&b'\n') {
            return Err(AuditWriteError::EmbeddedNewline);
        }
        let mut record = Vec::with_capacity(bytes.len() + 1);
        record.extend_from_slice(bytes);
        record.push(b'\n');
        let mut w = self.writer.lock().map_err(|_| AuditWriteError::Poisoned)?;
        w.file.write_all(&record).map_err(|e| io_error(&self.path, e))?;
        w.file.flush().map_err(|e| io_error(&self.path, e))?;
        w.lines += 1;
        Ok(w.lines)
    }

    pub fn line_count(&self) -> u64 {
        self.writer.lock().map(|w| w.lines).unwrap_or(0)
    }
}

/// Convenience wrapper for one-off appends.
pub fn append_audit_log(bytes: &[u8], path: &Path) -> Result<u64, AuditWriteError> {
    AuditLog::open(path)?.append(bytes)
}
