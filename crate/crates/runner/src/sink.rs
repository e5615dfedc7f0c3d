//! Append-only sinks for raw responses. The JSONL sink flushes after every
//! record so a crash loses at most the line being written.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use proctor_core::export::{read_jsonl, write_jsonl, ExportError};
use proctor_core::record::RawResponse;

#[derive(Debug, Error)]
pub enum SinkError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to serialize record: {0}")]
    Serialize(#[from] serde_json::Error),
    #[error(transparent)]
    Existing(#[from] ExportError),
    #[error("injected failure after {0} appends")]
    Injected(usize),
}

pub trait RecordSink: Send {
    fn append(&mut self, record: &RawResponse) -> Result<(), SinkError>;
}

/// One JSON object per line, appended and flushed record by record. Opening
/// an existing file keeps its content, which is what resume relies on.
pub struct JsonlSink {
    file: File,
    path: PathBuf,
}

impl JsonlSink {
    pub fn append_to(path: &Path) -> Result<Self, SinkError> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|source| SinkError::Io { path: path.display().to_string(), source })?;
        Ok(Self { file, path: path.to_owned() })
    }

    /// Reopens a possibly interrupted sink file: returns the complete
    /// records already in it and a sink appending after them. A partial
    /// trailing line from a crash is cut off first, otherwise the next
    /// append would fuse with the fragment into a corrupt line.
    pub fn resume(path: &Path) -> Result<(Vec<RawResponse>, Self), SinkError> {
        let existing = if path.exists() {
            let file = read_jsonl::<RawResponse>(path)?;
            if file.truncated {
                write_jsonl(path, &file.records)?;
            }
            file.records
        } else {
            Vec::new()
        };
        Ok((existing, Self::append_to(path)?))
    }
}

impl RecordSink for JsonlSink {
    fn append(&mut self, record: &RawResponse) -> Result<(), SinkError> {
        let mut line = serde_json::to_string(record)?;
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|()| self.file.flush())
            .map_err(|source| SinkError::Io { path: self.path.display().to_string(), source })
    }
}

/// Collects records in memory; test plumbing.
#[derive(Default)]
pub struct MemorySink {
    pub records: Vec<RawResponse>,
}

impl RecordSink for MemorySink {
    fn append(&mut self, record: &RawResponse) -> Result<(), SinkError> {
        self.records.push(record.clone());
        Ok(())
    }
}

/// Wraps a sink and fails every append from the `fail_after`-th one on,
/// simulating a crash mid-run.
pub struct FailingSink<S> {
    inner: S,
    fail_after: usize,
    appended: usize,
}

impl<S: RecordSink> FailingSink<S> {
    pub fn new(inner: S, fail_after: usize) -> Self {
        Self { inner, fail_after, appended: 0 }
    }

    pub fn into_inner(self) -> S {
        self.inner
    }
}

impl<S: RecordSink> RecordSink for FailingSink<S> {
    fn append(&mut self, record: &RawResponse) -> Result<(), SinkError> {
        if self.appended >= self.fail_after {
            return Err(SinkError::Injected(self.appended));
        }
        self.inner.append(record)?;
        self.appended += 1;
        Ok(())
    }
}
