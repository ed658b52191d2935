use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::IngestError;
use crate::model::LabeledTrace;

/// Append-only dataset file holding one serialized trace per line.
///
/// A record id is the zero-based line number of the record.
#[derive(Debug)]
pub struct DatasetStore {
    path: PathBuf,
    out: BufWriter<File>,
    next_id: u64,
}

impl DatasetStore {
    /// Opens `path` for appending, creating it if needed.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        let path = path.as_ref().to_path_buf();
        let next_id = match File::open(&path) {
            Ok(f) => BufReader::new(f).lines().count() as u64,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => 0,
            Err(e) => return Err(IngestError::StorageFailure(e)),
        };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(IngestError::StorageFailure)?;
        Ok(DatasetStore {
            path,
            out: BufWriter::new(file),
            next_id,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends one trace and flushes it to the file.
    pub fn persist(&mut self, trace: &LabeledTrace) -> Result<u64, IngestError> {
        let line = serde_json::to_string(trace).expect("traces serialize");
        self.out
            .write_all(line.as_bytes())
            .and_then(|_| self.out.write_all(b"\n"))
            .and_then(|_| self.out.flush())
            .map_err(IngestError::StorageFailure)?;
        let id = self.next_id;
        self.next_id += 1;
        Ok(id)
    }

    pub fn sync(&mut self) -> Result<(), IngestError> {
        self.out.flush().map_err(IngestError::StorageFailure)?;
        self.out.get_ref().sync_data().map_err(IngestError::StorageFailure)
    }
}

/// Reads every trace of a dataset file in insertion order. Blank lines are
/// skipped.
pub fn load_all(path: impl AsRef<Path>) -> Result<Vec<LabeledTrace>, IngestError> {
    let file = File::open(path.as_ref()).map_err(IngestError::StorageFailure)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(IngestError::StorageFailure)?;
        if line.trim().is_empty() {
            continue;
        }
        let trace = serde_json::from_str(&line).map_err(|e| IngestError::CorruptRecord {
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(trace);
    }
    Ok(out)
}

/// Writes `traces` to a fresh dataset file, replacing any existing one.
pub fn write_all<'a>(
    path: impl AsRef<Path>,
    traces: impl IntoIterator<Item = &'a LabeledTrace>,
) -> Result<(), IngestError> {
    let file = File::create(path.as_ref()).map_err(IngestError::StorageFailure)?;
    let mut out = BufWriter::new(file);
    for t in traces {
        serde_json::to_writer(&mut out, t)
            .map_err(std::io::Error::from)
            .and_then(|_| out.write_all(b"\n"))
            .map_err(IngestError::StorageFailure)?;
    }
    out.flush().map_err(IngestError::StorageFailure)
}
