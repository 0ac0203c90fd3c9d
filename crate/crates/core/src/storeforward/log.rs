//! Append-only record log, one JSON record per line.
//!
//! Components mutate state only by appending a record and applying it, so
//! replaying the log from the start rebuilds the exact state.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::QueueError;

enum Backend {
    Memory(Vec<u8>),
    File { path: PathBuf, writer: BufWriter<File> },
}

pub struct DurableLog<E> {
    backend: Backend,
    records: u64,
    _marker: PhantomData<fn(E)>,
}

impl<E> std::fmt::Debug for DurableLog<E> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match &self.backend {
            Backend::Memory(_) => "memory".to_string(),
            Backend::File { path, .. } => path.display().to_string(),
        };
        f.debug_struct("DurableLog")
            .field("backend", &kind)
            .field("records", &self.records)
            .finish()
    }
}

impl<E: Serialize + DeserializeOwned> DurableLog<E> {
    pub fn in_memory() -> Self {
        Self {
            backend: Backend::Memory(Vec::new()),
            records: 0,
            _marker: PhantomData,
        }
    }

    /// Rebuilds an in-memory log from raw bytes, returning the records.
    pub fn from_bytes(bytes: Vec<u8>) -> Result<(Self, Vec<E>), QueueError> {
        let records = parse_records(bytes.as_slice())?;
        let log = Self {
            backend: Backend::Memory(bytes),
            records: records.len() as u64,
            _marker: PhantomData,
        };
        Ok((log, records))
    }

    /// Opens (creating if absent) a file-backed log and replays it.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Vec<E>), QueueError> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let records = match File::open(&path) {
            Ok(f) => parse_records(BufReader::new(f))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        let log = Self {
            backend: Backend::File {
                path,
                writer: BufWriter::new(file),
            },
            records: records.len() as u64,
            _marker: PhantomData,
        };
        Ok((log, records))
    }

    /// Replays a file without opening it for writing.
    pub fn read(path: impl AsRef<Path>) -> Result<Vec<E>, QueueError> {
        let f = File::open(path)?;
        parse_records(BufReader::new(f))
    }

    pub fn append(&mut self, record: &E) -> Result<(), QueueError> {
        let mut line = serde_json::to_vec(record).map_err(|e| QueueError::Corrupt {
            line: self.records as usize + 1,
            message: e.to_string(),
        })?;
        line.push(b'\n');
        match &mut self.backend {
            Backend::Memory(buf) => buf.extend_from_slice(&line),
            Backend::File { writer, .. } => writer.write_all(&line)?,
        }
        self.records += 1;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), QueueError> {
        if let Backend::File { writer, .. } = &mut self.backend {
            writer.flush()?;
        }
        Ok(())
    }

    pub fn len(&self) -> u64 {
        self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records == 0
    }

    pub fn path(&self) -> Option<&Path> {
        match &self.backend {
            Backend::Memory(_) => None,
            Backend::File { path, .. } => Some(path),
        }
    }

    /// Everything written so far, flushed.
    pub fn bytes(&mut self) -> Result<Vec<u8>, QueueError> {
        match &mut self.backend {
            Backend::Memory(buf) => Ok(buf.clone()),
            Backend::File { path, writer } => {
                writer.flush()?;
                Ok(std::fs::read(path)?)
            }
        }
    }
}

impl<E> Drop for DurableLog<E> {
    fn drop(&mut self) {
        if let Backend::File { writer, .. } = &mut self.backend {
            let _ = writer.flush();
        }
    }
}

fn parse_records<E: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<E>, QueueError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| QueueError::Corrupt {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}
