//! Append-only write log.
//!
//! On disk every entry is one little-endian frame:
//!
//! ```text
//! seq: u64 | kind: u8 | len: u32 | payload: [u8; len] | crc: u32
//! ```
//!
//! `crc` is CRC-32 (IEEE) of the payload. A frame that is cut short at the
//! end of the file is a write that was never acknowledged and is dropped on
//! open; a complete frame whose CRC does not match is corruption.

use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Delta, StorageError};

pub const FRAME_HEADER_LEN: usize = 8 + 1 + 4;
pub const FRAME_TRAILER_LEN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Insert,
    InsertLinked,
    Update,
    Archive,
}

impl OpKind {
    pub fn code(self) -> u8 {
        match self {
            OpKind::Insert => 1,
            OpKind::InsertLinked => 2,
            OpKind::Update => 3,
            OpKind::Archive => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            1 => OpKind::Insert,
            2 => OpKind::InsertLinked,
            3 => OpKind::Update,
            4 => OpKind::Archive,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEntry {
    pub seq: u64,
    pub nid_key: String,
    pub op_kind: OpKind,
    pub payload: Vec<u8>,
    pub checksum: u32,
}

pub fn crc32(bytes: &[u8]) -> u32 {
    crc32fast::hash(bytes)
}

impl LogEntry {
    pub fn new(seq: u64, op_kind: OpKind, delta: &Delta) -> Self {
        let payload = delta.encode();
        LogEntry {
            seq,
            nid_key: delta.key.clone(),
            op_kind,
            checksum: crc32(&payload),
            payload,
        }
    }

    pub fn delta(&self) -> Result<Delta, StorageError> {
        Delta::decode(&self.payload).map_err(|_| StorageError::Decode { seq: self.seq })
    }

    pub fn verify(&self) -> Result<(), StorageError> {
        if crc32(&self.payload) == self.checksum {
            Ok(())
        } else {
            Err(StorageError::Checksum { seq: self.seq })
        }
    }

    pub fn frame_len(&self) -> usize {
        FRAME_HEADER_LEN + self.payload.len() + FRAME_TRAILER_LEN
    }

    pub fn encode_frame(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.seq.to_le_bytes());
        out.push(self.op_kind.code());
        out.extend_from_slice(&(self.payload.len() as u32).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out.extend_from_slice(&self.checksum.to_le_bytes());
    }

    /// Decodes one frame from the front of `buf`. `Ok(None)` means `buf`
    /// ends before the frame does.
    pub fn decode_frame(buf: &[u8]) -> Result<Option<(LogEntry, usize)>, StorageError> {
        if buf.len() < FRAME_HEADER_LEN {
            return Ok(None);
        }
        let seq = u64::from_le_bytes(buf[0..8].try_into().unwrap());
        let kind = buf[8];
        let len = u32::from_le_bytes(buf[9..13].try_into().unwrap()) as usize;
        let total = FRAME_HEADER_LEN + len + FRAME_TRAILER_LEN;
        if buf.len() < total {
            return Ok(None);
        }
        let payload = buf[FRAME_HEADER_LEN..FRAME_HEADER_LEN + len].to_vec();
        let checksum = u32::from_le_bytes(buf[total - 4..total].try_into().unwrap());
        if crc32(&payload) != checksum {
            return Err(StorageError::Checksum { seq });
        }
        let op_kind = OpKind::from_code(kind).ok_or(StorageError::Decode { seq })?;
        let nid_key = Delta::decode(&payload).map_err(|_| StorageError::Decode { seq })?.key;
        Ok(Some((LogEntry { seq, nid_key, op_kind, payload, checksum }, total)))
    }
}

/// The write log. Entries are kept in memory; a file-backed log also
/// writes and syncs each frame before `append` returns.
#[derive(Debug)]
pub struct Log {
    entries: Vec<LogEntry>,
    file: Option<(PathBuf, File)>,
    bytes: u64,
    capacity: Option<u64>,
}

impl Default for Log {
    fn default() -> Self {
        Log::in_memory()
    }
}

impl Clone for Log {
    /// Clones the entries only; the copy is an in-memory log.
    fn clone(&self) -> Self {
        Log { entries: self.entries.clone(), file: None, bytes: self.bytes, capacity: self.capacity }
    }
}

impl Log {
    pub fn in_memory() -> Self {
        Log { entries: Vec::new(), file: None, bytes: 0, capacity: None }
    }

    pub fn from_entries(entries: Vec<LogEntry>) -> Result<Self, StorageError> {
        let mut log = Log::in_memory();
        for e in entries {
            log.push(e)?;
        }
        Ok(log)
    }

    /// Opens (or creates) a log file and loads every complete frame.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StorageError> {
        let path = path.as_ref().to_path_buf();
        let mut buf = Vec::new();
        if path.exists() {
            File::open(&path)?.read_to_end(&mut buf)?;
        }
        let mut entries: Vec<LogEntry> = Vec::new();
        let mut offset = 0;
        while let Some((entry, used)) = LogEntry::decode_frame(&buf[offset..])? {
            let expected = entries.last().map_or(1, |e| e.seq + 1);
            if entry.seq != expected {
                return Err(StorageError::OutOfOrder { expected, found: entry.seq });
            }
            entries.push(entry);
            offset += used;
        }
        let file = OpenOptions::new().create(true).read(true).write(true).truncate(false).open(&path)?;
        if offset < buf.len() {
            // torn tail from an interrupted append
            file.set_len(offset as u64)?;
            file.sync_all()?;
        }
        let mut file = file;
        use std::io::Seek;
        file.seek(std::io::SeekFrom::End(0))?;
        Ok(Log { entries, file: Some((path, file)), bytes: offset as u64, capacity: None })
    }

    pub fn with_capacity_limit(mut self, bytes: u64) -> Self {
        self.capacity = Some(bytes);
        self
    }

    pub fn path(&self) -> Option<&Path> {
        self.file.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn last_seq(&self) -> u64 {
        self.entries.last().map_or(0, |e| e.seq)
    }

    pub fn first_seq(&self) -> u64 {
        self.entries.first().map_or(0, |e| e.seq)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[LogEntry] {
        &self.entries
    }

    pub fn get(&self, seq: u64) -> Option<&LogEntry> {
        let first = self.first_seq();
        if seq < first || seq == 0 {
            return None;
        }
        self.entries.get((seq - first) as usize)
    }

    /// Entries with `after < seq <= upto`.
    pub fn range(&self, after: u64, upto: u64) -> &[LogEntry] {
        let first = self.first_seq().max(1);
        let lo = after.saturating_add(1).max(first);
        let hi = upto.min(self.last_seq());
        if lo > hi {
            return &[];
        }
        &self.entries[(lo - first) as usize..=(hi - first) as usize]
    }

    pub fn append(&mut self, op_kind: OpKind, delta: &Delta) -> Result<&LogEntry, StorageError> {
        let entry = LogEntry::new(self.last_seq() + 1, op_kind, delta);
        self.push(entry)?;
        Ok(self.entries.last().unwrap())
    }

    /// Appends an entry produced elsewhere (replication). The sequence
    /// number must extend the log without a gap.
    pub fn push(&mut self, entry: LogEntry) -> Result<(), StorageError> {
        let expected = self.last_seq() + 1;
        if !self.entries.is_empty() && entry.seq != expected {
            return Err(StorageError::OutOfOrder { expected, found: entry.seq });
        }
        if self.entries.is_empty() && entry.seq == 0 {
            return Err(StorageError::OutOfOrder { expected: 1, found: 0 });
        }
        entry.verify()?;
        let len = entry.frame_len() as u64;
        if let Some(cap) = self.capacity {
            if self.bytes + len > cap {
                return Err(StorageError::StorageFull { capacity: cap });
            }
        }
        if let Some((_, file)) = self.file.as_mut() {
            let mut frame = Vec::with_capacity(entry.frame_len());
            entry.encode_frame(&mut frame);
            file.write_all(&frame)?;
            file.sync_data()?;
        }
        self.bytes += len;
        self.entries.push(entry);
        Ok(())
    }

    /// Drops every entry with `seq > upto`.
    pub fn truncate_after(&mut self, upto: u64) -> Result<(), StorageError> {
        let keep = self.entries.iter().take_while(|e| e.seq <= upto).count();
        self.entries.truncate(keep);
        self.bytes = self.entries.iter().map(|e| e.frame_len() as u64).sum();
        if let Some((_, file)) = self.file.as_mut() {
            file.set_len(self.bytes)?;
            file.sync_all()?;
            use std::io::Seek;
            file.seek(std::io::SeekFrom::End(0))?;
        }
        Ok(())
    }

    pub fn encoded_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.bytes as usize);
        for e in &self.entries {
            e.encode_frame(&mut out);
        }
        out
    }
}
