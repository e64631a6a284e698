//! Batch wire format: `{epoch: u32, count: u32}` little-endian, followed by
//! `count` log frames.

use crate::storage::{LogEntry, StorageError};

use super::ReplicationError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch {
    pub epoch: u32,
    pub entries: Vec<LogEntry>,
}

impl Batch {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn first_seq(&self) -> Option<u64> {
        self.entries.first().map(|e| e.seq)
    }

    pub fn last_seq(&self) -> Option<u64> {
        self.entries.last().map(|e| e.seq)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.entries.iter().map(LogEntry::frame_len).sum::<usize>());
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for e in &self.entries {
            e.encode_frame(&mut out);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Batch, ReplicationError> {
        if bytes.len() < 8 {
            return Err(ReplicationError::Malformed("short batch header".into()));
        }
        let epoch = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
        let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let mut rest = &bytes[8..];
        let mut entries = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            match LogEntry::decode_frame(rest)? {
                Some((entry, used)) => {
                    entries.push(entry);
                    rest = &rest[used..];
                }
                None => return Err(ReplicationError::Malformed("truncated frame".into())),
            }
        }
        if !rest.is_empty() {
            return Err(ReplicationError::Malformed(format!("{} trailing bytes", rest.len())));
        }
        Ok(Batch { epoch, entries })
    }
}

impl From<StorageError> for ReplicationError {
    fn from(e: StorageError) -> Self {
        ReplicationError::Registry(e.into())
    }
}
