//! Length-delimited batch transport over a byte stream (TCP in live
//! mode). Each message is a `u32` little-endian length and a body. The
//! shipper sends an encoded [`Batch`]; the mirror answers with an
//! [`Ack`] as JSON.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Batch, Mirror, ReplicationError};

/// Frames larger than this are refused rather than allocated.
pub const MAX_FRAME: u32 = 64 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Ack {
    Applied { acked_seq: u64, epoch: u32 },
    Rejected { reason: String },
}

pub fn write_frame(w: &mut impl Write, body: &[u8]) -> std::io::Result<()> {
    let len = u32::try_from(body.len())
        .ok()
        .filter(|l| *l <= MAX_FRAME)
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "frame too large"))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(body)?;
    w.flush()
}

/// `Ok(None)` on a clean end of stream before a new frame.
pub fn read_frame(r: &mut impl Read) -> std::io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e),
    }
    let len = u32::from_le_bytes(len);
    if len > MAX_FRAME {
        return Err(std::io::Error::new(std::io::ErrorKind::InvalidData, "frame too large"));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)?;
    Ok(Some(body))
}

/// Sends one batch and waits for the mirror's answer.
pub fn send_batch(stream: &mut (impl Read + Write), batch: &Batch) -> Result<Ack, ReplicationError> {
    write_frame(stream, &batch.encode())?;
    let body = read_frame(stream)?
        .ok_or_else(|| ReplicationError::Io(std::io::ErrorKind::UnexpectedEof.into()))?;
    serde_json::from_slice(&body).map_err(|e| ReplicationError::Malformed(e.to_string()))
}

/// Serves batches from one connection until it closes. Rejections are
/// reported to the sender and do not end the connection.
pub fn serve_connection(stream: &mut (impl Read + Write), mirror: &mut Mirror) -> Result<u64, ReplicationError> {
    let mut applied = 0;
    while let Some(body) = read_frame(stream)? {
        let ack = match Batch::decode(&body).and_then(|b| mirror.apply_batch(&b)) {
            Ok(acked_seq) => {
                applied += 1;
                Ack::Applied { acked_seq, epoch: mirror.epoch() }
            }
            Err(e) => Ack::Rejected { reason: e.to_string() },
        };
        write_frame(stream, &serde_json::to_vec(&ack).expect("ack serializes"))?;
    }
    Ok(applied)
}
