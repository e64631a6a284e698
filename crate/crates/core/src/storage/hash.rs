//! Stable 64-bit hashing.
//!
//! `hash64` is FNV-1a (64-bit) followed by the MurmurHash3 `fmix64`
//! finalizer. FNV alone has weak high bits for short keys that differ only
//! in their last bytes, which matters for rendezvous scoring; the finalizer
//! spreads them. The output depends only on the input bytes, so it is the
//! same on every platform and run.

use super::State;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Hash of a state with no keys ("BDPSSTAT" in ASCII).
pub const EMPTY_STATE_HASH: u64 = 0x4244_5053_5354_4154;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(FNV_PRIME))
}

pub fn fmix64(mut k: u64) -> u64 {
    k ^= k >> 33;
    k = k.wrapping_mul(0xff51_afd7_ed55_8ccd);
    k ^= k >> 33;
    k = k.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    k ^= k >> 33;
    k
}

pub fn hash64(bytes: &[u8]) -> u64 {
    fmix64(fnv1a64(bytes))
}

/// Order-independent digest of a materialized state: keys are folded in
/// sorted order, each step hashing the running value with the
/// length-prefixed key and value.
pub fn state_hash(state: &State) -> u64 {
    let mut buf = Vec::new();
    state.iter().fold(EMPTY_STATE_HASH, |h, (k, v)| {
        buf.clear();
        buf.extend_from_slice(&h.to_le_bytes());
        buf.extend_from_slice(&(k.len() as u32).to_le_bytes());
        buf.extend_from_slice(k.as_bytes());
        buf.extend_from_slice(&(v.len() as u32).to_le_bytes());
        buf.extend_from_slice(v.as_bytes());
        hash64(&buf)
    })
}
