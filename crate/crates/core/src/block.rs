//! Data block codec.
//!
//! A block is a run of sorted entries followed by an entry count and a
//! CRC32 over everything before it. All integers little-endian:
//!
//! ```text
//! entry*: key_len u32 | key | seq u64 | tag u8 (0 value, 1 tombstone) | val_len u32 | val
//! tail:   entry_count u32 | crc32 u32
//! ```

use crate::types::{Key, SeqNo, Value};
use bytes::{BufMut, Bytes, BytesMut};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BlockError {
    #[error("block checksum mismatch")]
    ChecksumMismatch,
    #[error("block truncated or malformed")]
    Malformed,
}

const TAG_VALUE: u8 = 0;
const TAG_TOMBSTONE: u8 = 1;

/// Encoded size of one entry.
pub fn entry_encoded_len(key: &[u8], value: &Value) -> usize {
    4 + key.len() + 8 + 1 + 4 + value.len()
}

/// Fixed per-block tail: entry count + crc.
pub const BLOCK_TAIL_LEN: usize = 8;

#[derive(Default)]
pub struct BlockBuilder {
    buf: BytesMut,
    count: u32,
}

impl BlockBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Size the block would occupy once finished.
    pub fn encoded_len(&self) -> usize {
        self.buf.len() + BLOCK_TAIL_LEN
    }

    pub fn add(&mut self, key: &[u8], seq: SeqNo, value: &Value) {
        self.buf.put_u32_le(key.len() as u32);
        self.buf.put_slice(key);
        self.buf.put_u64_le(seq);
        match value {
            Value::Data(v) => {
                self.buf.put_u8(TAG_VALUE);
                self.buf.put_u32_le(v.len() as u32);
                self.buf.put_slice(v);
            }
            Value::Tombstone => {
                self.buf.put_u8(TAG_TOMBSTONE);
                self.buf.put_u32_le(0);
            }
        }
        self.count += 1;
    }

    pub fn finish(mut self) -> Bytes {
        self.buf.put_u32_le(self.count);
        let crc = crc32fast::hash(&self.buf);
        self.buf.put_u32_le(crc);
        self.buf.freeze()
    }
}

/// Decode and checksum-verify a block into its entries.
pub fn decode_block(bytes: &[u8]) -> Result<Vec<(Key, SeqNo, Value)>, BlockError> {
    if bytes.len() < BLOCK_TAIL_LEN {
        return Err(BlockError::Malformed);
    }
    let body_len = bytes.len() - 4;
    let stored_crc = u32::from_le_bytes(bytes[body_len..].try_into().unwrap());
    if crc32fast::hash(&bytes[..body_len]) != stored_crc {
        return Err(BlockError::ChecksumMismatch);
    }
    let count = u32::from_le_bytes(bytes[body_len - 4..body_len].try_into().unwrap());
    let mut entries = Vec::with_capacity(count as usize);
    let mut pos = 0usize;
    let data = &bytes[..body_len - 4];
    for _ in 0..count {
        let key_len = read_u32(data, &mut pos)? as usize;
        let key = read_slice(data, &mut pos, key_len)?;
        let seq = read_u64(data, &mut pos)?;
        let tag = read_slice(data, &mut pos, 1)?[0];
        let val_len = read_u32(data, &mut pos)? as usize;
        let value = match tag {
            TAG_VALUE => Value::Data(Bytes::copy_from_slice(read_slice(data, &mut pos, val_len)?)),
            TAG_TOMBSTONE if val_len == 0 => Value::Tombstone,
            _ => return Err(BlockError::Malformed),
        };
        entries.push((Key::copy_from_slice(key), seq, value));
    }
    if pos != data.len() {
        return Err(BlockError::Malformed);
    }
    Ok(entries)
}

fn read_u32(data: &[u8], pos: &mut usize) -> Result<u32, BlockError> {
    let s = read_slice(data, pos, 4)?;
    Ok(u32::from_le_bytes(s.try_into().unwrap()))
}

fn read_u64(data: &[u8], pos: &mut usize) -> Result<u64, BlockError> {
    let s = read_slice(data, pos, 8)?;
    Ok(u64::from_le_bytes(s.try_into().unwrap()))
}

fn read_slice<'a>(data: &'a [u8], pos: &mut usize, len: usize) -> Result<&'a [u8], BlockError> {
    if *pos + len > data.len() {
        return Err(BlockError::Malformed);
    }
    let s = &data[*pos..*pos + len];
    *pos += len;
    Ok(s)
}
