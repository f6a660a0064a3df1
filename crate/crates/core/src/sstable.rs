//! SSTable codec and reader.
//!
//! An SSTable is an immutable sorted run of key-value-version entries.
//! Once encoded it is never modified; every consumer sees identical bytes.
//!
//! Layout (all integers little-endian, documented bit-exactly in
//! docs/formats.md):
//!
//! ```text
//! [data blocks][bloom filter][block index][stats][footer (64 bytes)]
//! ```
//!
//! The fixed-size footer carries offsets, seq bounds, the entry count, a
//! CRC and the magic 0x4E4C534D. Variable-length fields (min/max key) live
//! in the stats section the footer points at.
//!
//! Reads go through [`ObjectRead`], so the same lookup path serves a local
//! byte slice and a remote storage component fetching `(offset, len)`
//! slices. The store never interprets object contents; all decoding
//! happens here on the reader side.

use crate::block::{decode_block, BlockBuilder, BlockError, BLOCK_TAIL_LEN};
use crate::bloom::{fnv1a64, BloomFilter};
use crate::levels::TableSummary;
use crate::memtable::{Memtable, MemtableError, MemtableState};
use crate::types::{Key, SeqNo, Value};
use bytes::{BufMut, Bytes, BytesMut};
use thiserror::Error;

pub const SST_MAGIC: u32 = 0x4E4C534D;
pub const FOOTER_LEN: usize = 64;
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SstError {
    #[error("not an SSTable: bad magic")]
    BadMagic,
    #[error("unsupported format version {0}")]
    BadVersion(u32),
    #[error("checksum mismatch in {0}")]
    ChecksumMismatch(&'static str),
    #[error("SSTable truncated or malformed: {0}")]
    Malformed(&'static str),
    #[error("entries out of order at key {0:?}")]
    OutOfOrder(Vec<u8>),
    #[error("empty table")]
    Empty,
    #[error("storage read failed: {0}")]
    Storage(String),
}

impl From<BlockError> for SstError {
    fn from(e: BlockError) -> Self {
        match e {
            BlockError::ChecksumMismatch => SstError::ChecksumMismatch("data block"),
            BlockError::Malformed => SstError::Malformed("data block"),
        }
    }
}

/// Random-access reads against one encoded SSTable, local or remote.
pub trait ObjectRead {
    fn read(&self, offset: u64, len: u64) -> Result<Bytes, SstError>;
}

impl ObjectRead for Bytes {
    fn read(&self, offset: u64, len: u64) -> Result<Bytes, SstError> {
        let end = offset.checked_add(len).ok_or(SstError::Malformed("overflowing read"))?;
        if end > self.len() as u64 {
            return Err(SstError::Malformed("read past end"));
        }
        Ok(self.slice(offset as usize..end as usize))
    }
}

/// One block index entry: the first key in the block and where it lives.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct IndexEntry {
    pub first_key: Key,
    pub offset: u64,
    pub len: u64,
}

/// Logical footer of an SSTable, including the variable-length key bounds
/// stored in the stats section.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Footer {
    pub min_key: Key,
    pub max_key: Key,
    pub min_seq: SeqNo,
    pub max_seq: SeqNo,
    pub entry_count: u64,
    pub format_version: u32,
    pub bloom_offset: u64,
    pub index_offset: u64,
    pub stats_offset: u64,
}

/// Parsed metadata of an SSTable: footer, index, and bloom filter. Cheap to
/// keep cached per table; block reads go back to the [`ObjectRead`] source.
#[derive(Clone, Debug)]
pub struct SstMeta {
    pub footer: Footer,
    pub index: Vec<IndexEntry>,
    pub bloom: BloomFilter,
    pub total_len: u64,
}

impl SstMeta {
    /// Fetch and verify footer, index, bloom and stats sections.
    pub fn load<R: ObjectRead + ?Sized>(src: &R, total_len: u64) -> Result<SstMeta, SstError> {
        if (total_len as usize) < FOOTER_LEN {
            return Err(SstError::Malformed("shorter than footer"));
        }
        let raw = src.read(total_len - FOOTER_LEN as u64, FOOTER_LEN as u64)?;
        let magic = u32::from_le_bytes(raw[60..64].try_into().unwrap());
        if magic != SST_MAGIC {
            return Err(SstError::BadMagic);
        }
        let stored_crc = u32::from_le_bytes(raw[56..60].try_into().unwrap());
        if crc32fast::hash(&raw[..56]) != stored_crc {
            return Err(SstError::ChecksumMismatch("footer"));
        }
        let bloom_offset = u64::from_le_bytes(raw[0..8].try_into().unwrap());
        let index_offset = u64::from_le_bytes(raw[8..16].try_into().unwrap());
        let stats_offset = u64::from_le_bytes(raw[16..24].try_into().unwrap());
        let entry_count = u64::from_le_bytes(raw[24..32].try_into().unwrap());
        let min_seq = u64::from_le_bytes(raw[32..40].try_into().unwrap());
        let max_seq = u64::from_le_bytes(raw[40..48].try_into().unwrap());
        let format_version = u32::from_le_bytes(raw[48..52].try_into().unwrap());
        if format_version != FORMAT_VERSION {
            return Err(SstError::BadVersion(format_version));
        }
        let footer_start = total_len - FOOTER_LEN as u64;
        if !(bloom_offset <= index_offset
            && index_offset <= stats_offset
            && stats_offset <= footer_start)
        {
            return Err(SstError::Malformed("section offsets out of order"));
        }

        // Bloom section: n_hashes u32 | bits_len u32 | bits | crc32
        let bloom_raw = src.read(bloom_offset, index_offset - bloom_offset)?;
        let bloom = decode_section(&bloom_raw, "bloom filter", |body| {
            if body.len() < 8 {
                return Err(SstError::Malformed("bloom header"));
            }
            let n_hashes = u32::from_le_bytes(body[0..4].try_into().unwrap());
            let bits_len = u32::from_le_bytes(body[4..8].try_into().unwrap()) as usize;
            if body.len() != 8 + bits_len {
                return Err(SstError::Malformed("bloom length"));
            }
            Ok(BloomFilter::from_parts(n_hashes, body[8..].to_vec()))
        })?;

        // Index section: count u32 | (first_key_len u32, first_key, offset u64, len u64)* | crc32
        let index_raw = src.read(index_offset, stats_offset - index_offset)?;
        let index = decode_section(&index_raw, "block index", |body| {
            let mut pos = 0usize;
            let count = read_u32(body, &mut pos)?;
            let mut index = Vec::with_capacity(count as usize);
            for _ in 0..count {
                let klen = read_u32(body, &mut pos)? as usize;
                let first_key = Key::copy_from_slice(read_slice(body, &mut pos, klen)?);
                let offset = read_u64(body, &mut pos)?;
                let len = read_u64(body, &mut pos)?;
                index.push(IndexEntry { first_key, offset, len });
            }
            if pos != body.len() {
                return Err(SstError::Malformed("block index trailing bytes"));
            }
            Ok(index)
        })?;

        // Stats section: min_key_len u32 | min_key | max_key_len u32 | max_key | crc32
        let stats_raw = src.read(stats_offset, footer_start - stats_offset)?;
        let (min_key, max_key) = decode_section(&stats_raw, "stats", |body| {
            let mut pos = 0usize;
            let min_len = read_u32(body, &mut pos)? as usize;
            let min_key = Key::copy_from_slice(read_slice(body, &mut pos, min_len)?);
            let max_len = read_u32(body, &mut pos)? as usize;
            let max_key = Key::copy_from_slice(read_slice(body, &mut pos, max_len)?);
            if pos != body.len() {
                return Err(SstError::Malformed("stats trailing bytes"));
            }
            Ok((min_key, max_key))
        })?;

        Ok(SstMeta {
            footer: Footer {
                min_key,
                max_key,
                min_seq,
                max_seq,
                entry_count,
                format_version,
                bloom_offset,
                index_offset,
                stats_offset,
            },
            index,
            bloom,
            total_len,
        })
    }

    /// Index of the block that could contain `key`, if any.
    fn candidate_block(&self, key: &[u8]) -> Option<usize> {
        let n = self.index.partition_point(|e| e.first_key.as_ref() <= key);
        n.checked_sub(1)
    }

    /// Point lookup. A negative bloom answer short-circuits without any
    /// block reads; otherwise exactly one block is fetched.
    pub fn get<R: ObjectRead + ?Sized>(
        &self,
        src: &R,
        key: &[u8],
    ) -> Result<Option<(SeqNo, Value)>, SstError> {
        if !self.bloom.may_contain(key) {
            return Ok(None);
        }
        let Some(block_no) = self.candidate_block(key) else {
            return Ok(None);
        };
        let entry = &self.index[block_no];
        let block = src.read(entry.offset, entry.len)?;
        let entries = decode_block(&block)?;
        // Entries sort by (key asc, seq desc): the first match is newest.
        let i = entries.partition_point(|(k, _, _)| k.as_ref() < key);
        Ok(entries
            .get(i)
            .filter(|(k, _, _)| k.as_ref() == key)
            .map(|(_, s, v)| (*s, v.clone())))
    }

    /// All entries with keys in `[lower, upper)`, fetching only the blocks
    /// that can intersect the interval.
    pub fn entries_in_range<R: ObjectRead + ?Sized>(
        &self,
        src: &R,
        lower: &[u8],
        upper: Option<&[u8]>,
    ) -> Result<Vec<(Key, SeqNo, Value)>, SstError> {
        let start = self.candidate_block(lower).unwrap_or(0);
        let mut out = Vec::new();
        for entry in &self.index[start..] {
            if let Some(u) = upper {
                if entry.first_key.as_ref() >= u {
                    break;
                }
            }
            let block = src.read(entry.offset, entry.len)?;
            for (k, s, v) in decode_block(&block)? {
                if k.as_ref() < lower {
                    continue;
                }
                if let Some(u) = upper {
                    if k.as_ref() >= u {
                        return Ok(out);
                    }
                }
                out.push((k, s, v));
            }
        }
        Ok(out)
    }

    pub fn summary(&self) -> TableSummary {
        TableSummary {
            min_key: self.footer.min_key.to_vec(),
            max_key: self.footer.max_key.to_vec(),
            min_seq: self.footer.min_seq,
            max_seq: self.footer.max_seq,
            entry_count: self.footer.entry_count,
            file_len: self.total_len,
        }
    }
}

fn decode_section<T>(
    raw: &[u8],
    what: &'static str,
    parse: impl FnOnce(&[u8]) -> Result<T, SstError>,
) -> Result<T, SstError> {
    if raw.len() < 4 {
        return Err(SstError::Malformed(what));
    }
    let body = &raw[..raw.len() - 4];
    let stored = u32::from_le_bytes(raw[raw.len() - 4..].try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(SstError::ChecksumMismatch(what));
    }
    parse(body)
}

fn read_u32(data: &[u8], pos: &mut usize) -> Result<u32, SstError> {
    Ok(u32::from_le_bytes(
        read_slice(data, pos, 4)?.try_into().unwrap(),
    ))
}

fn read_u64(data: &[u8], pos: &mut usize) -> Result<u64, SstError> {
    Ok(u64::from_le_bytes(
        read_slice(data, pos, 8)?.try_into().unwrap(),
    ))
}

fn read_slice<'a>(data: &'a [u8], pos: &mut usize, len: usize) -> Result<&'a [u8], SstError> {
    if *pos + len > data.len() {
        return Err(SstError::Malformed("section truncated"));
    }
    let s = &data[*pos..*pos + len];
    *pos += len;
    Ok(s)
}

/// A fully-decoded in-memory SSTable: the encoded bytes plus parsed
/// metadata. This is the working representation for flush and compaction.
#[derive(Clone, Debug)]
pub struct SsTable {
    pub meta: SstMeta,
    pub bytes: Bytes,
}

impl SsTable {
    pub fn decode(bytes: Bytes) -> Result<SsTable, SstError> {
        let meta = SstMeta::load(&bytes, bytes.len() as u64)?;
        Ok(SsTable { meta, bytes })
    }

    pub fn get(&self, key: &[u8]) -> Result<Option<(SeqNo, Value)>, SstError> {
        self.meta.get(&self.bytes, key)
    }

    /// Decode every data block, verifying each block checksum.
    pub fn entries(&self) -> Result<Vec<(Key, SeqNo, Value)>, SstError> {
        let mut out = Vec::with_capacity(self.meta.footer.entry_count as usize);
        for e in &self.meta.index {
            let block = self.bytes.read(e.offset, e.len)?;
            out.extend(decode_block(&block)?);
        }
        Ok(out)
    }

    pub fn summary(&self) -> TableSummary {
        self.meta.summary()
    }
}

impl PartialEq for SsTable {
    fn eq(&self, other: &Self) -> bool {
        self.bytes == other.bytes
    }
}

/// Streams sorted entries into the encoded layout. Entries must arrive in
/// `(key asc, seq desc)` order with no duplicate `(key, seq)` pairs.
pub struct SsTableBuilder {
    block_size: usize,
    bits_per_key: usize,
    buf: BytesMut,
    current: BlockBuilder,
    current_first_key: Option<Key>,
    index: Vec<IndexEntry>,
    key_hashes: Vec<u64>,
    last: Option<(Key, SeqNo)>,
    min_seq: SeqNo,
    max_seq: SeqNo,
    min_key: Option<Key>,
    max_key: Option<Key>,
    entry_count: u64,
}

impl SsTableBuilder {
    pub fn new(block_size: usize, bits_per_key: usize) -> Self {
        SsTableBuilder {
            block_size,
            bits_per_key,
            buf: BytesMut::new(),
            current: BlockBuilder::new(),
            current_first_key: None,
            index: Vec::new(),
            key_hashes: Vec::new(),
            last: None,
            min_seq: u64::MAX,
            max_seq: 0,
            min_key: None,
            max_key: None,
            entry_count: 0,
        }
    }

    pub fn add(&mut self, key: Key, seq: SeqNo, value: &Value) -> Result<(), SstError> {
        let mut new_key = true;
        if let Some((last_key, last_seq)) = &self.last {
            match key.cmp(last_key) {
                std::cmp::Ordering::Less => return Err(SstError::OutOfOrder(key.to_vec())),
                std::cmp::Ordering::Equal => {
                    if seq >= *last_seq {
                        return Err(SstError::OutOfOrder(key.to_vec()));
                    }
                    new_key = false;
                }
                std::cmp::Ordering::Greater => {}
            }
        }
        // Cut the block when this entry would push it past the target, but
        // never split: a single entry larger than the target gets its own
        // block.
        let entry_len = crate::block::entry_encoded_len(&key, value);
        if !self.current.is_empty() && self.current.encoded_len() + entry_len > self.block_size {
            self.cut_block();
        }
        if self.current.is_empty() {
            self.current_first_key = Some(key.clone());
        }
        self.current.add(&key, seq, value);
        if new_key {
            self.key_hashes.push(fnv1a64(&key));
        }
        self.min_seq = self.min_seq.min(seq);
        self.max_seq = self.max_seq.max(seq);
        if self.min_key.is_none() {
            self.min_key = Some(key.clone());
        }
        self.max_key = Some(key.clone());
        self.entry_count += 1;
        self.last = Some((key, seq));
        Ok(())
    }

    fn cut_block(&mut self) {
        let builder = std::mem::take(&mut self.current);
        let first_key = self.current_first_key.take().expect("non-empty block has a first key");
        let offset = self.buf.len() as u64;
        let bytes = builder.finish();
        self.index.push(IndexEntry { first_key, offset, len: bytes.len() as u64 });
        self.buf.put_slice(&bytes);
    }

    pub fn is_empty(&self) -> bool {
        self.entry_count == 0
    }

    pub fn entry_count(&self) -> u64 {
        self.entry_count
    }

    /// Upper estimate of the finished file size after also adding
    /// `(next_key, next_value)`. Used to cut compaction outputs under a
    /// size budget; always >= the real encoded size.
    pub fn projected_len(&self, next_key: &[u8], next_value: &Value) -> usize {
        let entry_len = crate::block::entry_encoded_len(next_key, next_value);
        let data = self.buf.len()
            + if self.current.is_empty() { 0 } else { self.current.encoded_len() }
            + entry_len
            + BLOCK_TAIL_LEN;
        let index: usize = self.index.iter().map(|e| 4 + e.first_key.len() + 16).sum::<usize>()
            + self.current_first_key.as_ref().map(|k| 4 + k.len() + 16).unwrap_or(0)
            // the next entry may open one more block
            + 4 + next_key.len() + 16
            // index section framing: count + crc
            + 8;
        let bloom = 8
            + BloomFilter::projected_bytes(self.key_hashes.len() + 1, self.bits_per_key)
            + 4;
        let stats = 4
            + self.min_key.as_ref().map(|k| k.len()).unwrap_or(next_key.len())
            + 4
            + next_key.len().max(self.max_key.as_ref().map(|k| k.len()).unwrap_or(0))
            + 4;
        data + index + bloom + stats + FOOTER_LEN
    }

    pub fn finish(mut self) -> Result<Bytes, SstError> {
        if self.entry_count == 0 {
            return Err(SstError::Empty);
        }
        if !self.current.is_empty() {
            self.cut_block();
        }
        let bloom = BloomFilter::build_from_hashes(&self.key_hashes, self.bits_per_key);

        let bloom_offset = self.buf.len() as u64;
        let mut section = BytesMut::new();
        section.put_u32_le(bloom.n_hashes());
        section.put_u32_le(bloom.bit_bytes().len() as u32);
        section.put_slice(bloom.bit_bytes());
        append_section(&mut self.buf, section);

        let index_offset = self.buf.len() as u64;
        let mut section = BytesMut::new();
        section.put_u32_le(self.index.len() as u32);
        for e in &self.index {
            section.put_u32_le(e.first_key.len() as u32);
            section.put_slice(&e.first_key);
            section.put_u64_le(e.offset);
            section.put_u64_le(e.len);
        }
        append_section(&mut self.buf, section);

        let stats_offset = self.buf.len() as u64;
        let min_key = self.min_key.expect("non-empty table");
        let max_key = self.max_key.expect("non-empty table");
        let mut section = BytesMut::new();
        section.put_u32_le(min_key.len() as u32);
        section.put_slice(&min_key);
        section.put_u32_le(max_key.len() as u32);
        section.put_slice(&max_key);
        append_section(&mut self.buf, section);

        let mut footer = BytesMut::with_capacity(FOOTER_LEN);
        footer.put_u64_le(bloom_offset);
        footer.put_u64_le(index_offset);
        footer.put_u64_le(stats_offset);
        footer.put_u64_le(self.entry_count);
        footer.put_u64_le(self.min_seq);
        footer.put_u64_le(self.max_seq);
        footer.put_u32_le(FORMAT_VERSION);
        footer.put_u32_le(0); // reserved
        let crc = crc32fast::hash(&footer);
        footer.put_u32_le(crc);
        footer.put_u32_le(SST_MAGIC);
        debug_assert_eq!(footer.len(), FOOTER_LEN);
        self.buf.put_slice(&footer);
        Ok(self.buf.freeze())
    }
}

fn append_section(buf: &mut BytesMut, section: BytesMut) {
    let crc = crc32fast::hash(&section);
    buf.put_slice(&section);
    buf.put_u32_le(crc);
}

/// Encode an immutable, non-empty memtable as an SSTable. Tombstones are
/// never dropped at flush time.
pub fn memtable_flush(
    mt: &Memtable,
    block_size: usize,
    bits_per_key: usize,
) -> Result<Bytes, MemtableError> {
    if mt.state() != MemtableState::Immutable {
        return Err(MemtableError::StillActive);
    }
    if mt.is_empty() {
        return Err(MemtableError::Empty);
    }
    let mut b = SsTableBuilder::new(block_size, bits_per_key);
    for (k, s, v) in mt.iter() {
        b.add(k.clone(), s, v).expect("memtable iterates in key order");
    }
    Ok(b.finish().expect("non-empty memtable"))
}

/// An [`ObjectRead`] that counts how many data-block reads pass through it.
/// Test instrumentation for the bloom short-circuit contract.
pub struct CountingSource<'a, R: ObjectRead + ?Sized> {
    pub inner: &'a R,
    pub reads: std::cell::Cell<usize>,
}

impl<'a, R: ObjectRead + ?Sized> CountingSource<'a, R> {
    pub fn new(inner: &'a R) -> Self {
        CountingSource { inner, reads: std::cell::Cell::new(0) }
    }
}

impl<R: ObjectRead + ?Sized> ObjectRead for CountingSource<'_, R> {
    fn read(&self, offset: u64, len: u64) -> Result<Bytes, SstError> {
        self.reads.set(self.reads.get() + 1);
        self.inner.read(offset, len)
    }
}
