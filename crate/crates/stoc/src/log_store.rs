//! Append-only logs with per-log fencing and truncation.
//!
//! Disk layout: segmented append files `<log_id>.log.<segment>` plus a
//! small `<log_id>.meta` carrying the truncation floor and fence epoch.
//! Record framing (little-endian): `lsn u64 | len u32 | crc32 u32 | bytes`,
//! crc over lsn and bytes. Recovery drops a torn tail record; everything
//! acked was synced first, so acked appends survive a kill.

use crate::object_store::sync_dir;
use crate::{BackingTier, StocError};
use bytes::Bytes;
use parking_lot::{Mutex, RwLock};
use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

const DEFAULT_SEGMENT_BYTES: u64 = 1 << 20;

struct Segment {
    idx: u64,
    max_lsn: u64,
    len: u64,
}

struct LogInner {
    log_id: u64,
    dir: Option<PathBuf>,
    next_lsn: u64,
    floor: u64,
    fence: u64,
    /// Records with lsn > floor, ascending.
    records: Vec<(u64, Bytes)>,
    segments: Vec<Segment>,
    current: Option<fs::File>,
    segment_max: u64,
}

fn seg_path(dir: &PathBuf, log_id: u64, idx: u64) -> PathBuf {
    dir.join(format!("{log_id}.log.{idx}"))
}

fn meta_path(dir: &PathBuf, log_id: u64) -> PathBuf {
    dir.join(format!("{log_id}.meta"))
}

impl LogInner {
    fn persist_meta(&self) -> Result<(), StocError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let mut buf = Vec::with_capacity(20);
        buf.extend_from_slice(&self.floor.to_le_bytes());
        buf.extend_from_slice(&self.fence.to_le_bytes());
        buf.extend_from_slice(&crc32fast::hash(&buf).to_le_bytes());
        let tmp = dir.join(format!(".tmp-{}.meta", self.log_id));
        {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&buf)?;
            f.sync_all()?;
        }
        fs::rename(&tmp, meta_path(dir, self.log_id))?;
        sync_dir(dir);
        Ok(())
    }

    fn append(&mut self, epoch: u64, record: Bytes) -> Result<u64, StocError> {
        if epoch < self.fence {
            return Err(StocError::Fenced { got: epoch, fence: self.fence });
        }
        let lsn = self.next_lsn;
        if let Some(dir) = &self.dir.clone() {
            let need_new = self.segments.last().map_or(true, |s| s.len >= self.segment_max);
            if need_new {
                let idx = self.segments.last().map(|s| s.idx + 1).unwrap_or(0);
                let f = fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(seg_path(dir, self.log_id, idx))?;
                self.segments.push(Segment { idx, max_lsn: 0, len: 0 });
                self.current = Some(f);
            } else if self.current.is_none() {
                // reopened after recovery: keep appending to the tail segment
                let idx = self.segments.last().expect("nonempty").idx;
                let f = fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(seg_path(dir, self.log_id, idx))?;
                self.current = Some(f);
            }
            let mut buf = Vec::with_capacity(16 + record.len());
            buf.extend_from_slice(&lsn.to_le_bytes());
            buf.extend_from_slice(&(record.len() as u32).to_le_bytes());
            let mut crc = crc32fast::Hasher::new();
            crc.update(&lsn.to_le_bytes());
            crc.update(&record);
            buf.extend_from_slice(&crc.finalize().to_le_bytes());
            buf.extend_from_slice(&record);
            let f = self.current.as_mut().expect("segment open");
            f.write_all(&buf)?;
            f.sync_data()?;
            let seg = self.segments.last_mut().expect("segment exists");
            seg.len += buf.len() as u64;
            seg.max_lsn = lsn;
        }
        self.next_lsn += 1;
        self.records.push((lsn, record));
        Ok(lsn)
    }

    fn read(&self, from_lsn: u64) -> Vec<(u64, Bytes)> {
        let start = self.records.partition_point(|(l, _)| *l < from_lsn);
        self.records[start..].to_vec()
    }

    fn truncate(&mut self, upto_lsn: u64) -> Result<(), StocError> {
        if upto_lsn <= self.floor {
            return Ok(());
        }
        self.floor = upto_lsn.min(self.next_lsn.saturating_sub(1));
        self.records.retain(|(l, _)| *l > self.floor);
        if let Some(dir) = &self.dir.clone() {
            let floor = self.floor;
            self.segments.retain(|s| {
                if s.max_lsn <= floor && s.len > 0 {
                    fs::remove_file(seg_path(dir, self.log_id, s.idx)).ok();
                    false
                } else {
                    true
                }
            });
            if self.segments.is_empty() {
                self.current = None;
            }
            self.persist_meta()?;
        }
        Ok(())
    }

    fn fence_to(&mut self, epoch: u64) -> Result<u64, StocError> {
        if epoch > self.fence {
            self.fence = epoch;
            self.persist_meta()?;
        }
        Ok(self.fence)
    }
}

pub struct LogStore {
    tier: BackingTier,
    segment_max: u64,
    logs: RwLock<HashMap<u64, Arc<Mutex<LogInner>>>>,
}

impl LogStore {
    pub fn open(tier: BackingTier) -> Result<Self, StocError> {
        let store = LogStore {
            tier: tier.clone(),
            segment_max: DEFAULT_SEGMENT_BYTES,
            logs: RwLock::new(HashMap::new()),
        };
        if let BackingTier::DiskBacked(dir) = &tier {
            fs::create_dir_all(dir)?;
            // log_id -> segment indices
            let mut seen: HashMap<u64, Vec<u64>> = HashMap::new();
            for entry in fs::read_dir(dir)? {
                let entry = entry?;
                let name = entry.file_name();
                let Some(name) = name.to_str() else { continue };
                if let Some((id_part, rest)) = name.split_once(".log.") {
                    if let (Ok(id), Ok(idx)) = (id_part.parse(), rest.parse()) {
                        seen.entry(id).or_default().push(idx);
                    }
                } else if let Some(id_part) = name.strip_suffix(".meta") {
                    if let Ok(id) = id_part.parse() {
                        seen.entry(id).or_default();
                    }
                }
            }
            let mut logs = store.logs.write();
            for (log_id, mut seg_idxs) in seen {
                seg_idxs.sort_unstable();
                let inner = store.recover_log(dir.clone(), log_id, &seg_idxs)?;
                logs.insert(log_id, Arc::new(Mutex::new(inner)));
            }
        }
        Ok(store)
    }

    fn recover_log(
        &self,
        dir: PathBuf,
        log_id: u64,
        seg_idxs: &[u64],
    ) -> Result<LogInner, StocError> {
        let (mut floor, mut fence) = (0u64, 0u64);
        if let Ok(buf) = fs::read(meta_path(&dir, log_id)) {
            if buf.len() == 20 {
                let crc = u32::from_le_bytes(buf[16..20].try_into().unwrap());
                if crc32fast::hash(&buf[..16]) == crc {
                    floor = u64::from_le_bytes(buf[0..8].try_into().unwrap());
                    fence = u64::from_le_bytes(buf[8..16].try_into().unwrap());
                }
            }
        }
        let mut records = Vec::new();
        let mut segments = Vec::new();
        let mut next_lsn = floor + 1;
        for &idx in seg_idxs {
            let path = seg_path(&dir, log_id, idx);
            let raw = fs::read(&path)?;
            let mut pos = 0usize;
            let mut max_lsn = 0u64;
            let mut valid_len = 0u64;
            while pos + 16 <= raw.len() {
                let lsn = u64::from_le_bytes(raw[pos..pos + 8].try_into().unwrap());
                let len = u32::from_le_bytes(raw[pos + 8..pos + 12].try_into().unwrap()) as usize;
                let crc = u32::from_le_bytes(raw[pos + 12..pos + 16].try_into().unwrap());
                if pos + 16 + len > raw.len() {
                    break; // torn tail from a kill mid-write; never acked
                }
                let body = &raw[pos + 16..pos + 16 + len];
                let mut h = crc32fast::Hasher::new();
                h.update(&lsn.to_le_bytes());
                h.update(body);
                if h.finalize() != crc {
                    break;
                }
                pos += 16 + len;
                valid_len = pos as u64;
                max_lsn = lsn;
                next_lsn = next_lsn.max(lsn + 1);
                if lsn > floor {
                    records.push((lsn, Bytes::copy_from_slice(body)));
                }
            }
            if (valid_len as usize) < raw.len() {
                // drop the torn tail so future appends start clean
                let f = fs::OpenOptions::new().write(true).open(&path)?;
                f.set_len(valid_len)?;
                f.sync_all()?;
            }
            segments.push(Segment { idx, max_lsn, len: valid_len });
        }
        records.sort_by_key(|(l, _)| *l);
        Ok(LogInner {
            log_id,
            dir: Some(dir),
            next_lsn,
            floor,
            fence,
            records,
            segments,
            current: None,
            segment_max: self.segment_max,
        })
    }

    fn get(&self, log_id: u64) -> Option<Arc<Mutex<LogInner>>> {
        self.logs.read().get(&log_id).cloned()
    }

    fn get_or_create(&self, log_id: u64) -> Result<Arc<Mutex<LogInner>>, StocError> {
        if let Some(log) = self.get(log_id) {
            return Ok(log);
        }
        let mut logs = self.logs.write();
        if let Some(log) = logs.get(&log_id) {
            return Ok(log.clone());
        }
        let dir = match &self.tier {
            BackingTier::DiskBacked(d) => Some(d.clone()),
            BackingTier::MemoryOnly => None,
        };
        let inner = LogInner {
            log_id,
            dir,
            next_lsn: 1,
            floor: 0,
            fence: 0,
            records: Vec::new(),
            segments: Vec::new(),
            current: None,
            segment_max: self.segment_max,
        };
        inner.persist_meta()?;
        let log = Arc::new(Mutex::new(inner));
        logs.insert(log_id, log.clone());
        Ok(log)
    }

    /// Strictly increasing LSN per log; the record is durable (per tier)
    /// before this returns.
    pub fn append(&self, log_id: u64, epoch: u64, record: Bytes) -> Result<u64, StocError> {
        let log = self.get_or_create(log_id)?;
        let mut inner = log.lock();
        inner.append(epoch, record)
    }

    /// All records with `lsn >= from_lsn` that survive the truncation
    /// floor, in LSN order.
    pub fn read(&self, log_id: u64, from_lsn: u64) -> Result<Vec<(u64, Bytes)>, StocError> {
        let log = self.get(log_id).ok_or(StocError::NotFound)?;
        let inner = log.lock();
        Ok(inner.read(from_lsn))
    }

    pub fn truncate(&self, log_id: u64, upto_lsn: u64) -> Result<(), StocError> {
        let log = self.get(log_id).ok_or(StocError::NotFound)?;
        let mut inner = log.lock();
        inner.truncate(upto_lsn)
    }

    /// Raise the log's fence; appends with a lower epoch are rejected from
    /// then on. Creates the log if needed so a new owner can fence before
    /// the old owner ever wrote.
    pub fn fence(&self, log_id: u64, epoch: u64) -> Result<u64, StocError> {
        let log = self.get_or_create(log_id)?;
        let mut inner = log.lock();
        inner.fence_to(epoch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mem() -> LogStore {
        LogStore::open(BackingTier::MemoryOnly).unwrap()
    }

    #[test]
    fn lsns_count_up_from_one() {
        let logs = mem();
        assert_eq!(logs.append(1, 0, Bytes::from_static(b"a")).unwrap(), 1);
        assert_eq!(logs.append(1, 0, Bytes::from_static(b"b")).unwrap(), 2);
        assert_eq!(logs.append(1, 0, Bytes::from_static(b"c")).unwrap(), 3);
    }

    #[test]
    fn read_from_positions() {
        let logs = mem();
        for i in 0..5u8 {
            logs.append(1, 0, Bytes::from(vec![i])).unwrap();
        }
        assert_eq!(logs.read(1, 0).unwrap().len(), 5);
        assert_eq!(logs.read(1, 3).unwrap().len(), 3);
        assert_eq!(logs.read(1, 99).unwrap(), vec![]);
        assert_eq!(logs.read(9, 0).unwrap_err(), StocError::NotFound);
    }

    #[test]
    fn truncate_drops_prefix_only() {
        let logs = mem();
        for i in 0..5u8 {
            logs.append(1, 0, Bytes::from(vec![i])).unwrap();
        }
        logs.truncate(1, 0).unwrap(); // no-op
        assert_eq!(logs.read(1, 0).unwrap().len(), 5);
        logs.truncate(1, 3).unwrap();
        let rest = logs.read(1, 0).unwrap();
        assert_eq!(rest.iter().map(|(l, _)| *l).collect::<Vec<_>>(), vec![4, 5]);
        logs.truncate(1, 5).unwrap(); // to tail: empties
        assert_eq!(logs.read(1, 0).unwrap(), vec![]);
        // appends continue past the floor
        assert_eq!(logs.append(1, 0, Bytes::from_static(b"z")).unwrap(), 6);
    }

    #[test]
    fn fence_rejects_stale_epochs() {
        let logs = mem();
        logs.append(1, 2, Bytes::from_static(b"a")).unwrap();
        logs.fence(1, 5).unwrap();
        assert_eq!(
            logs.append(1, 2, Bytes::from_static(b"b")).unwrap_err(),
            StocError::Fenced { got: 2, fence: 5 }
        );
        logs.append(1, 5, Bytes::from_static(b"c")).unwrap();
    }

    #[test]
    fn interleaved_append_truncate_matches_oracle() {
        use rand::{Rng, SeedableRng};
        let logs = mem();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut oracle: Vec<(u64, Vec<u8>)> = Vec::new();
        let mut next = 1u64;
        for _ in 0..500 {
            if rng.gen_bool(0.8) {
                let body = vec![rng.gen::<u8>(); rng.gen_range(1..16)];
                let lsn = logs.append(4, 0, Bytes::from(body.clone())).unwrap();
                assert_eq!(lsn, next);
                oracle.push((lsn, body));
                next += 1;
            } else if next > 1 {
                let upto = rng.gen_range(0..next);
                logs.truncate(4, upto).unwrap();
                oracle.retain(|(l, _)| *l > upto);
            }
            let got = logs.read(4, 0).unwrap();
            assert_eq!(got.len(), oracle.len());
            for ((gl, gb), (ol, ob)) in got.iter().zip(oracle.iter()) {
                assert_eq!(gl, ol);
                assert_eq!(gb.as_ref(), ob.as_slice());
            }
        }
    }

    #[test]
    fn disk_log_survives_reopen_with_floor_and_fence() {
        let dir = tempfile::tempdir().unwrap();
        let tier = BackingTier::DiskBacked(dir.path().to_path_buf());
        {
            let logs = LogStore::open(tier.clone()).unwrap();
            for i in 0..10u8 {
                logs.append(3, 1, Bytes::from(vec![i])).unwrap();
            }
            logs.truncate(3, 4).unwrap();
            logs.fence(3, 7).unwrap();
        }
        let logs = LogStore::open(tier).unwrap();
        let rest = logs.read(3, 0).unwrap();
        assert_eq!(rest.iter().map(|(l, _)| *l).collect::<Vec<_>>(), vec![5, 6, 7, 8, 9, 10]);
        // fence survives restart
        assert!(matches!(
            logs.append(3, 1, Bytes::from_static(b"x")).unwrap_err(),
            StocError::Fenced { fence: 7, .. }
        ));
        // lsn counter continues, never reuses
        assert_eq!(logs.append(3, 7, Bytes::from_static(b"x")).unwrap(), 11);
    }

    #[test]
    fn torn_tail_record_dropped_on_recovery() {
        let dir = tempfile::tempdir().unwrap();
        let tier = BackingTier::DiskBacked(dir.path().to_path_buf());
        {
            let logs = LogStore::open(tier.clone()).unwrap();
            logs.append(9, 0, Bytes::from_static(b"good")).unwrap();
            logs.append(9, 0, Bytes::from_static(b"also good")).unwrap();
        }
        // chop a few bytes off the segment tail, as a kill mid-write would
        let seg = dir.path().join("9.log.0");
        let len = fs::metadata(&seg).unwrap().len();
        let f = fs::OpenOptions::new().write(true).open(&seg).unwrap();
        f.set_len(len - 3).unwrap();
        drop(f);
        let logs = LogStore::open(tier).unwrap();
        let records = logs.read(9, 0).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].1.as_ref(), b"good");
        // The torn record was never acked; its LSN slot is free again and
        // acked LSNs remain strictly increasing.
        assert_eq!(logs.append(9, 0, Bytes::from_static(b"new")).unwrap(), 2);
    }
}
