//! Write-once object storage, memory- or disk-backed.
//!
//! Disk layout: one file per object named `<range_id>-<file_no>.sst`.
//! Writes go to a temp file, are synced, then renamed into place, so an
//! acked put survives a process kill. MemoryOnly deliberately loses
//! everything on restart; it models the DRAM tier.

use crate::StocError;
use bytes::Bytes;
use dlsm_core::ObjectId;
use parking_lot::RwLock;
use std::collections::HashMap;
use std::fs;
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BackingTier {
    MemoryOnly,
    DiskBacked(PathBuf),
}

enum Stored {
    Mem(Bytes),
    Disk { len: u64 },
}

impl Stored {
    fn len(&self) -> u64 {
        match self {
            Stored::Mem(b) => b.len() as u64,
            Stored::Disk { len } => *len,
        }
    }
}

pub struct ObjectStore {
    tier: BackingTier,
    objects: RwLock<HashMap<ObjectId, Stored>>,
}

fn file_name(id: ObjectId) -> String {
    format!("{}-{}.sst", id.range_id, id.file_no)
}

fn parse_file_name(name: &str) -> Option<ObjectId> {
    let stem = name.strip_suffix(".sst")?;
    let (range, file_no) = stem.split_once('-')?;
    Some(ObjectId::new(range.parse().ok()?, file_no.parse().ok()?))
}

impl ObjectStore {
    /// Open the store, scanning existing objects when disk-backed.
    pub fn open(tier: BackingTier) -> Result<Self, StocError> {
        let mut objects = HashMap::new();
        if let BackingTier::DiskBacked(dir) = &tier {
            fs::create_dir_all(dir)?;
            for entry in fs::read_dir(dir)? {
                let entry = entry?;
                let name = entry.file_name();
                let Some(name) = name.to_str() else { continue };
                if name.starts_with(".tmp-") {
                    // leftover from a kill mid-write; the put was never acked
                    fs::remove_file(entry.path()).ok();
                    continue;
                }
                if let Some(id) = parse_file_name(name) {
                    let len = entry.metadata()?.len();
                    objects.insert(id, Stored::Disk { len });
                }
            }
        }
        Ok(ObjectStore { tier, objects: RwLock::new(objects) })
    }

    pub fn tier(&self) -> &BackingTier {
        &self.tier
    }

    fn path_of(&self, id: ObjectId) -> Option<PathBuf> {
        match &self.tier {
            BackingTier::DiskBacked(dir) => Some(dir.join(file_name(id))),
            BackingTier::MemoryOnly => None,
        }
    }

    /// Store a new object durably (per tier) and return its receipt.
    pub fn put(&self, id: ObjectId, bytes: Bytes) -> Result<crate::Receipt, StocError> {
        if self.objects.read().contains_key(&id) {
            return Err(StocError::AlreadyExists);
        }
        let checksum = crc32fast::hash(&bytes);
        let len = bytes.len() as u64;
        match &self.tier {
            BackingTier::MemoryOnly => {
                let mut map = self.objects.write();
                if map.contains_key(&id) {
                    return Err(StocError::AlreadyExists);
                }
                map.insert(id, Stored::Mem(bytes));
            }
            BackingTier::DiskBacked(dir) => {
                let tmp = dir.join(format!(".tmp-{}", file_name(id)));
                let path = dir.join(file_name(id));
                {
                    let mut f = fs::File::create(&tmp)?;
                    f.write_all(&bytes)?;
                    f.sync_all()?;
                }
                let mut map = self.objects.write();
                if map.contains_key(&id) {
                    fs::remove_file(&tmp).ok();
                    return Err(StocError::AlreadyExists);
                }
                fs::rename(&tmp, &path)?;
                sync_dir(dir);
                map.insert(id, Stored::Disk { len });
            }
        }
        Ok(crate::Receipt { id, checksum, len })
    }

    /// Raw slice read; the store does not interpret contents.
    pub fn get(&self, id: ObjectId, offset: u64, len: u64) -> Result<Bytes, StocError> {
        let map = self.objects.read();
        let stored = map.get(&id).ok_or(StocError::NotFound)?;
        let object_len = stored.len();
        let end = offset.checked_add(len).ok_or(StocError::OutOfRange {
            offset,
            len,
            object_len,
        })?;
        if end > object_len {
            return Err(StocError::OutOfRange { offset, len, object_len });
        }
        match stored {
            Stored::Mem(b) => Ok(b.slice(offset as usize..end as usize)),
            Stored::Disk { .. } => {
                let path = self.path_of(id).expect("disk tier has a path");
                drop(map);
                let mut f = fs::File::open(path).map_err(|_| StocError::NotFound)?;
                f.seek(SeekFrom::Start(offset))?;
                let mut buf = vec![0u8; len as usize];
                f.read_exact(&mut buf)?;
                Ok(Bytes::from(buf))
            }
        }
    }

    pub fn len_of(&self, id: ObjectId) -> Result<u64, StocError> {
        Ok(self.objects.read().get(&id).ok_or(StocError::NotFound)?.len())
    }

    pub fn delete(&self, id: ObjectId) -> Result<u64, StocError> {
        let mut map = self.objects.write();
        let stored = map.remove(&id).ok_or(StocError::NotFound)?;
        let len = stored.len();
        if let Some(path) = self.path_of(id) {
            fs::remove_file(path).ok();
        }
        Ok(len)
    }

    pub fn list(&self, range_id: Option<u32>) -> Vec<crate::ListedObject> {
        let map = self.objects.read();
        let mut out: Vec<crate::ListedObject> = map
            .iter()
            .filter(|(id, _)| range_id.map_or(true, |r| id.range_id == r))
            .map(|(id, s)| crate::ListedObject { id: *id, len: s.len() })
            .collect();
        out.sort_by_key(|o| o.id);
        out
    }

    pub fn totals(&self) -> (u64, u64) {
        let map = self.objects.read();
        let bytes = map.values().map(|s| s.len()).sum();
        (bytes, map.len() as u64)
    }
}

pub(crate) fn sync_dir(dir: &Path) {
    if let Ok(d) = fs::File::open(dir) {
        d.sync_all().ok();
    }
}
