//! Persistent embedding cache.
//!
//! File layout (little-endian):
//!
//! ```text
//! header:  "MPVE" | version u32 | dim u32 | count u64
//! record:  kind u16 | text_len u32 | text (UTF-8) | dim x f32
//! ```
//!
//! New entries are appended to `<path>.journal` (header `"MPVJ" | version |
//! dim`, then records) and folded into the main file when the cache closes.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, RwLock};

use super::{EmbedKind, Embedder, EmbeddingRequest};
use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::vector::SemanticVector;

const MAGIC: &[u8; 4] = b"MPVE";
const JOURNAL_MAGIC: &[u8; 4] = b"MPVJ";
pub(crate) const CACHE_VERSION: u32 = 1;

type Key = (EmbedKind, String);

#[derive(Default)]
struct Table {
    slots: HashMap<Key, usize>,
    entries: Vec<(Key, SemanticVector)>,
}

impl Table {
    fn insert(&mut self, key: Key, v: SemanticVector) -> bool {
        if self.slots.contains_key(&key) {
            return false;
        }
        self.slots.insert(key.clone(), self.entries.len());
        self.entries.push((key, v));
        true
    }

    fn get(&self, key: &Key) -> Option<&SemanticVector> {
        self.slots.get(key).map(|&i| &self.entries[i].1)
    }
}

/// Read-through cache in front of another provider.
pub struct CachedEmbedder<E: Embedder> {
    inner: E,
    path: PathBuf,
    dim: usize,
    table: RwLock<Table>,
    journal: Mutex<Option<BufWriter<File>>>,
    dirty: std::sync::atomic::AtomicBool,
    inner_calls: AtomicU64,
    inner_requests: AtomicU64,
}

fn journal_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".journal");
    PathBuf::from(s)
}

fn write_record(w: &mut Writer, kind: EmbedKind, text: &str, v: &SemanticVector) {
    w.u16(kind.code());
    w.str(text);
    w.f32s(v.as_slice());
}

fn read_record(r: &mut Reader<'_>, dim: usize) -> Result<(Key, SemanticVector)> {
    let at = r.offset();
    let kind = EmbedKind::from_code(r.u16()?)
        .ok_or_else(|| Error::corrupt(at, "unknown embedding kind"))?;
    let text = r.str()?;
    let values = r.f32s(dim)?;
    let v = SemanticVector::with_dim(values, dim).map_err(|_| Error::corrupt(at, "bad vector"))?;
    Ok(((kind, text), v))
}

impl<E: Embedder> CachedEmbedder<E> {
    /// Opens (or creates) the cache at `path`, replaying any journal left by
    /// an unclean shutdown.
    pub fn open(path: impl AsRef<Path>, inner: E) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let dim = inner.dim();
        let mut table = Table::default();
        if path.exists() {
            let data = fs::read(&path)?;
            let mut r = Reader::new(&data);
            if r.take(4)? != MAGIC {
                return Err(Error::corrupt(0, "bad cache magic"));
            }
            let version = r.u32()?;
            if version != CACHE_VERSION {
                return Err(Error::FormatVersionMismatch {
                    expected: CACHE_VERSION,
                    found: version,
                });
            }
            let file_dim = r.u32()? as usize;
            if file_dim != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: file_dim,
                });
            }
            let count = r.u64()?;
            for _ in 0..count {
                let (k, v) = read_record(&mut r, dim)?;
                table.insert(k, v);
            }
        }
        let jpath = journal_path(&path);
        let mut replayed = false;
        if jpath.exists() {
            let data = fs::read(&jpath)?;
            let mut r = Reader::new(&data);
            let header_ok = r.take(4).map(|m| m == JOURNAL_MAGIC).unwrap_or(false)
                && r.u32().ok() == Some(CACHE_VERSION)
                && r.u32().ok() == Some(dim as u32);
            if header_ok {
                while r.remaining() > 0 {
                    match read_record(&mut r, dim) {
                        Ok((k, v)) => replayed |= table.insert(k, v),
                        Err(e) => {
                            log::warn!("ignoring torn journal tail in {}: {e}", jpath.display());
                            break;
                        }
                    }
                }
            } else {
                log::warn!("discarding unreadable journal {}", jpath.display());
            }
            fs::remove_file(&jpath)?;
        }
        let cache = Self {
            inner,
            path,
            dim,
            table: RwLock::new(table),
            journal: Mutex::new(None),
            dirty: std::sync::atomic::AtomicBool::new(replayed),
            inner_calls: AtomicU64::new(0),
            inner_requests: AtomicU64::new(0),
        };
        if replayed {
            cache.compact()?;
        }
        Ok(cache)
    }

    /// Number of `embed_batch` calls forwarded to the wrapped provider.
    pub fn inner_calls(&self) -> u64 {
        self.inner_calls.load(Ordering::Relaxed)
    }

    /// Number of individual requests forwarded to the wrapped provider.
    pub fn inner_requests(&self) -> u64 {
        self.inner_requests.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.table.read().unwrap_or_else(|e| e.into_inner()).entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn append_journal(&self, fresh: &[(Key, SemanticVector)]) -> Result<()> {
        let mut guard = self.journal.lock().unwrap_or_else(|e| e.into_inner());
        if guard.is_none() {
            let jpath = journal_path(&self.path);
            let is_new = !jpath.exists();
            let file = OpenOptions::new().create(true).append(true).open(&jpath)?;
            let mut w = BufWriter::new(file);
            if is_new {
                let mut h = Writer::new();
                h.bytes(JOURNAL_MAGIC);
                h.u32(CACHE_VERSION);
                h.u32(self.dim as u32);
                w.write_all(&h.buf)?;
            }
            *guard = Some(w);
        }
        let w = guard.as_mut().expect("opened above");
        let mut rec = Writer::new();
        for ((kind, text), v) in fresh {
            write_record(&mut rec, *kind, text, v);
        }
        w.write_all(&rec.buf)?;
        w.flush()?;
        self.dirty.store(true, Ordering::Relaxed);
        Ok(())
    }

    /// Rewrites the main file with every entry and drops the journal.
    pub fn compact(&self) -> Result<()> {
        let mut journal = self.journal.lock().unwrap_or_else(|e| e.into_inner());
        let table = self.table.read().unwrap_or_else(|e| e.into_inner());
        let mut w = Writer::new();
        w.bytes(MAGIC);
        w.u32(CACHE_VERSION);
        w.u32(self.dim as u32);
        w.u64(table.entries.len() as u64);
        for ((kind, text), v) in &table.entries {
            write_record(&mut w, *kind, text, v);
        }
        let dir = self
            .path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or_else(|| Path::new("."));
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(&w.buf)?;
        tmp.as_file().sync_all()?;
        tmp.persist(&self.path).map_err(|e| Error::Io(e.error))?;
        *journal = None;
        let jpath = journal_path(&self.path);
        if jpath.exists() {
            fs::remove_file(jpath)?;
        }
        self.dirty.store(false, Ordering::Relaxed);
        Ok(())
    }

    /// Compacts and releases the cache.
    pub fn close(self) -> Result<()> {
        self.compact()
    }
}

impl<E: Embedder> Drop for CachedEmbedder<E> {
    fn drop(&mut self) {
        if self.dirty.load(Ordering::Relaxed) {
            if let Err(e) = self.compact() {
                log::warn!("embedding cache compaction failed: {e}");
            }
        }
    }
}

impl<E: Embedder> Embedder for CachedEmbedder<E> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    fn embed_batch(&self, reqs: &[EmbeddingRequest]) -> Result<Vec<SemanticVector>> {
        let mut out: Vec<Option<SemanticVector>> = Vec::with_capacity(reqs.len());
        let mut missing: Vec<EmbeddingRequest> = Vec::new();
        let mut missing_slot: HashMap<Key, usize> = HashMap::new();
        {
            let table = self.table.read().unwrap_or_else(|e| e.into_inner());
            for r in reqs {
                let key = (r.kind, r.text.clone());
                match table.get(&key) {
                    Some(v) => out.push(Some(v.clone())),
                    None => {
                        if r.text.trim().is_empty() {
                            return Err(Error::EmptyText);
                        }
                        missing_slot.entry(key).or_insert_with(|| {
                            missing.push(r.clone());
                            missing.len() - 1
                        });
                        out.push(None);
                    }
                }
            }
        }
        if !missing.is_empty() {
            self.inner_calls.fetch_add(1, Ordering::Relaxed);
            self.inner_requests
                .fetch_add(missing.len() as u64, Ordering::Relaxed);
            let computed = self.inner.embed_batch(&missing)?;
            let mut fresh = Vec::new();
            {
                let mut table = self.table.write().unwrap_or_else(|e| e.into_inner());
                for (req, v) in missing.iter().zip(&computed) {
                    let key = (req.kind, req.text.clone());
                    if table.insert(key.clone(), v.clone()) {
                        fresh.push((key, v.clone()));
                    }
                }
            }
            if !fresh.is_empty() {
                self.append_journal(&fresh)?;
            }
            for (slot, r) in out.iter_mut().zip(reqs) {
                if slot.is_none() {
                    let i = missing_slot[&(r.kind, r.text.clone())];
                    *slot = Some(computed[i].clone());
                }
            }
        }
        Ok(out.into_iter().map(|v| v.expect("filled")).collect())
    }
}
