//! Single-file index format.
//!
//! ```text
//! header   "MPIX" | version u32 | dim u32 | count u64 | fp_len u32 | fp bytes
//!          | crc32 u32 of the preceding header bytes
//! table    count x (offset u64 | len u32 | crc32 u32)
//! blobs    one per entry, contiguous, in ingestion order
//! ```
//!
//! A blob holds id, caption, video_ref (u32-length strings), a metadata
//! flag byte followed by the optional duration and fps (f64), the sentence
//! vector, the unit count, and per unit a presence bitmask, the token span,
//! then text + vector for every present role. The core unit index closes
//! the blob (`u32::MAX` when there are no units).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};

use super::{CorpusIndex, EntryMeta, IndexBuilder, InternedUnit, WordId};

const MAGIC: &[u8; 4] = b"MPIX";
pub const INDEX_VERSION: u32 = 1;
const NO_CORE: u32 = u32::MAX;
const HAS_DURATION: u8 = 1;
const HAS_FPS: u8 = 2;
const TABLE_ROW: usize = 16;

fn encode_entry(index: &CorpusIndex, pos: usize, w: &mut Writer) {
    let rec = &index.entries[pos];
    w.str(&rec.id);
    w.str(&rec.caption);
    w.str(&rec.video_ref);
    let flags = (rec.duration_s.is_some() as u8 * HAS_DURATION) | (rec.fps.is_some() as u8 * HAS_FPS);
    w.u8(flags);
    if let Some(d) = rec.duration_s {
        w.f64(d);
    }
    if let Some(f) = rec.fps {
        w.f64(f);
    }
    w.f32s(index.total(pos).values);
    w.u32(rec.units.len() as u32);
    for u in &rec.units {
        let mask = u
            .roles
            .iter()
            .enumerate()
            .fold(0u8, |m, (i, r)| m | ((r.is_some() as u8) << i));
        w.u8(mask);
        w.u32(u.span.0);
        w.u32(u.span.1);
        for id in u.roles.iter().flatten() {
            w.str(&index.words.texts[*id as usize]);
            w.f32s(index.words.vector(*id));
        }
    }
    w.u32(rec.core.unwrap_or(NO_CORE));
}

impl CorpusIndex {
    /// Serialises the index to bytes in the on-disk format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut blobs = Writer::new();
        let mut rows = Vec::with_capacity(self.len());
        for pos in 0..self.len() {
            let start = blobs.buf.len();
            encode_entry(self, pos, &mut blobs);
            let blob = &blobs.buf[start..];
            rows.push((start as u64, blob.len() as u32, crc32fast::hash(blob)));
        }

        let mut w = Writer::new();
        w.bytes(MAGIC);
        w.u32(INDEX_VERSION);
        w.u32(self.dim() as u32);
        w.u64(self.len() as u64);
        w.str(self.fingerprint());
        w.u32(crc32fast::hash(&w.buf));
        let blob_base = (w.buf.len() + rows.len() * TABLE_ROW) as u64;
        for (off, len, crc) in rows {
            w.u64(blob_base + off);
            w.u32(len);
            w.u32(crc);
        }
        w.bytes(&blobs.buf);
        w.buf
    }

    /// Writes the index atomically: the target either keeps its old content
    /// or holds the complete new file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let dir = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(&self.to_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(path).map_err(|e| Error::Io(e.error))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = Reader::new(data);
        if r.take(4)? != MAGIC {
            return Err(Error::corrupt(0, "bad magic"));
        }
        let version = r.u32()?;
        if version != INDEX_VERSION {
            return Err(Error::FormatVersionMismatch {
                expected: INDEX_VERSION,
                found: version,
            });
        }
        let dim_at = r.offset();
        let dim = r.u32()? as usize;
        if dim == 0 {
            return Err(Error::corrupt(dim_at, "zero dimension"));
        }
        let count_at = r.offset();
        let count = r.u64()?;
        let fingerprint = r.str()?;
        let header_end = r.offset();
        if r.u32()? != crc32fast::hash(&data[..header_end as usize]) {
            return Err(Error::corrupt(header_end, "header checksum mismatch"));
        }

        let table_len = count
            .checked_mul(TABLE_ROW as u64)
            .filter(|&n| n <= r.remaining() as u64)
            .ok_or_else(|| Error::corrupt(count_at, format!("entry count {count} exceeds file size")))?;
        let mut rows = Vec::with_capacity(count as usize);
        let mut expected = r.offset() + table_len;
        for _ in 0..count {
            let at = r.offset();
            let (off, len, crc) = (r.u64()?, r.u32()?, r.u32()?);
            if off != expected {
                return Err(Error::corrupt(at, format!("blob offset {off}, expected {expected}")));
            }
            expected = off + len as u64;
            if expected > data.len() as u64 {
                return Err(Error::corrupt(at, format!("blob at {off} runs past end of file")));
            }
            rows.push((off, len, crc));
        }
        if expected != data.len() as u64 {
            return Err(Error::corrupt(expected, "trailing bytes after last entry"));
        }

        // Every entry carries a full sentence vector, so a dimension the file
        // cannot hold is corruption, not a reason to allocate.
        if count > 0 && (dim as u64) * 4 > data.len() as u64 {
            return Err(Error::corrupt(dim_at, format!("dimension {dim} exceeds file size")));
        }
        let mut b = IndexBuilder::with_capacity(dim, fingerprint, count as usize);
        for (off, len, crc) in rows {
            let blob = &data[off as usize..off as usize + len as usize];
            if crc32fast::hash(blob) != crc {
                return Err(Error::corrupt(off, "entry checksum mismatch"));
            }
            decode_entry(&mut b, Reader::at(blob, off), dim)?;
        }
        Ok(b.finish())
    }
}

fn decode_entry(b: &mut IndexBuilder, mut r: Reader<'_>, dim: usize) -> Result<()> {
    let start = r.offset();
    let id = r.str()?;
    let caption = r.str()?;
    let video_ref = r.str()?;
    let flags_at = r.offset();
    let flags = r.u8()?;
    if flags & !(HAS_DURATION | HAS_FPS) != 0 {
        return Err(Error::corrupt(flags_at, "unknown metadata flags"));
    }
    let duration_s = if flags & HAS_DURATION != 0 { Some(r.f64()?) } else { None };
    let fps = if flags & HAS_FPS != 0 { Some(r.f64()?) } else { None };
    let total = r.f32s(dim)?;
    let n_units = r.u32()? as usize;
    let mut units = Vec::with_capacity(n_units.min(1024));
    for _ in 0..n_units {
        let mask_at = r.offset();
        let mask = r.u8()?;
        if mask & 1 == 0 || mask > 0b111 {
            return Err(Error::corrupt(mask_at, format!("invalid role mask {mask:#b}")));
        }
        let span = (r.u32()?, r.u32()?);
        if span.0 > span.1 {
            return Err(Error::corrupt(mask_at, "unit span start after end"));
        }
        let mut roles: [Option<WordId>; 3] = [None; 3];
        for (i, slot) in roles.iter_mut().enumerate() {
            if mask & (1 << i) != 0 {
                let text = r.str()?;
                let vec = r.f32s(dim)?;
                *slot = Some(b.intern_word(&text, &vec)?);
            }
        }
        units.push(InternedUnit {
            motion: roles[0].expect("mask has motion bit"),
            actor: roles[1],
            recipient: roles[2],
            span,
        });
    }
    let core_at = r.offset();
    let core = match r.u32()? {
        NO_CORE => None,
        c => Some(c as usize),
    };
    if r.remaining() != 0 {
        return Err(Error::corrupt(r.offset(), "unread bytes at end of entry"));
    }
    let meta = EntryMeta {
        id,
        caption,
        video_ref,
        duration_s,
        fps,
    };
    b.push_interned(meta, &total, &units, core).map_err(|e| match e {
        Error::DuplicateId(id) => Error::corrupt(start, format!("duplicate id `{id}`")),
        Error::InvalidInput(msg) => Error::corrupt(core_at, msg),
        other => other,
    })
}
