//! The searchable corpus: caption/video pairs with precomputed semantics.
//!
//! Sentence vectors live in one contiguous `n x dim` array for scanning.
//! Role vectors are interned in a word table keyed by role text, so a word
//! shared by many captions is stored (and later compared) once.

mod ingest;
mod store;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semantics::{PromptSemantics, SemanticUnit};
use crate::vector::{norm, SemanticVector, VecRef};

pub use ingest::{ingest, ingest_manifest, read_manifest, ManifestRecord};
pub use store::INDEX_VERSION;

/// Position of an interned role vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WordId(pub(crate) u32);

/// Role slots in unit order: motion, actor, recipient.
pub(crate) const MOTION: usize = 0;
pub(crate) const ACTOR: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct StoredUnit {
    pub roles: [Option<u32>; 3],
    pub span: (u32, u32),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct EntryRecord {
    pub id: String,
    pub caption: String,
    pub video_ref: String,
    pub duration_s: Option<f64>,
    pub fps: Option<f64>,
    pub units: Vec<StoredUnit>,
    pub core: Option<u32>,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct WordTable {
    pub dim: usize,
    pub data: Vec<f32>,
    pub norms: Vec<f64>,
    pub texts: Vec<String>,
    by_text: HashMap<String, Vec<u32>>,
}

impl WordTable {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.texts.len()
    }

    pub fn vector(&self, id: u32) -> &[f32] {
        let i = id as usize * self.dim;
        &self.data[i..i + self.dim]
    }

    pub fn view(&self, id: u32) -> VecRef<'_> {
        VecRef::with_norm(self.vector(id), self.norms[id as usize])
    }

    /// Returns the id of `(text, values)`, adding it when unseen. Identical
    /// text with different bits gets its own slot.
    fn intern(&mut self, text: &str, values: &[f32]) -> u32 {
        if let Some(ids) = self.by_text.get(text) {
            for &id in ids {
                if bits_equal(self.vector(id), values) {
                    return id;
                }
            }
        }
        let id = self.texts.len() as u32;
        self.data.extend_from_slice(values);
        self.norms.push(norm(values));
        self.texts.push(text.to_string());
        self.by_text.entry(text.to_string()).or_default().push(id);
        id
    }
}

fn bits_equal(a: &[f32], b: &[f32]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// A caption/video pair with its semantics, as stored in the index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub id: String,
    pub caption: String,
    pub video_ref: String,
    pub duration_s: Option<f64>,
    pub fps: Option<f64>,
    pub semantics: PromptSemantics,
}

impl CorpusEntry {
    /// Frame count implied by duration and frame rate, when both are known.
    pub fn frame_count(&self) -> Option<usize> {
        match (self.duration_s, self.fps) {
            (Some(d), Some(f)) if d > 0.0 && f > 0.0 => Some((d * f).round() as usize),
            _ => None,
        }
    }
}

/// Immutable, searchable collection of [`CorpusEntry`] values.
#[derive(Debug, Clone)]
pub struct CorpusIndex {
    dim: usize,
    fingerprint: String,
    pub(crate) entries: Vec<EntryRecord>,
    pub(crate) totals: Vec<f32>,
    pub(crate) total_norms: Vec<f64>,
    pub(crate) words: WordTable,
    positions: HashMap<String, u32>,
}

impl CorpusIndex {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Distinct interned role vectors.
    pub fn vocabulary_len(&self) -> usize {
        self.words.len()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.positions.get(id).map(|&p| p as usize)
    }

    pub fn entry_id(&self, pos: usize) -> &str {
        &self.entries[pos].id
    }

    pub fn caption(&self, pos: usize) -> &str {
        &self.entries[pos].caption
    }

    pub fn video_ref(&self, pos: usize) -> &str {
        &self.entries[pos].video_ref
    }

    pub(crate) fn total(&self, pos: usize) -> VecRef<'_> {
        let i = pos * self.dim;
        VecRef::with_norm(&self.totals[i..i + self.dim], self.total_norms[pos])
    }

    pub(crate) fn unit_roles(&self, pos: usize) -> Vec<[Option<VecRef<'_>>; 3]> {
        self.entries[pos]
            .units
            .iter()
            .map(|u| u.roles.map(|r| r.map(|id| self.words.view(id))))
            .collect()
    }

    /// Materialises the entry at `pos` (ingestion order).
    pub fn entry(&self, pos: usize) -> CorpusEntry {
        let rec = &self.entries[pos];
        let word = |id: u32| SemanticVector::new(self.words.vector(id).to_vec()).expect("stored vectors are valid");
        let text = |id: Option<u32>| id.map(|i| self.words.texts[i as usize].clone());
        let units = rec
            .units
            .iter()
            .map(|u| SemanticUnit {
                motion: word(u.roles[0].expect("motion present")),
                actor: u.roles[1].map(word),
                recipient: u.roles[2].map(word),
                motion_text: self.words.texts[u.roles[0].expect("motion present") as usize].clone(),
                actor_text: text(u.roles[1]),
                recipient_text: text(u.roles[2]),
                source_span: (u.span.0 as usize, u.span.1 as usize),
            })
            .collect();
        CorpusEntry {
            id: rec.id.clone(),
            caption: rec.caption.clone(),
            video_ref: rec.video_ref.clone(),
            duration_s: rec.duration_s,
            fps: rec.fps,
            semantics: PromptSemantics {
                raw_text: rec.caption.clone(),
                total: SemanticVector::new(self.total(pos).values.to_vec()).expect("stored vectors are valid"),
                units,
                core_index: rec.core.map(|c| c as usize),
            },
        }
    }

    pub fn get(&self, id: &str) -> Option<CorpusEntry> {
        self.position(id).map(|p| self.entry(p))
    }

    /// Visits every entry once, in ingestion order.
    pub fn scan<F: FnMut(usize, &CorpusIndex)>(&self, mut visitor: F) {
        for pos in 0..self.len() {
            visitor(pos, self);
        }
    }

    /// Maps every entry in parallel; output order is ingestion order
    /// regardless of how the work was partitioned.
    pub fn par_scan<T, F>(&self, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, &CorpusIndex) -> T + Sync + Send,
    {
        (0..self.len())
            .into_par_iter()
            .with_min_len(1024)
            .map(|pos| f(pos, self))
            .collect()
    }

    /// Warning text when the index was built by a different provider.
    pub fn fingerprint_warning(&self, provider_fingerprint: &str) -> Option<String> {
        (self.fingerprint != provider_fingerprint).then(|| {
            format!(
                "index was built with provider `{}` but queries use `{}`; similarities may be meaningless",
                self.fingerprint, provider_fingerprint
            )
        })
    }
}

impl PartialEq for CorpusIndex {
    /// Observable equality: same header and the same materialised entries,
    /// with vectors compared bit for bit.
    fn eq(&self, other: &Self) -> bool {
        if self.dim != other.dim || self.fingerprint != other.fingerprint || self.len() != other.len() {
            return false;
        }
        if !bits_equal(&self.totals, &other.totals) {
            return false;
        }
        (0..self.len()).all(|p| {
            let (a, b) = (&self.entries[p], &other.entries[p]);
            if a.id != b.id
                || a.caption != b.caption
                || a.video_ref != b.video_ref
                || a.duration_s.map(f64::to_bits) != b.duration_s.map(f64::to_bits)
                || a.fps.map(f64::to_bits) != b.fps.map(f64::to_bits)
                || a.core != b.core
                || a.units.len() != b.units.len()
            {
                return false;
            }
            a.units.iter().zip(&b.units).all(|(ua, ub)| {
                ua.span == ub.span
                    && ua.roles.iter().zip(&ub.roles).all(|(ra, rb)| match (ra, rb) {
                        (Some(x), Some(y)) => {
                            self.words.texts[*x as usize] == other.words.texts[*y as usize]
                                && bits_equal(self.words.vector(*x), other.words.vector(*y))
                        }
                        (None, None) => true,
                        _ => false,
                    })
            })
        })
    }
}

/// Header fields of an entry, without semantics.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EntryMeta {
    pub id: String,
    pub caption: String,
    pub video_ref: String,
    pub duration_s: Option<f64>,
    pub fps: Option<f64>,
}

/// A unit whose role vectors are already interned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InternedUnit {
    pub motion: WordId,
    pub actor: Option<WordId>,
    pub recipient: Option<WordId>,
    pub span: (u32, u32),
}

/// Single-writer construction of a [`CorpusIndex`].
#[derive(Debug)]
pub struct IndexBuilder {
    index: CorpusIndex,
}

impl IndexBuilder {
    pub fn new(dim: usize, fingerprint: impl Into<String>) -> Self {
        Self {
            index: CorpusIndex {
                dim,
                fingerprint: fingerprint.into(),
                entries: Vec::new(),
                totals: Vec::new(),
                total_norms: Vec::new(),
                words: WordTable::new(dim),
                positions: HashMap::new(),
            },
        }
    }

    pub fn with_capacity(dim: usize, fingerprint: impl Into<String>, entries: usize) -> Self {
        let mut b = Self::new(dim, fingerprint);
        b.index.entries.reserve(entries);
        b.index.totals.reserve(entries * dim);
        b.index.total_norms.reserve(entries);
        b
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.positions.contains_key(id)
    }

    fn check_dim(&self, v: &[f32]) -> Result<()> {
        if v.len() != self.index.dim {
            return Err(Error::DimensionMismatch {
                expected: self.index.dim,
                actual: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    pub fn intern_word(&mut self, text: &str, values: &[f32]) -> Result<WordId> {
        self.check_dim(values)?;
        Ok(WordId(self.index.words.intern(text, values)))
    }

    /// Appends an entry from its materialised form.
    pub fn push(&mut self, entry: CorpusEntry) -> Result<()> {
        entry.semantics.validate()?;
        let mut units = Vec::with_capacity(entry.semantics.units.len());
        for u in &entry.semantics.units {
            let motion = self.intern_word(&u.motion_text, u.motion.as_slice())?;
            let actor = match (&u.actor, &u.actor_text) {
                (Some(v), t) => Some(self.intern_word(t.as_deref().unwrap_or(""), v.as_slice())?),
                (None, _) => None,
            };
            let recipient = match (&u.recipient, &u.recipient_text) {
                (Some(v), t) => Some(self.intern_word(t.as_deref().unwrap_or(""), v.as_slice())?),
                (None, _) => None,
            };
            units.push(InternedUnit {
                motion,
                actor,
                recipient,
                span: (u.source_span.0 as u32, u.source_span.1 as u32),
            });
        }
        let meta = EntryMeta {
            id: entry.id,
            caption: entry.caption,
            video_ref: entry.video_ref,
            duration_s: entry.duration_s,
            fps: entry.fps,
        };
        self.push_interned(meta, entry.semantics.total.as_slice(), &units, entry.semantics.core_index)
    }

    /// Appends an entry whose role vectors were interned with
    /// [`IndexBuilder::intern_word`].
    pub fn push_interned(
        &mut self,
        meta: EntryMeta,
        total: &[f32],
        units: &[InternedUnit],
        core: Option<usize>,
    ) -> Result<()> {
        self.check_dim(total)?;
        if self.index.positions.contains_key(&meta.id) {
            return Err(Error::DuplicateId(meta.id));
        }
        match core {
            None if units.is_empty() => {}
            Some(c) if c < units.len() => {}
            _ => {
                return Err(Error::InvalidInput(format!(
                    "entry `{}`: core {core:?} invalid for {} units",
                    meta.id,
                    units.len()
                )))
            }
        }
        let words = self.index.words.len() as u32;
        let valid = |w: WordId| w.0 < words;
        if !units.iter().all(|u| {
            valid(u.motion) && u.actor.is_none_or(valid) && u.recipient.is_none_or(valid)
        }) {
            return Err(Error::InvalidInput(format!("entry `{}` references unknown word ids", meta.id)));
        }
        let pos = self.index.entries.len() as u32;
        self.index.positions.insert(meta.id.clone(), pos);
        self.index.totals.extend_from_slice(total);
        self.index.total_norms.push(norm(total));
        self.index.entries.push(EntryRecord {
            id: meta.id,
            caption: meta.caption,
            video_ref: meta.video_ref,
            duration_s: meta.duration_s,
            fps: meta.fps,
            units: units
                .iter()
                .map(|u| StoredUnit {
                    roles: [Some(u.motion.0), u.actor.map(|w| w.0), u.recipient.map(|w| w.0)],
                    span: u.span,
                })
                .collect(),
            core: core.map(|c| c as u32),
        });
        Ok(())
    }

    pub fn finish(self) -> CorpusIndex {
        self.index
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f32]) -> SemanticVector {
        SemanticVector::new(xs.to_vec()).unwrap()
    }

    fn entry(id: &str, total: &[f32], motion: &[f32]) -> CorpusEntry {
        CorpusEntry {
            id: id.into(),
            caption: format!("caption {id}"),
            video_ref: format!("{id}.mp4"),
            duration_s: Some(2.0),
            fps: Some(24.0),
            semantics: PromptSemantics {
                raw_text: format!("caption {id}"),
                total: v(total),
                units: vec![SemanticUnit {
                    motion: v(motion),
                    actor: None,
                    recipient: None,
                    motion_text: "run".into(),
                    actor_text: None,
                    recipient_text: None,
                    source_span: (0, 0),
                }],
                core_index: Some(0),
            },
        }
    }

    #[test]
    fn build_and_materialise() {
        let mut b = IndexBuilder::new(2, "fp");
        let e = entry("a", &[1.0, 0.0], &[0.0, 1.0]);
        b.push(e.clone()).unwrap();
        b.push(entry("b", &[0.0, 1.0], &[0.0, 1.0])).unwrap();
        let idx = b.finish();
        assert_eq!(idx.len(), 2);
        assert_eq!(idx.entry(0), e);
        assert_eq!(idx.position("b"), Some(1));
        // "run" with identical bits is stored once.
        assert_eq!(idx.vocabulary_len(), 1);
        assert_eq!(idx.entry(0).frame_count(), Some(48));
    }

    #[test]
    fn duplicate_and_dim_errors() {
        let mut b = IndexBuilder::new(2, "fp");
        b.push(entry("a", &[1.0, 0.0], &[0.0, 1.0])).unwrap();
        assert!(matches!(
            b.push(entry("a", &[1.0, 0.0], &[0.0, 1.0])),
            Err(Error::DuplicateId(id)) if id == "a"
        ));
        assert!(matches!(
            b.push(entry("c", &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn same_text_different_bits_kept_apart() {
        let mut b = IndexBuilder::new(2, "fp");
        b.push(entry("a", &[1.0, 0.0], &[0.0, 1.0])).unwrap();
        b.push(entry("b", &[1.0, 0.0], &[1.0, 0.0])).unwrap();
        let idx = b.finish();
        assert_eq!(idx.vocabulary_len(), 2);
        assert_eq!(idx.entry(1).semantics.units[0].motion.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn scans_agree() {
        let mut b = IndexBuilder::new(2, "fp");
        for i in 0..5000 {
            b.push(entry(&format!("e{i}"), &[1.0, i as f32], &[0.0, 1.0])).unwrap();
        }
        let idx = b.finish();
        let mut serial = Vec::new();
        idx.scan(|p, ix| serial.push(ix.entry_id(p).to_string()));
        assert_eq!(serial.len(), idx.len());
        let parallel = idx.par_scan(|p, ix| ix.entry_id(p).to_string());
        assert_eq!(serial, parallel);
    }

    #[test]
    fn fingerprint_warning_only_on_mismatch() {
        let idx = IndexBuilder::new(2, "mock;dim=2").finish();
        assert!(idx.fingerprint_warning("mock;dim=2").is_none());
        assert!(idx.fingerprint_warning("remote;dim=2").is_some());
    }
}
