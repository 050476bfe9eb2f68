use std::collections::HashSet;
use std::io::BufRead;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semantics::Vectorizer;

use super::{CorpusEntry, CorpusIndex, IndexBuilder};

const CHUNK: usize = 512;

/// One line of a JSON-lines manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub id: String,
    pub caption: String,
    pub video_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
}

/// Reads a JSON-lines manifest. Blank lines are skipped; line numbers in
/// errors are 1-based.
pub fn read_manifest<R: BufRead>(reader: R) -> Result<Vec<ManifestRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ManifestRecord = serde_json::from_str(&line).map_err(|e| Error::ManifestSyntax {
            line: line_no,
            reason: e.to_string(),
        })?;
        let blank = |field: &str, v: &str| {
            v.trim().is_empty().then(|| Error::ManifestSyntax {
                line: line_no,
                reason: format!("`{field}` is empty"),
            })
        };
        if let Some(e) = blank("id", &rec.id)
            .or_else(|| blank("caption", &rec.caption))
            .or_else(|| blank("video_ref", &rec.video_ref))
        {
            return Err(e);
        }
        for (name, v) in [("duration_s", rec.duration_s), ("fps", rec.fps)] {
            if v.is_some_and(|x| !x.is_finite() || x < 0.0) {
                return Err(Error::ManifestSyntax {
                    line: line_no,
                    reason: format!("`{name}` must be a finite non-negative number"),
                });
            }
        }
        out.push(rec);
    }
    Ok(out)
}

/// Parses, unit-extracts and embeds every record. Any failure aborts the
/// whole ingest; nothing partial is returned.
pub fn ingest(records: &[ManifestRecord], vectorizer: &Vectorizer) -> Result<CorpusIndex> {
    let mut seen = HashSet::with_capacity(records.len());
    for r in records {
        if !seen.insert(r.id.as_str()) {
            return Err(Error::DuplicateId(r.id.clone()));
        }
    }

    let embedder = vectorizer.embedder();
    let parser = vectorizer.parser();
    let chunks: Vec<Vec<CorpusEntry>> = records
        .par_chunks(CHUNK)
        .map(|chunk| {
            let keys: Vec<(Option<&str>, &str)> =
                chunk.iter().map(|r| (Some(r.id.as_str()), r.caption.as_str())).collect();
            let parses = parser.parse_batch(&keys)?;
            let items: Vec<(&str, &[_])> = chunk
                .iter()
                .zip(&parses)
                .map(|(r, p)| (r.caption.as_str(), p.as_slice()))
                .collect();
            let semantics = vectorizer.vectorize_many(&items)?;
            Ok(chunk
                .iter()
                .zip(semantics)
                .map(|(r, semantics)| {
                    if semantics.units.is_empty() {
                        log::info!("entry `{}` has no semantic units; stored with an empty unit list", r.id);
                    }
                    CorpusEntry {
                        id: r.id.clone(),
                        caption: r.caption.clone(),
                        video_ref: r.video_ref.clone(),
                        duration_s: r.duration_s,
                        fps: r.fps,
                        semantics,
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut b = IndexBuilder::with_capacity(embedder.dim(), embedder.fingerprint(), records.len());
    for entry in chunks.into_iter().flatten() {
        b.push(entry)?;
    }
    Ok(b.finish())
}

pub fn ingest_manifest<R: BufRead>(reader: R, vectorizer: &Vectorizer) -> Result<CorpusIndex> {
    ingest(&read_manifest(reader)?, vectorizer)
}
