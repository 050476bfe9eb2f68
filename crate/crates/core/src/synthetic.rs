//! Seeded synthetic corpora for tests, benchmarks and the ablation harness.
//!
//! Two generators:
//! - templated English captions ("The panda is riding the bicycle in the
//!   park.") with programmatic dependency parses, embedded by the mock
//!   provider exactly as ingestion would embed them;
//! - free-form random semantics over clustered vectors, for exercising the
//!   matcher around its thresholds.

use std::collections::HashMap;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::conllu::{ParsedSentence, ParsedToken};
use crate::embed::{EmbedKind, Embedder, EmbeddingRequest, MockEmbedder};
use crate::error::Result;
use crate::index::{CorpusEntry, CorpusIndex, EntryMeta, IndexBuilder, InternedUnit, ManifestRecord, WordId};
use crate::parse_source::ConlluStore;
use crate::semantics::{PromptSemantics, SemanticUnit};
use crate::vector::{normalize_in_place, SemanticVector};

pub const ACTORS: &[&str] = &[
    "elephant", "witch", "girl", "train", "lamborghini", "panda", "flower", "fountain", "palace", "scissors", "dog", "cat",
    "man", "woman", "horse", "bird", "car", "boy", "robot", "fish",
];

/// (lemma, third person singular, present participle)
pub const VERBS: &[(&str, &str, &str)] = &[
    ("walk", "walks", "walking"),
    ("conduct", "conducts", "conducting"),
    ("hold", "holds", "holding"),
    ("head", "heads", "heading"),
    ("speed", "speeds", "speeding"),
    ("ride", "rides", "riding"),
    ("bloom", "blooms", "blooming"),
    ("spray", "sprays", "spraying"),
    ("burn", "burns", "burning"),
    ("cut", "cuts", "cutting"),
    ("run", "runs", "running"),
    ("jump", "jumps", "jumping"),
    ("swim", "swims", "swimming"),
    ("fly", "flies", "flying"),
    ("eat", "eats", "eating"),
    ("chase", "chases", "chasing"),
    ("dance", "dances", "dancing"),
    ("climb", "climbs", "climbing"),
    ("throw", "throws", "throwing"),
    ("push", "pushes", "pushing"),
];

pub const OBJECTS: &[&str] = &[
    "experiment", "umbrella", "bicycle", "water", "paper", "ball", "tree", "rope", "box", "kite", "door", "wall",
];

pub const PLACES: &[&str] = &[
    "sea", "table", "street", "distance", "highway", "garden", "park", "flames", "field", "city", "beach", "forest",
];

pub const PREPOSITIONS: &[&str] = &["under", "on", "in", "down", "towards", "through", "past", "across"];

/// One templated caption: `<Det> <actor> [is] <verb> [the <object>] [<prep> the <place>] .`
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CaptionSpec {
    pub indefinite: bool,
    pub actor: usize,
    pub verb: usize,
    pub progressive: bool,
    pub object: Option<usize>,
    pub place: Option<(usize, usize)>,
}

impl CaptionSpec {
    pub fn random<R: Rng>(rng: &mut R) -> Self {
        Self {
            indefinite: rng.random_bool(0.5),
            actor: rng.random_range(0..ACTORS.len()),
            verb: rng.random_range(0..VERBS.len()),
            progressive: rng.random_bool(0.5),
            object: rng.random_bool(0.6).then(|| rng.random_range(0..OBJECTS.len())),
            place: rng
                .random_bool(0.6)
                .then(|| (rng.random_range(0..PREPOSITIONS.len()), rng.random_range(0..PLACES.len()))),
        }
    }

    /// `(form, lemma, upos, head, deprel)` rows; heads are 0-based.
    fn rows(&self) -> Vec<(&'static str, &'static str, &'static str, usize, &'static str)> {
        let (lemma, third, ing) = VERBS[self.verb];
        let verb_at = if self.progressive { 3 } else { 2 };
        let det = if self.indefinite { ("A", "a") } else { ("The", "the") };
        let mut rows = vec![(det.0, det.1, "DET", 1, "det"), (ACTORS[self.actor], ACTORS[self.actor], "NOUN", verb_at, "nsubj")];
        if self.progressive {
            rows.push(("is", "be", "AUX", verb_at, "aux"));
            rows.push((ing, lemma, "VERB", verb_at, "root"));
        } else {
            rows.push((third, lemma, "VERB", verb_at, "root"));
        }
        if let Some(o) = self.object {
            let at = rows.len();
            rows.push(("the", "the", "DET", at + 1, "det"));
            rows.push((OBJECTS[o], OBJECTS[o], "NOUN", verb_at, "obj"));
        }
        if let Some((p, pl)) = self.place {
            let at = rows.len();
            rows.push((PREPOSITIONS[p], PREPOSITIONS[p], "ADP", at + 2, "case"));
            rows.push(("the", "the", "DET", at + 2, "det"));
            rows.push((PLACES[pl], PLACES[pl], "NOUN", verb_at, "obl"));
        }
        rows.push((".", ".", "PUNCT", verb_at, "punct"));
        rows
    }

    pub fn text(&self) -> String {
        let rows = self.rows();
        let words: Vec<&str> = rows[..rows.len() - 1].iter().map(|r| r.0).collect();
        format!("{}.", words.join(" "))
    }

    pub fn parse(&self, sent_id: Option<&str>) -> ParsedSentence {
        let tokens = self
            .rows()
            .into_iter()
            .enumerate()
            .map(|(i, (form, lemma, upos, head, deprel))| ParsedToken {
                index: i,
                text: form.to_string(),
                lemma: lemma.to_string(),
                upos: upos.to_string(),
                head,
                deprel: deprel.to_string(),
            })
            .collect();
        ParsedSentence {
            tokens,
            text: self.text(),
            sent_id: sent_id.map(str::to_string),
        }
    }
}

fn entry_id(i: usize) -> String {
    format!("syn{i:07}")
}

fn specs(n: usize, seed: u64) -> Vec<CaptionSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| CaptionSpec::random(&mut rng)).collect()
}

/// A manifest of `n` templated captions plus their parses keyed by id.
pub fn synthetic_manifest(n: usize, seed: u64) -> (Vec<ManifestRecord>, ConlluStore) {
    let specs = specs(n, seed);
    let records = specs
        .iter()
        .enumerate()
        .map(|(i, s)| ManifestRecord {
            id: entry_id(i),
            caption: s.text(),
            video_ref: format!("videos/{}.mp4", entry_id(i)),
            duration_s: Some(4.0),
            fps: Some(24.0),
        })
        .collect();
    let parses = ConlluStore::from_sentences(specs.iter().enumerate().map(|(i, s)| s.parse(Some(&entry_id(i)))));
    (records, parses)
}

/// Builds the index that ingesting [`synthetic_manifest`] with a plain
/// [`MockEmbedder`] of width `dim` would produce, without going through the
/// per-caption pipeline. Suitable for million-entry corpora.
pub fn bulk_index(n: usize, dim: usize, seed: u64) -> Result<CorpusIndex> {
    let mock = MockEmbedder::new(dim);
    let mut word_vecs: HashMap<String, Vec<f32>> = HashMap::new();
    let mut word = |text: &str| -> Result<Vec<f32>> {
        let key = text.to_lowercase();
        if let Some(v) = word_vecs.get(&key) {
            return Ok(v.clone());
        }
        let v = mock.embed(&EmbeddingRequest::new(EmbedKind::Word, key.clone())?)?.into_inner();
        word_vecs.insert(key, v.clone());
        Ok(v)
    };

    let mut b = IndexBuilder::with_capacity(dim, mock.fingerprint(), n);
    let mut role_ids: HashMap<&'static str, WordId> = HashMap::new();
    let forms: Vec<&str> = ["a", "the", "is"]
        .into_iter()
        .chain(ACTORS.iter().copied())
        .chain(VERBS.iter().flat_map(|v| [v.1, v.2]))
        .chain(OBJECTS.iter().copied())
        .chain(PLACES.iter().copied())
        .chain(PREPOSITIONS.iter().copied())
        .collect();
    let mut form_vecs: HashMap<&str, Vec<f32>> = HashMap::new();
    for f in forms {
        form_vecs.insert(f, word(f)?);
    }
    for lemma in ACTORS.iter().chain(VERBS.iter().map(|v| &v.0)).chain(OBJECTS.iter()) {
        let v = word(lemma)?;
        role_ids.insert(lemma, b.intern_word(lemma, &v)?);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![0.0f64; dim];
    let mut total = vec![0.0f32; dim];
    for i in 0..n {
        let spec = CaptionSpec::random(&mut rng);
        let rows = spec.rows();
        acc.iter_mut().for_each(|a| *a = 0.0);
        for r in &rows[..rows.len() - 1] {
            let v = &form_vecs[r.0.to_lowercase().as_str()];
            for (a, x) in acc.iter_mut().zip(v) {
                *a += *x as f64;
            }
        }
        for (t, a) in total.iter_mut().zip(&acc) {
            *t = *a as f32;
        }
        normalize_in_place(&mut total);

        let verb_at = if spec.progressive { 3 } else { 2 };
        let obj_at = spec.object.map(|_| verb_at + 2);
        let unit = InternedUnit {
            motion: role_ids[VERBS[spec.verb].0],
            actor: Some(role_ids[ACTORS[spec.actor]]),
            recipient: spec.object.map(|o| role_ids[OBJECTS[o]]),
            span: (1, obj_at.unwrap_or(verb_at) as u32),
        };
        let id = entry_id(i);
        let meta = EntryMeta {
            video_ref: format!("videos/{id}.mp4"),
            id,
            caption: spec.text(),
            duration_s: Some(4.0),
            fps: Some(24.0),
        };
        b.push_interned(meta, &total, &[unit], Some(0))?;
    }
    Ok(b.finish())
}

/// Random semantics over a small set of clustered concepts, so that role
/// similarities land on both sides of the default thresholds.
pub struct RandomWorld {
    dim: usize,
    concepts: Vec<Vec<f32>>,
    rng: ChaCha8Rng,
}

impl RandomWorld {
    pub fn new(dim: usize, concepts: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let concepts = (0..concepts)
            .map(|_| (0..dim).map(|_| rng.sample::<f32, _>(StandardNormal)).collect())
            .collect();
        Self { dim, concepts, rng }
    }

    fn vector(&mut self) -> (usize, SemanticVector) {
        let k = self.rng.random_range(0..self.concepts.len());
        let sigma = *[0.0f32, 0.05, 0.2, 0.6, 2.0].choose(&mut self.rng).expect("non-empty");
        let mut v: Vec<f32> = self.concepts[k]
            .iter()
            .map(|c| c + sigma * self.rng.sample::<f32, _>(StandardNormal))
            .collect();
        if self.rng.random_bool(0.5) {
            normalize_in_place(&mut v);
        }
        (k, SemanticVector::new(v).expect("finite draws"))
    }

    fn unit(&mut self) -> SemanticUnit {
        let (mk, motion) = self.vector();
        let actor = self.rng.random_bool(0.7).then(|| self.vector());
        let recipient = self.rng.random_bool(0.6).then(|| self.vector());
        SemanticUnit {
            motion,
            motion_text: format!("m{mk}"),
            actor_text: actor.as_ref().map(|(k, _)| format!("a{k}")),
            actor: actor.map(|(_, v)| v),
            recipient_text: recipient.as_ref().map(|(k, _)| format!("r{k}")),
            recipient: recipient.map(|(_, v)| v),
            source_span: (0, 2),
        }
    }

    pub fn semantics(&mut self, max_units: usize) -> PromptSemantics {
        let n = self.rng.random_range(0..=max_units);
        let units: Vec<SemanticUnit> = (0..n).map(|_| self.unit()).collect();
        let core_index = (!units.is_empty()).then(|| self.rng.random_range(0..units.len()));
        PromptSemantics {
            raw_text: "random".into(),
            total: self.vector().1,
            units,
            core_index,
        }
    }

    /// `n` entries; about one in twenty repeats an earlier entry's semantics
    /// exactly, to exercise tie-breaking.
    pub fn corpus(&mut self, n: usize) -> Result<CorpusIndex> {
        let mut b = IndexBuilder::new(self.dim, "random-world");
        let mut made: Vec<PromptSemantics> = Vec::with_capacity(n);
        for i in 0..n {
            let sem = if !made.is_empty() && self.rng.random_bool(0.05) {
                made.choose(&mut self.rng).expect("non-empty").clone()
            } else {
                self.semantics(3)
            };
            made.push(sem.clone());
            b.push(CorpusEntry {
                id: format!("r{i}"),
                caption: format!("random caption {i}"),
                video_ref: format!("r{i}.mp4"),
                duration_s: None,
                fps: None,
                semantics: sem,
            })?;
        }
        Ok(b.finish())
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::index::ingest;
    use crate::semantics::Vectorizer;
    use crate::units::extract_units;

    #[test]
    fn templates_render_and_parse() {
        let spec = CaptionSpec {
            indefinite: false,
            actor: 5,
            verb: 5,
            progressive: true,
            object: Some(2),
            place: Some((2, 6)),
        };
        assert_eq!(spec.text(), "The panda is riding the bicycle in the park.");
        let p = spec.parse(None);
        let units = extract_units(&p);
        assert_eq!(units.len(), 1);
        assert_eq!(p.tokens[units[0].motion].lemma, "ride");
        assert_eq!(p.tokens[units[0].actor.unwrap()].text, "panda");
        assert_eq!(p.tokens[units[0].recipient.unwrap()].text, "bicycle");
        let round = crate::conllu::parse_conllu_str(&p.to_conllu()).unwrap();
        assert_eq!(round[0].tokens, p.tokens);
    }

    #[test]
    fn bulk_matches_ingestion() {
        let (records, parses) = synthetic_manifest(300, 7);
        let v = Vectorizer::new(Arc::new(MockEmbedder::new(32)), Arc::new(parses));
        let ingested = ingest(&records, &v).unwrap();
        let bulk = bulk_index(300, 32, 7).unwrap();
        assert_eq!(bulk, ingested);
    }

    #[test]
    fn random_world_is_seeded() {
        let a = RandomWorld::new(8, 4, 1).corpus(50).unwrap();
        let b = RandomWorld::new(8, 4, 1).corpus(50).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 50);
    }
}
