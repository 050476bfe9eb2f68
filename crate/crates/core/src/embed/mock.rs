use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use super::{EmbedKind, Embedder, EmbeddingRequest};
use crate::error::{Error, Result};
use crate::vector::{normalize_in_place, SemanticVector};

/// Deterministic stand-in for a pretrained encoder.
///
/// Word vectors are unit-norm Gaussian draws seeded by a hash of the
/// lowercased word, so distinct words are nearly orthogonal. Sentence
/// vectors are the normalised mean of their word vectors. A fixture table
/// can pin exact vectors for chosen strings.
#[derive(Debug, Clone)]
pub struct MockEmbedder {
    dim: usize,
    fixtures: HashMap<(EmbedKind, String), Vec<f32>>,
}

#[derive(Deserialize)]
struct FixtureFile {
    #[serde(default)]
    word: HashMap<String, Vec<f32>>,
    #[serde(default)]
    sentence: HashMap<String, Vec<f32>>,
}

impl MockEmbedder {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            fixtures: HashMap::new(),
        }
    }

    /// Pins the vector returned for `text` (matched case-insensitively).
    pub fn with_fixture(mut self, kind: EmbedKind, text: &str, values: Vec<f32>) -> Result<Self> {
        self.insert_fixture(kind, text, values)?;
        Ok(self)
    }

    pub fn insert_fixture(&mut self, kind: EmbedKind, text: &str, values: Vec<f32>) -> Result<()> {
        let v = SemanticVector::with_dim(values, self.dim)?;
        self.fixtures.insert((kind, normalize_key(text)), v.into_inner());
        Ok(())
    }

    /// Loads `{"word": {"run": [...]}, "sentence": {...}}`.
    pub fn load_fixtures(&mut self, path: &Path) -> Result<()> {
        let file: FixtureFile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        for (text, v) in file.word {
            self.insert_fixture(EmbedKind::Word, &text, v)?;
        }
        for (text, v) in file.sentence {
            self.insert_fixture(EmbedKind::Sentence, &text, v)?;
        }
        Ok(())
    }

    fn fixture(&self, kind: EmbedKind, key: &str) -> Option<&Vec<f32>> {
        self.fixtures.get(&(kind, key.to_string()))
    }

    fn hashed(&self, kind: EmbedKind, key: &str) -> Vec<f32> {
        let mut hasher = Sha256::new();
        hasher.update(kind.as_str().as_bytes());
        hasher.update([0u8]);
        hasher.update(key.as_bytes());
        let digest = hasher.finalize();
        let seed = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws: Vec<f64> = (0..self.dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = draws.iter().map(|x| x * x).sum::<f64>().sqrt();
        draws.iter().map(|x| (x / n) as f32).collect()
    }

    fn word(&self, key: &str) -> Vec<f32> {
        match self.fixture(EmbedKind::Word, key) {
            Some(v) => v.clone(),
            None => self.hashed(EmbedKind::Word, key),
        }
    }

    fn sentence(&self, key: &str) -> Vec<f32> {
        if let Some(v) = self.fixture(EmbedKind::Sentence, key) {
            return v.clone();
        }
        let mut acc = vec![0.0f64; self.dim];
        let mut count = 0usize;
        for tok in key.split_whitespace() {
            let tok = tok.trim_matches(|c: char| c.is_ascii_punctuation());
            if tok.is_empty() {
                continue;
            }
            for (a, x) in acc.iter_mut().zip(self.word(tok)) {
                *a += x as f64;
            }
            count += 1;
        }
        let mut out: Vec<f32> = acc.iter().map(|a| *a as f32).collect();
        if count == 0 || !normalize_in_place(&mut out) {
            return self.hashed(EmbedKind::Sentence, key);
        }
        out
    }

    fn fixtures_digest(&self) -> Option<String> {
        if self.fixtures.is_empty() {
            return None;
        }
        let mut keys: Vec<_> = self.fixtures.iter().collect();
        keys.sort_by(|a, b| a.0.cmp(b.0));
        let mut hasher = Sha256::new();
        for ((kind, text), v) in keys {
            hasher.update(kind.as_str().as_bytes());
            hasher.update(text.as_bytes());
            for x in v {
                hasher.update(x.to_le_bytes());
            }
        }
        let d = hasher.finalize();
        Some(d[..4].iter().map(|b| format!("{b:02x}")).collect())
    }
}

fn normalize_key(text: &str) -> String {
    text.trim().to_lowercase()
}

impl Embedder for MockEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn fingerprint(&self) -> String {
        match self.fixtures_digest() {
            Some(d) => format!("mock;dim={};fixtures={d}", self.dim),
            None => format!("mock;dim={}", self.dim),
        }
    }

    fn embed_batch(&self, reqs: &[EmbeddingRequest]) -> Result<Vec<SemanticVector>> {
        reqs.iter()
            .map(|r| {
                if r.text.trim().is_empty() {
                    return Err(Error::EmptyText);
                }
                let key = normalize_key(&r.text);
                let v = match r.kind {
                    EmbedKind::Word => self.word(&key),
                    EmbedKind::Sentence => self.sentence(&key),
                };
                SemanticVector::with_dim(v, self.dim)
            })
            .collect()
    }
}
