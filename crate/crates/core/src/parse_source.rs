//! Where dependency parses come from: committed CoNLL-U files or the NLP
//! sidecar.

use std::collections::HashMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::sync::Arc;

use crate::conllu::{parse_conllu, parse_conllu_str, ParsedSentence};
use crate::error::Result;
use crate::sidecar::SidecarClient;

/// Supplies the parse of a text, optionally keyed by a manifest id.
///
/// An unknown text yields an empty sentence list, which downstream becomes
/// an empty unit set rather than an error.
pub trait ParseSource: Send + Sync {
    fn parse(&self, key: Option<&str>, text: &str) -> Result<Vec<ParsedSentence>>;

    fn parse_batch(&self, items: &[(Option<&str>, &str)]) -> Result<Vec<Vec<ParsedSentence>>> {
        items.iter().map(|(k, t)| self.parse(*k, t)).collect()
    }
}

/// Never has a parse; every text becomes unitless.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoParses;

impl ParseSource for NoParses {
    fn parse(&self, _key: Option<&str>, _text: &str) -> Result<Vec<ParsedSentence>> {
        Ok(Vec::new())
    }
}

fn text_key(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Parses loaded from CoNLL-U, addressable by `# sent_id` and by `# text`.
///
/// Blocks sharing a `sent_id` form one multi-sentence text, in file order.
#[derive(Debug, Default, Clone)]
pub struct ConlluStore {
    by_id: HashMap<String, Vec<ParsedSentence>>,
    by_text: HashMap<String, Vec<ParsedSentence>>,
}

impl ConlluStore {
    pub fn from_sentences(sentences: impl IntoIterator<Item = ParsedSentence>) -> Self {
        let mut store = Self::default();
        for s in sentences {
            if let Some(id) = &s.sent_id {
                store.by_id.entry(id.clone()).or_default().push(s.clone());
            }
            store.by_text.entry(text_key(&s.text)).or_insert_with(|| vec![s]);
        }
        store
    }

    pub fn from_str(input: &str) -> Result<Self> {
        Ok(Self::from_sentences(parse_conllu_str(input)?))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = File::open(path)?;
        Ok(Self::from_sentences(parse_conllu(BufReader::new(file))?))
    }

    pub fn len(&self) -> usize {
        self.by_text.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_text.is_empty()
    }
}

impl ParseSource for ConlluStore {
    fn parse(&self, key: Option<&str>, text: &str) -> Result<Vec<ParsedSentence>> {
        if let Some(found) = key.and_then(|k| self.by_id.get(k)) {
            return Ok(found.clone());
        }
        Ok(self.by_text.get(&text_key(text)).cloned().unwrap_or_default())
    }
}

/// Parses through the sidecar's `/parse` endpoint.
pub struct SidecarParser {
    client: Arc<SidecarClient>,
}

impl SidecarParser {
    pub fn new(client: Arc<SidecarClient>) -> Self {
        Self { client }
    }
}

impl ParseSource for SidecarParser {
    fn parse(&self, _key: Option<&str>, text: &str) -> Result<Vec<ParsedSentence>> {
        Ok(self.client.parse(&[text])?.pop().unwrap_or_default())
    }

    fn parse_batch(&self, items: &[(Option<&str>, &str)]) -> Result<Vec<Vec<ParsedSentence>>> {
        let texts: Vec<&str> = items.iter().map(|(_, t)| *t).collect();
        self.client.parse(&texts)
    }
}

/// Tries each source in order and keeps the first non-empty parse.
pub struct ChainedParses(pub Vec<Arc<dyn ParseSource>>);

impl ParseSource for ChainedParses {
    fn parse(&self, key: Option<&str>, text: &str) -> Result<Vec<ParsedSentence>> {
        for source in &self.0 {
            let found = source.parse(key, text)?;
            if !found.is_empty() {
                return Ok(found);
            }
        }
        Ok(Vec::new())
    }
}
