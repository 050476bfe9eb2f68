//! Semantic units and prompt semantics, plus the vectorizer that turns a
//! parsed sentence into them.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::conllu::ParsedSentence;
use crate::embed::{EmbedKind, Embedder, EmbeddingRequest};
use crate::error::{Error, Result};
use crate::parse_source::ParseSource;
use crate::units::{extract_units, select_core_unit, UnitSkeleton};
use crate::vector::{component_sim, SemanticVector, VecRef};

/// One atomized motion: the verb plus its actor and recipient nouns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticUnit {
    pub motion: SemanticVector,
    pub actor: Option<SemanticVector>,
    pub recipient: Option<SemanticVector>,
    pub motion_text: String,
    pub actor_text: Option<String>,
    pub recipient_text: Option<String>,
    /// Inclusive token range the unit was read from.
    pub source_span: (usize, usize),
}

impl SemanticUnit {
    pub(crate) fn roles(&self) -> [Option<VecRef<'_>>; 3] {
        [
            Some(self.motion.view()),
            self.actor.as_ref().map(SemanticVector::view),
            self.recipient.as_ref().map(SemanticVector::view),
        ]
    }

    /// `"<actor> <motion> <recipient>"`, absent roles omitted.
    pub fn phrase(&self) -> String {
        unit_phrase(
            self.actor_text.as_deref(),
            &self.motion_text,
            self.recipient_text.as_deref(),
        )
    }
}

pub(crate) fn unit_phrase(actor: Option<&str>, motion: &str, recipient: Option<&str>) -> String {
    [actor, Some(motion), recipient]
        .into_iter()
        .flatten()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Sum of the three role similarities in [0, 3].
///
/// Each role contributes its cosine clamped to [0, 1] when both units carry
/// it, 1 when neither does and 0 when only one does.
pub fn unit_pair_sim(a: &SemanticUnit, b: &SemanticUnit) -> Result<f64> {
    roles_pair_sim(&a.roles(), &b.roles())
}

pub(crate) fn roles_pair_sim(a: &[Option<VecRef<'_>>; 3], b: &[Option<VecRef<'_>>; 3]) -> Result<f64> {
    let m = component_sim(a[0], b[0])?;
    let t = component_sim(a[1], b[1])?;
    let r = component_sim(a[2], b[2])?;
    Ok(m + t + r)
}

/// Sentence vector, unit set and core unit of one text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSemantics {
    pub raw_text: String,
    pub total: SemanticVector,
    pub units: Vec<SemanticUnit>,
    /// `None` exactly when `units` is empty.
    pub core_index: Option<usize>,
}

impl PromptSemantics {
    pub fn core(&self) -> Option<&SemanticUnit> {
        self.core_index.and_then(|i| self.units.get(i))
    }

    pub fn dim(&self) -> usize {
        self.total.dim()
    }

    /// Checks the core-index invariant and that every vector shares one width.
    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        match (self.units.is_empty(), self.core_index) {
            (true, None) => {}
            (false, Some(i)) if i < self.units.len() => {}
            _ => {
                return Err(Error::InvalidInput(format!(
                    "core index {:?} invalid for {} units",
                    self.core_index,
                    self.units.len()
                )))
            }
        }
        for u in &self.units {
            for v in [Some(&u.motion), u.actor.as_ref(), u.recipient.as_ref()]
                .into_iter()
                .flatten()
            {
                if v.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        actual: v.dim(),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Unit skeletons of a multi-sentence text, concatenated, with the core taken
/// from the first sentence that yields any unit.
pub fn skeletons_for(sentences: &[ParsedSentence]) -> (Vec<(usize, UnitSkeleton)>, Option<usize>) {
    let mut all = Vec::new();
    let mut core = None;
    for (si, sentence) in sentences.iter().enumerate() {
        let units = extract_units(sentence);
        if core.is_none() && !units.is_empty() {
            // Non-empty by the check above.
            let local = select_core_unit(&units, sentence).unwrap_or(0);
            core = Some(all.len() + local);
        }
        all.extend(units.into_iter().map(|u| (si, u)));
    }
    (all, core)
}

/// Turns text into [`PromptSemantics`] using a parse source and an embedder.
#[derive(Clone)]
pub struct Vectorizer {
    embedder: Arc<dyn Embedder>,
    parser: Arc<dyn ParseSource>,
}

impl Vectorizer {
    pub fn new(embedder: Arc<dyn Embedder>, parser: Arc<dyn ParseSource>) -> Self {
        Self { embedder, parser }
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    pub fn parser(&self) -> &Arc<dyn ParseSource> {
        &self.parser
    }

    /// Parses `text` through the configured source, then vectorizes it.
    pub fn vectorize(&self, text: &str) -> Result<PromptSemantics> {
        let sentences = self.parser.parse(None, text)?;
        self.vectorize_parsed(text, &sentences)
    }

    pub fn vectorize_parsed(&self, text: &str, sentences: &[ParsedSentence]) -> Result<PromptSemantics> {
        let mut out = self.vectorize_many(&[(text, sentences)])?;
        Ok(out.pop().expect("one input yields one output"))
    }

    /// Batched form used during ingestion: one embedding round trip for all
    /// sentence vectors and one for all role words.
    pub fn vectorize_many(&self, items: &[(&str, &[ParsedSentence])]) -> Result<Vec<PromptSemantics>> {
        struct Pending {
            units: Vec<(usize, UnitSkeleton)>,
            core: Option<usize>,
        }
        let mut sentence_reqs = Vec::with_capacity(items.len());
        let mut word_reqs: Vec<EmbeddingRequest> = Vec::new();
        let mut pending = Vec::with_capacity(items.len());
        for (text, sentences) in items {
            sentence_reqs.push(EmbeddingRequest::new(EmbedKind::Sentence, *text)?);
            let (units, core) = skeletons_for(sentences);
            for (si, u) in &units {
                let toks = &sentences[*si].tokens;
                for idx in u.token_indices().into_iter().flatten() {
                    word_reqs.push(EmbeddingRequest::new(EmbedKind::Word, role_text(&toks[idx]))?);
                }
            }
            pending.push(Pending { units, core });
        }
        let totals = self.embedder.embed_batch(&sentence_reqs)?;
        let mut words = self.embedder.embed_batch(&word_reqs)?.into_iter();

        let mut out = Vec::with_capacity(items.len());
        for (((text, sentences), total), p) in items.iter().zip(totals).zip(pending) {
            let mut units = Vec::with_capacity(p.units.len());
            for (si, sk) in p.units {
                let toks = &sentences[si].tokens;
                let [m, a, r] = sk.token_indices();
                let mut take = |idx: Option<usize>| -> Option<(SemanticVector, String)> {
                    idx.map(|i| (words.next().expect("one vector per word request"), role_text(&toks[i])))
                };
                let (motion, motion_text) = take(m).expect("motion is always present");
                let actor = take(a);
                let recipient = take(r);
                units.push(SemanticUnit {
                    motion,
                    motion_text,
                    actor_text: actor.as_ref().map(|x| x.1.clone()),
                    actor: actor.map(|x| x.0),
                    recipient_text: recipient.as_ref().map(|x| x.1.clone()),
                    recipient: recipient.map(|x| x.0),
                    source_span: sk.span,
                });
            }
            out.push(PromptSemantics {
                raw_text: (*text).to_string(),
                total,
                units,
                core_index: p.core,
            });
        }
        Ok(out)
    }
}

/// Role text is the lowercased lemma, falling back to the surface form.
fn role_text(tok: &crate::conllu::ParsedToken) -> String {
    let base = if tok.lemma.is_empty() || tok.lemma == "_" {
        &tok.text
    } else {
        &tok.lemma
    };
    base.to_lowercase()
}
