//! Shared setup for the benchmarks.

use std::sync::Arc;

use mpve_core::ablation::{default_prompts, DEFAULT_PROMPT_PARSES};
use mpve_core::synthetic::bulk_index;
use mpve_core::{ConlluStore, CorpusIndex, MockEmbedder, PromptSemantics, Vectorizer};

pub const DIM: usize = 384;

/// Mock embedder plus the hand-checked parses of the built-in prompts.
pub fn prompt_vectorizer(dim: usize) -> Vectorizer {
    let parses = ConlluStore::from_str(DEFAULT_PROMPT_PARSES).expect("bundled parses are valid");
    Vectorizer::new(Arc::new(MockEmbedder::new(dim)), Arc::new(parses))
}

/// The built-in prompts, vectorized at `dim`.
pub fn prompts(dim: usize) -> Vec<PromptSemantics> {
    let vz = prompt_vectorizer(dim);
    default_prompts()
        .iter()
        .map(|p| vz.vectorize(p).expect("mock vectorization cannot fail"))
        .collect()
}

/// A synthetic corpus of `n` templated captions.
pub fn corpus(n: usize, dim: usize) -> CorpusIndex {
    bulk_index(n, dim, 1).expect("synthetic corpus")
}
