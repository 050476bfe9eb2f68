//! Motion-prior video retrieval.
//!
//! Captions and prompts are reduced to a sentence vector plus verb-anchored
//! (motion, actor, recipient) units. A corpus index stores these for every
//! caption; the matcher filters and ranks entries against a prompt, and the
//! keyframe extractor turns detections on the best reference video into a
//! segment, crop and frame list for downstream tuning.

pub mod ablation;
mod binio;
pub mod conllu;
pub mod embed;
pub mod engine;
pub mod error;
mod http;
pub mod index;
pub mod keyframe;
pub mod matcher;
pub mod parse_source;
pub mod semantics;
pub mod sidecar;
pub mod synthetic;
pub mod units;
pub mod vector;

pub use ablation::{run_ablation, run_ablation_with, AblationConfig, AblationTable};
pub use conllu::{parse_conllu, parse_conllu_str, ParsedSentence, ParsedToken};
pub use embed::{EmbedKind, Embedder, EmbeddingRequest, MockEmbedder, ProviderConfig, ProviderMode};
pub use engine::{DetectionSource, Engine, ExtractOptions};
pub use error::{Error, Result};
pub use index::{CorpusEntry, CorpusIndex, IndexBuilder, ManifestRecord};
pub use keyframe::{CropRect, Detection, ExtractorConfig, KeyframeSpec, PriorPackage, VideoMeta};
pub use matcher::{
    brute_force_retrieve, coarse_filter, match_score, retrieve, unit_set_sim, FilterOutcome, MatchConfig, RankedMatch,
    ScoreParts,
};
pub use parse_source::{ConlluStore, NoParses, ParseSource};
pub use semantics::{unit_pair_sim, PromptSemantics, SemanticUnit, Vectorizer};
pub use sidecar::SidecarClient;
pub use units::{extract_units, select_core_unit, UnitSkeleton};
pub use vector::{cos_distance, cosine_sim, SemanticVector};
