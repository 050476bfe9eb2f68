//! One index plus one vectorizer, shared by the command line and the HTTP
//! server so both surfaces rank identically.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::index::CorpusIndex;
use crate::keyframe::{
    detection_captions, full_frame_fallback, match_reference_units, plan_keyframes, segment_detections, Detection,
    ExtractorConfig, PackageConfig, PriorPackage, VideoMeta, ENGINE_VERSION,
};
use crate::matcher::{retrieve, MatchConfig, RankedMatch};
use crate::semantics::{PromptSemantics, Vectorizer};
use crate::sidecar::SidecarClient;

pub enum DetectionSource<'a> {
    Fixture(Vec<Detection>),
    Sidecar(&'a SidecarClient),
}

#[derive(Debug, Clone, Default)]
pub struct ExtractOptions {
    /// Keyframe count; the extractor config's `n` when unset.
    pub n: Option<usize>,
    /// Frame size of the reference video; the target size when unknown.
    pub frame_size: Option<(u32, u32)>,
}

pub struct Engine {
    index: Arc<CorpusIndex>,
    vectorizer: Vectorizer,
    match_cfg: MatchConfig,
    extractor: ExtractorConfig,
    warnings: Vec<String>,
}

impl Engine {
    pub fn new(
        index: Arc<CorpusIndex>,
        vectorizer: Vectorizer,
        match_cfg: MatchConfig,
        extractor: ExtractorConfig,
    ) -> Result<Self> {
        match_cfg.validate()?;
        extractor.validate()?;
        let dim = vectorizer.embedder().dim();
        if dim != index.dim() {
            return Err(Error::DimensionMismatch {
                expected: index.dim(),
                actual: dim,
            });
        }
        let mut warnings = Vec::new();
        if let Some(w) = index.fingerprint_warning(&vectorizer.embedder().fingerprint()) {
            log::warn!("{w}");
            warnings.push(w);
        }
        Ok(Self {
            index,
            vectorizer,
            match_cfg,
            extractor,
            warnings,
        })
    }

    pub fn index(&self) -> &CorpusIndex {
        &self.index
    }

    pub fn vectorizer(&self) -> &Vectorizer {
        &self.vectorizer
    }

    pub fn match_config(&self) -> &MatchConfig {
        &self.match_cfg
    }

    pub fn extractor_config(&self) -> &ExtractorConfig {
        &self.extractor
    }

    /// Warnings raised while binding the index, e.g. a provider mismatch.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn vectorize(&self, text: &str) -> Result<PromptSemantics> {
        self.vectorizer.vectorize(text)
    }

    /// Ranked matches for `prompt`; `top_k` overrides the configured value
    /// and is clamped to the index size.
    pub fn search(&self, prompt: &str, top_k: Option<usize>) -> Result<Vec<RankedMatch>> {
        let semantics = self.vectorize(prompt)?;
        self.search_semantics(&semantics, top_k)
    }

    pub fn search_semantics(&self, semantics: &PromptSemantics, top_k: Option<usize>) -> Result<Vec<RankedMatch>> {
        let k = top_k.unwrap_or(self.match_cfg.top_k).clamp(1, self.index.len().max(1));
        let cfg = MatchConfig {
            top_k: k,
            ..self.match_cfg.clone()
        };
        retrieve(semantics, &self.index, &cfg)
    }

    /// Retrieval followed by keyframe planning for the best match.
    pub fn extract(&self, prompt: &str, detections: DetectionSource<'_>, opts: &ExtractOptions) -> Result<PriorPackage> {
        let semantics = self.vectorize(prompt)?;
        let best = self
            .search_semantics(&semantics, Some(1))?
            .into_iter()
            .next()
            .ok_or(Error::EmptyIndex)?;
        let entry = self.index.get(&best.entry_id).expect("retrieved ids exist");
        let cfg = &self.extractor;
        let mut warnings = self.warnings.clone();

        let matched = match_reference_units(&entry.semantics.units, &semantics.units, cfg.tau_unit)?;
        if matched.is_empty() {
            warnings.push("no reference unit matched the prompt; detecting with the full caption".into());
        }
        let captions = detection_captions(&matched, &entry.caption);

        let dets = match detections {
            DetectionSource::Fixture(d) => d,
            DetectionSource::Sidecar(client) => client.detect(&entry.video_ref, &captions, cfg.stride)?,
        };

        let n = opts.n.unwrap_or(cfg.n);
        let (width, height) = opts.frame_size.unwrap_or((cfg.target_width, cfg.target_height));
        let frame_count = entry
            .frame_count()
            .or_else(|| dets.iter().map(|d| d.frame_index + 1).max())
            .unwrap_or(n)
            .max(1);
        let meta = VideoMeta {
            frame_count,
            width,
            height,
            fps: entry.fps.unwrap_or(0.0),
        };

        let (segment, crop) = match segment_detections(&dets, &meta, cfg) {
            Ok(found) => found,
            Err(Error::NoDetections) => {
                warnings.push("no detection passed the confidence threshold; using the full video and frame".into());
                full_frame_fallback(&meta)
            }
            Err(e) => return Err(e),
        };
        let keyframes = match plan_keyframes(&entry.video_ref, segment, crop, &meta, n) {
            Err(Error::SegmentTooShort { requested, available }) => {
                warnings.push(format!(
                    "segment holds {available} frames; keyframe count reduced from {requested} to {available}"
                ));
                plan_keyframes(&entry.video_ref, segment, crop, &meta, available)?
            }
            other => other?,
        };
        for w in &warnings {
            log::warn!("{w}");
        }

        Ok(PriorPackage {
            prompt: prompt.to_string(),
            matched: best,
            reference_caption: entry.caption.clone(),
            matched_captions: captions,
            keyframes,
            created_at: PriorPackage::timestamp_now(),
            engine_version: ENGINE_VERSION.to_string(),
            config: PackageConfig {
                matcher: self.match_cfg.clone(),
                extractor: cfg.clone(),
                provider_fingerprint: self.vectorizer.embedder().fingerprint(),
                video: meta,
            },
            warnings,
        })
    }
}
