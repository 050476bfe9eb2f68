//! Keyframe extraction from a retrieved reference video.
//!
//! The retrieved caption's units that resemble the prompt's become detection
//! captions; detections for those captions pick out a temporal segment and
//! a crop, from which `n` frames are sampled.

mod export;
mod segment;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semantics::{unit_pair_sim, SemanticUnit};

pub use export::{
    export_package, FfmpegAccessor, FrameAccessor, NullAccessor, PackageConfig, PriorPackage, ENGINE_VERSION,
};
pub use segment::{fit_aspect, full_frame_fallback, segment_detections};

/// One detector hit for one caption on one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame_index: usize,
    pub caption: String,
    /// `[x0, y0, x1, y1]` in pixels.
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    pub confidence: f64,
}

impl Detection {
    pub fn validate(&self) -> Result<()> {
        let [x0, y0, x1, y1] = self.bbox;
        if !self.bbox.iter().all(|v| v.is_finite()) || x0 >= x1 || y0 >= y1 {
            return Err(Error::InvalidInput(format!(
                "frame {}: box {:?} is not a proper rectangle",
                self.frame_index, self.bbox
            )));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::InvalidInput(format!(
                "frame {}: confidence {} outside [0, 1]",
                self.frame_index, self.confidence
            )));
        }
        Ok(())
    }
}

/// Reads a JSON array of detections.
pub fn load_detections(path: impl AsRef<Path>) -> Result<Vec<Detection>> {
    let dets: Vec<Detection> = serde_json::from_slice(&fs::read(path)?)?;
    for d in &dets {
        d.validate()?;
    }
    Ok(dets)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub frame_count: usize,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractorConfig {
    pub det_threshold: f64,
    /// Longest run of unmarked frames bridged inside one segment.
    pub max_gap: usize,
    pub min_len: usize,
    pub pad_frac: f64,
    pub tau_unit: f64,
    pub target_width: u32,
    pub target_height: u32,
    /// Keyframes per package.
    pub n: usize,
    /// Frame stride requested from the detector.
    pub stride: usize,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        Self {
            det_threshold: 0.35,
            max_gap: 5,
            min_len: 16,
            pad_frac: 0.10,
            tau_unit: 1.5,
            target_width: 576,
            target_height: 320,
            n: 16,
            stride: 1,
        }
    }
}

impl ExtractorConfig {
    pub fn target_ratio(&self) -> f64 {
        self.target_width as f64 / self.target_height as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(0.0..=1.0).contains(&self.det_threshold) {
            return bad(format!("det_threshold {} outside [0, 1]", self.det_threshold));
        }
        if !(0.0..=3.0).contains(&self.tau_unit) {
            return bad(format!("tau_unit {} outside [0, 3]", self.tau_unit));
        }
        if !(self.pad_frac.is_finite() && self.pad_frac >= 0.0) {
            return bad(format!("pad_frac {} must be >= 0", self.pad_frac));
        }
        if self.target_width == 0 || self.target_height == 0 {
            return bad("target aspect ratio needs positive width and height".into());
        }
        if self.n == 0 || self.min_len == 0 || self.stride == 0 {
            return bad("n, min_len and stride must be at least 1".into());
        }
        Ok(())
    }
}

/// Pixel rectangle, `x0..x1` by `y0..y1` (exclusive upper bounds).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CropRect {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl CropRect {
    pub fn full(meta: &VideoMeta) -> Self {
        Self {
            x0: 0,
            y0: 0,
            x1: meta.width,
            y1: meta.height,
        }
    }

    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }

    pub fn aspect(&self) -> f64 {
        self.width() as f64 / self.height() as f64
    }

    pub fn within(&self, meta: &VideoMeta) -> bool {
        self.x0 < self.x1 && self.y0 < self.y1 && self.x1 <= meta.width && self.y1 <= meta.height
    }

    pub fn contains_box(&self, b: [f64; 4]) -> bool {
        self.x0 as f64 <= b[0] && self.y0 as f64 <= b[1] && b[2] <= self.x1 as f64 && b[3] <= self.y1 as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyframeSpec {
    pub video_ref: String,
    /// Inclusive frame range.
    pub segment: (usize, usize),
    pub crop: CropRect,
    pub frame_indices: Vec<usize>,
    pub n: usize,
}

impl KeyframeSpec {
    /// Bytes of `keyframes.json`.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("spec serialises");
        s.push('\n');
        s
    }
}

/// A reference unit close enough to some prompt unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedUnit {
    pub unit_index: usize,
    pub phrase: String,
    pub best_sim: f64,
}

/// Units of the retrieved caption whose best unit-pair similarity against
/// the prompt's units reaches `tau_unit`, in caption order.
pub fn match_reference_units(reference: &[SemanticUnit], prompt: &[SemanticUnit], tau_unit: f64) -> Result<Vec<MatchedUnit>> {
    if !(0.0..=3.0).contains(&tau_unit) {
        return Err(Error::InvalidConfig(format!("tau_unit {tau_unit} outside [0, 3]")));
    }
    let mut out = Vec::new();
    for (i, r) in reference.iter().enumerate() {
        let mut best = f64::NEG_INFINITY;
        for p in prompt {
            best = best.max(unit_pair_sim(r, p)?);
        }
        if best >= tau_unit {
            out.push(MatchedUnit {
                unit_index: i,
                phrase: r.phrase(),
                best_sim: best,
            });
        }
    }
    Ok(out)
}

/// Detection captions for the matched units, falling back to the whole
/// retrieved caption when nothing matched. Duplicates are dropped.
pub fn detection_captions(matched: &[MatchedUnit], reference_caption: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for m in matched {
        if !out.contains(&m.phrase) {
            out.push(m.phrase.clone());
        }
    }
    if out.is_empty() {
        out.push(reference_caption.trim().to_string());
    }
    out
}

/// Samples `n` frames uniformly over the inclusive segment, endpoints
/// included when `n >= 2`.
pub fn plan_keyframes(
    video_ref: &str,
    segment: (usize, usize),
    crop: CropRect,
    meta: &VideoMeta,
    n: usize,
) -> Result<KeyframeSpec> {
    let (start, end) = segment;
    if start > end || end >= meta.frame_count.max(1) {
        return Err(Error::InvalidInput(format!(
            "segment {segment:?} outside a {}-frame video",
            meta.frame_count
        )));
    }
    if !crop.within(meta) {
        return Err(Error::InvalidInput(format!(
            "crop {crop:?} outside the {}x{} frame",
            meta.width, meta.height
        )));
    }
    if n == 0 {
        return Err(Error::InvalidInput("keyframe count must be at least 1".into()));
    }
    let len = end - start + 1;
    if n > len {
        return Err(Error::SegmentTooShort {
            requested: n,
            available: len,
        });
    }
    let frame_indices = if n == 1 {
        vec![start + (len - 1) / 2]
    } else {
        // round(k * (len - 1) / (n - 1)), half up, in integers.
        let span = len - 1;
        let steps = n - 1;
        (0..n).map(|k| start + (2 * k * span + steps) / (2 * steps)).collect()
    };
    Ok(KeyframeSpec {
        video_ref: video_ref.to_string(),
        segment,
        crop,
        frame_indices,
        n,
    })
}
