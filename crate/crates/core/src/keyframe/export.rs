use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcher::{MatchConfig, RankedMatch};

use super::{ExtractorConfig, KeyframeSpec, VideoMeta};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Settings that produced a package, recorded for reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackageConfig {
    pub matcher: MatchConfig,
    pub extractor: ExtractorConfig,
    pub provider_fingerprint: String,
    pub video: VideoMeta,
}

/// Everything a downstream fine-tuner needs about one retrieval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorPackage {
    pub prompt: String,
    #[serde(rename = "match")]
    pub matched: RankedMatch,
    pub reference_caption: String,
    pub matched_captions: Vec<String>,
    pub keyframes: KeyframeSpec,
    pub created_at: String,
    pub engine_version: String,
    pub config: PackageConfig,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl PriorPackage {
    pub fn timestamp_now() -> String {
        chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
    }
}

/// Decodes single video frames to pixels.
pub trait FrameAccessor: Send + Sync {
    fn frame(&self, video_ref: &str, index: usize, meta: &VideoMeta) -> Result<RgbImage>;
}

/// Never produces pixels; exporting with it writes no frames.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullAccessor;

impl FrameAccessor for NullAccessor {
    fn frame(&self, _video_ref: &str, _index: usize, _meta: &VideoMeta) -> Result<RgbImage> {
        Err(Error::FrameAccessorFailure("no frame accessor configured".into()))
    }
}

/// Extracts frames by running an external `ffmpeg` binary.
#[derive(Debug, Clone)]
pub struct FfmpegAccessor {
    pub program: PathBuf,
}

impl Default for FfmpegAccessor {
    fn default() -> Self {
        Self {
            program: PathBuf::from("ffmpeg"),
        }
    }
}

impl FrameAccessor for FfmpegAccessor {
    fn frame(&self, video_ref: &str, index: usize, _meta: &VideoMeta) -> Result<RgbImage> {
        let out = Command::new(&self.program)
            .args(["-v", "error", "-i", video_ref, "-vf"])
            .arg(format!("select=eq(n\\,{index})"))
            .args(["-vframes", "1", "-f", "image2pipe", "-vcodec", "png", "-"])
            .output()
            .map_err(|e| Error::FrameAccessorFailure(format!("cannot run {}: {e}", self.program.display())))?;
        if !out.status.success() || out.stdout.is_empty() {
            return Err(Error::FrameAccessorFailure(format!(
                "{} failed on frame {index} of {video_ref}: {}",
                self.program.display(),
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        image::load_from_memory_with_format(&out.stdout, image::ImageFormat::Png)
            .map(|img| img.to_rgb8())
            .map_err(|e| Error::FrameAccessorFailure(format!("undecodable frame {index}: {e}")))
    }
}

/// Writes `package.json` and `keyframes.json` into `out_dir`, then, given an
/// accessor, the cropped frames as `frames/0000.png` onwards.
///
/// If the accessor fails, both JSON files are already in place, the partial
/// `frames/` directory is removed and `FrameAccessorFailure` is returned.
pub fn export_package(pkg: &PriorPackage, out_dir: &Path, accessor: Option<&dyn FrameAccessor>) -> Result<PathBuf> {
    if pkg.matched_captions.is_empty() {
        return Err(Error::InvalidInput("package needs at least one matched caption".into()));
    }
    fs::create_dir_all(out_dir)?;
    let package_path = out_dir.join("package.json");
    let mut json = serde_json::to_string_pretty(pkg)?;
    json.push('\n');
    fs::write(&package_path, json)?;
    fs::write(out_dir.join("keyframes.json"), pkg.keyframes.to_json())?;

    if let Some(acc) = accessor {
        let frames = out_dir.join("frames");
        if let Err(e) = write_frames(acc, &pkg.keyframes, &pkg.config.video, &frames) {
            let _ = fs::remove_dir_all(&frames);
            return Err(match e {
                Error::FrameAccessorFailure(_) => e,
                other => Error::FrameAccessorFailure(other.to_string()),
            });
        }
    }
    Ok(package_path)
}

fn write_frames(acc: &dyn FrameAccessor, spec: &KeyframeSpec, meta: &VideoMeta, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let c = spec.crop;
    for (i, &f) in spec.frame_indices.iter().enumerate() {
        let img = acc.frame(&spec.video_ref, f, meta)?;
        if img.width() < c.x1 || img.height() < c.y1 {
            return Err(Error::FrameAccessorFailure(format!(
                "frame {f} is {}x{}, smaller than crop {c:?}",
                img.width(),
                img.height()
            )));
        }
        let cropped = image::imageops::crop_imm(&img, c.x0, c.y0, c.width(), c.height()).to_image();
        cropped
            .save_with_format(dir.join(format!("{i:04}.png")), image::ImageFormat::Png)
            .map_err(|e| Error::FrameAccessorFailure(format!("cannot write frame {i}: {e}")))?;
    }
    Ok(())
}
