use crate::error::{Error, Result};

use super::{CropRect, Detection, ExtractorConfig, VideoMeta};

/// Whole video, whole frame: used when no detection survives.
pub fn full_frame_fallback(meta: &VideoMeta) -> ((usize, usize), CropRect) {
    ((0, meta.frame_count.saturating_sub(1)), CropRect::full(meta))
}

/// Picks the temporal segment and crop supported by the detections.
///
/// Confident detections mark frames; marked frames separated by at most
/// `max_gap` unmarked frames form one run; the run with the largest
/// confidence sum wins (earliest on ties) and is widened to `min_len`
/// frames around its centre. The crop is the padded union of the winning
/// run's boxes, grown to the target aspect ratio.
pub fn segment_detections(dets: &[Detection], meta: &VideoMeta, cfg: &ExtractorConfig) -> Result<((usize, usize), CropRect)> {
    cfg.validate()?;
    if meta.frame_count == 0 || meta.width == 0 || meta.height == 0 {
        return Err(Error::InvalidInput("video has no frames or zero size".into()));
    }
    for d in dets {
        d.validate()?;
        if d.frame_index >= meta.frame_count {
            return Err(Error::InvalidInput(format!(
                "detection on frame {} of a {}-frame video",
                d.frame_index, meta.frame_count
            )));
        }
    }
    let kept: Vec<&Detection> = dets.iter().filter(|d| d.confidence >= cfg.det_threshold).collect();
    if kept.is_empty() {
        return Err(Error::NoDetections);
    }

    let mut per_frame = vec![0.0f64; meta.frame_count];
    let mut marked = vec![false; meta.frame_count];
    for d in &kept {
        per_frame[d.frame_index] += d.confidence;
        marked[d.frame_index] = true;
    }

    let mut best: Option<(f64, usize, usize)> = None;
    let mut run: Option<(usize, usize, f64)> = None;
    let close = |run: (usize, usize, f64), best: &mut Option<(f64, usize, usize)>| {
        if best.is_none_or(|b| run.2 > b.0) {
            *best = Some((run.2, run.0, run.1));
        }
    };
    for f in (0..meta.frame_count).filter(|&f| marked[f]) {
        run = match run {
            Some((s, e, sum)) if f - e - 1 <= cfg.max_gap => Some((s, f, sum + per_frame[f])),
            Some(done) => {
                close(done, &mut best);
                Some((f, f, per_frame[f]))
            }
            None => Some((f, f, per_frame[f])),
        };
    }
    close(run.expect("at least one marked frame"), &mut best);
    let (_, start, end) = best.expect("at least one run");

    let segment = extend(start, end, cfg.min_len, meta.frame_count);

    let mut union = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for d in kept.iter().filter(|d| (start..=end).contains(&d.frame_index)) {
        union[0] = union[0].min(d.bbox[0]);
        union[1] = union[1].min(d.bbox[1]);
        union[2] = union[2].max(d.bbox[2]);
        union[3] = union[3].max(d.bbox[3]);
    }
    let (pw, ph) = ((union[2] - union[0]) * cfg.pad_frac, (union[3] - union[1]) * cfg.pad_frac);
    let clamp = |v: f64, hi: u32| v.max(0.0).min(hi as f64);
    let padded = CropRect {
        x0: clamp((union[0] - pw).floor(), meta.width) as u32,
        y0: clamp((union[1] - ph).floor(), meta.height) as u32,
        x1: clamp((union[2] + pw).ceil(), meta.width) as u32,
        y1: clamp((union[3] + ph).ceil(), meta.height) as u32,
    };
    // A box lying entirely outside the frame collapses after clamping.
    let padded = CropRect {
        x1: padded.x1.max(padded.x0 + 1).min(meta.width),
        y1: padded.y1.max(padded.y0 + 1).min(meta.height),
        x0: padded.x0.min(meta.width - 1),
        y0: padded.y0.min(meta.height - 1),
    };
    Ok((segment, fit_aspect(padded, meta, cfg.target_width, cfg.target_height)))
}

/// Widens `start..=end` to at least `min_len` frames, centred, kept inside
/// `0..frame_count`.
fn extend(start: usize, end: usize, min_len: usize, frame_count: usize) -> (usize, usize) {
    let len = end - start + 1;
    if len >= min_len {
        return (start, end);
    }
    if min_len >= frame_count {
        return (0, frame_count - 1);
    }
    let grow = min_len - len;
    let mut s = start.saturating_sub(grow / 2);
    let mut e = s + min_len - 1;
    if e >= frame_count {
        e = frame_count - 1;
        s = e + 1 - min_len;
    }
    (s, e)
}

/// Grows `rect` (never shrinks it) to the `tw:th` aspect ratio within 1%,
/// centred on the original and shifted to stay inside the frame.
///
/// When no such rectangle fits in the frame, containment wins: the result
/// spans the frame in the limiting direction and keeps the original extent
/// otherwise, so the ratio may be off.
pub fn fit_aspect(rect: CropRect, meta: &VideoMeta, tw: u32, th: u32) -> CropRect {
    let ratio = tw as f64 / th as f64;
    let (w, h) = (rect.width(), rect.height());
    let ok = |w2: u32, h2: u32| ((w2 as f64 / h2 as f64) / ratio - 1.0).abs() <= 0.01;

    let mut found = None;
    for h2 in h..=meta.height {
        let w2 = ((h2 as f64 * ratio).round() as u32).max(w);
        if w2 > meta.width {
            break;
        }
        if ok(w2, h2) {
            found = Some((w2, h2));
            break;
        }
    }
    let (w2, h2) = found.unwrap_or_else(|| {
        // Largest target-ratio size the frame allows, but never smaller
        // than the rectangle itself.
        if (meta.width as f64 / meta.height as f64) < ratio {
            (meta.width, ((meta.width as f64 / ratio).round() as u32).clamp(h, meta.height))
        } else {
            (((meta.height as f64 * ratio).round() as u32).clamp(w, meta.width), meta.height)
        }
    });

    let place = |lo: u32, hi: u32, size: u32, bound: u32| -> u32 {
        let centred = (lo as i64 + hi as i64 - size as i64).div_euclid(2);
        centred.clamp(0, (bound - size) as i64) as u32
    };
    let x0 = place(rect.x0, rect.x1, w2, meta.width);
    let y0 = place(rect.y0, rect.y1, h2, meta.height);
    CropRect {
        x0,
        y0,
        x1: x0 + w2,
        y1: y0 + h2,
    }
}
