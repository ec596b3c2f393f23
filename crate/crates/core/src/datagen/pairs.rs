//! Clip segmentation and frame-motion pair construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::motion::{compute_template, normalize_template, TemplateConfig};

/// `n` consecutive frames cut from one source video.
#[derive(Clone, Debug, PartialEq)]
pub struct Clip {
    pub frames: Vec<GrayImage>,
    pub source_id: String,
    pub start_index: usize,
}

/// Where a pair came from and how its target was computed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairMeta {
    pub source_id: String,
    pub start_index: usize,
    pub n: usize,
    pub config: TemplateConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameMotionPair {
    /// First frame of the clip.
    pub input: GrayImage,
    /// Normalized motion template of the whole clip.
    pub target: GrayImage,
    pub meta: PairMeta,
}

/// Splits a video into `floor(F / n)` non-overlapping clips; the remainder is dropped.
pub fn segment_video(frames: &[GrayImage], n: usize, source_id: &str) -> Result<Vec<Clip>> {
    if n < 2 {
        return Err(Error::Config(format!(
            "clip length must be at least 2, got {n}"
        )));
    }
    Ok(frames
        .chunks_exact(n)
        .enumerate()
        .map(|(i, chunk)| Clip {
            frames: chunk.to_vec(),
            source_id: source_id.to_string(),
            start_index: i * n,
        })
        .collect())
}

pub fn build_pair(clip: &Clip, cfg: &TemplateConfig) -> Result<FrameMotionPair> {
    let template = compute_template(&clip.frames, cfg)?;
    Ok(FrameMotionPair {
        input: clip.frames[0].clone(),
        target: normalize_template(&template)?,
        meta: PairMeta {
            source_id: clip.source_id.clone(),
            start_index: clip.start_index,
            n: clip.frames.len(),
            config: *cfg,
        },
    })
}

/// One pair per clip, in input order. Clips that fail are logged and skipped.
pub fn build_pairs(clips: &[Clip], cfg: &TemplateConfig) -> Vec<FrameMotionPair> {
    clips
        .iter()
        .filter_map(|clip| match build_pair(clip, cfg) {
            Ok(pair) => Some(pair),
            Err(e) => {
                log::warn!("skipping clip {}@{}: {e}", clip.source_id, clip.start_index);
                None
            }
        })
        .collect()
}

/// Recomputes a pair's target from the source video it names.
pub fn recompute_target(meta: &PairMeta, video: &[GrayImage]) -> Result<GrayImage> {
    let end = meta.start_index + meta.n;
    if end > video.len() {
        return Err(Error::Integrity(format!(
            "pair {}@{} needs frames up to {end}, video has {}",
            meta.source_id,
            meta.start_index,
            video.len()
        )));
    }
    normalize_template(&compute_template(
        &video[meta.start_index..end],
        &meta.config,
    )?)
}
