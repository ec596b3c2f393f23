//! Silhouettes and motion history templates.
//!
//! A template stores, per pixel, the timestamp of the most recent motion seen
//! at that pixel. Pixels whose last motion is older than `tau - delta` are
//! cleared, so a full pass leaves a trail whose intensity increases toward the
//! most recent movement.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;

/// Default binary threshold on 0-255 intensity differences.
pub const DEFAULT_THRESHOLD: u8 = 32;

/// Maps a 1-based update index to the timestamp written for that update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TauSchedule {
    /// `tau_t = t`.
    StepIndex,
    /// `tau_t = t * scale`, `scale > 0`.
    Scaled { scale: f32 },
}

impl TauSchedule {
    pub fn tau(&self, step: usize) -> f32 {
        match *self {
            TauSchedule::StepIndex => step as f32,
            TauSchedule::Scaled { scale } => step as f32 * scale,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplateConfig {
    pub threshold: u8,
    pub delta: f32,
    pub tau_schedule: TauSchedule,
}

impl TemplateConfig {
    pub fn new(threshold: u8, delta: f32) -> Result<Self> {
        let cfg = Self {
            threshold,
            delta,
            tau_schedule: TauSchedule::StepIndex,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default threshold with `delta = n - 1`, so nothing decays inside an `n`-frame clip.
    pub fn for_clip(n: usize) -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            delta: n.saturating_sub(1).max(1) as f32,
            tau_schedule: TauSchedule::StepIndex,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.threshold == 0 {
            return Err(Error::Config("threshold must be positive".into()));
        }
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(Error::Config(format!(
                "delta must be positive and finite, got {}",
                self.delta
            )));
        }
        if let TauSchedule::Scaled { scale } = self.tau_schedule {
            if !(scale > 0.0) || !scale.is_finite() {
                return Err(Error::Config(format!(
                    "tau scale must be positive, got {scale}"
                )));
            }
        }
        Ok(())
    }
}

/// Timestamp raster produced by folding silhouettes.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionTemplate {
    width: usize,
    height: usize,
    values: Vec<f32>,
    tau_final: f32,
    delta: f32,
}

impl MotionTemplate {
    /// Empty template; `tau_final` starts at 0 so the first update may use any positive tau.
    pub fn empty(width: usize, height: usize, delta: f32) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height],
            tau_final: 0.0,
            delta,
        }
    }

    pub fn from_parts(
        width: usize,
        height: usize,
        values: Vec<f32>,
        tau_final: f32,
        delta: f32,
    ) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::Shape(format!(
                "{width}x{height} template needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        Ok(Self {
            width,
            height,
            values,
            tau_final,
            delta,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn tau_final(&self) -> f32 {
        self.tau_final
    }

    pub fn delta(&self) -> f32 {
        self.delta
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.values[y * self.width + x]
    }

    fn check_dims(&self, img: &GrayImage) -> Result<()> {
        if img.dims() != (self.width, self.height) {
            return Err(Error::Shape(format!(
                "template is {}x{}, silhouette is {}x{}",
                self.width,
                self.height,
                img.width(),
                img.height()
            )));
        }
        Ok(())
    }
}

/// Binary motion mask: 1 where `|a - b| >= threshold`, else 0.
pub fn silhouette(a: &GrayImage, b: &GrayImage, threshold: u8) -> Result<GrayImage> {
    if threshold == 0 {
        return Err(Error::Config("threshold must be positive".into()));
    }
    if !a.same_dims(b) {
        return Err(Error::Shape(format!(
            "frames are {}x{} and {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&p, &q)| u8::from(p.abs_diff(q) >= threshold))
        .collect();
    GrayImage::new(a.width(), a.height(), data)
}

/// One step of the template recurrence at timestamp `tau`.
pub fn template_update(
    prev: &MotionTemplate,
    sil: &GrayImage,
    tau: f32,
    delta: f32,
) -> Result<MotionTemplate> {
    prev.check_dims(sil)?;
    if !(tau > prev.tau_final) {
        return Err(Error::Ordering {
            tau,
            previous: prev.tau_final,
        });
    }
    let floor = tau - delta;
    let values = prev
        .values
        .iter()
        .zip(sil.data())
        .map(|(&v, &s)| {
            if s > 0 {
                tau
            } else if v < floor {
                0.0
            } else {
                v
            }
        })
        .collect();
    Ok(MotionTemplate {
        width: prev.width,
        height: prev.height,
        values,
        tau_final: tau,
        delta,
    })
}

/// Folds silhouettes of consecutive frame pairs into a template (`n - 1` updates).
pub fn compute_template(frames: &[GrayImage], cfg: &TemplateConfig) -> Result<MotionTemplate> {
    cfg.validate()?;
    if frames.len() < 2 {
        return Err(Error::InsufficientInput(format!(
            "need at least 2 frames, got {}",
            frames.len()
        )));
    }
    let (w, h) = frames[0].dims();
    if let Some((i, f)) = frames.iter().enumerate().find(|(_, f)| f.dims() != (w, h)) {
        return Err(Error::Shape(format!(
            "frame {i} is {}x{}, expected {w}x{h}",
            f.width(),
            f.height()
        )));
    }
    let mut mu = MotionTemplate::empty(w, h, cfg.delta);
    for (t, pair) in frames.windows(2).enumerate() {
        let sil = silhouette(&pair[0], &pair[1], cfg.threshold)?;
        mu = template_update(&mu, &sil, cfg.tau_schedule.tau(t + 1), cfg.delta)?;
    }
    Ok(mu)
}

/// Rescales timestamps so the most recent motion maps to 255.
pub fn normalize_template(mu: &MotionTemplate) -> Result<GrayImage> {
    if mu.tau_final == 0.0 {
        return Err(Error::DegenerateTemplate);
    }
    let data = mu
        .values
        .iter()
        .map(|&v| (255.0 * v / mu.tau_final).round().clamp(0.0, 255.0) as u8)
        .collect();
    GrayImage::new(mu.width, mu.height, data)
}

/// Writes the normalized template as PGM plus a `<path>.meta` sidecar with
/// `tau_final`, `delta` and `threshold`.
pub fn write_template(path: impl AsRef<Path>, mu: &MotionTemplate, threshold: u8) -> Result<()> {
    let path = path.as_ref();
    normalize_template(mu)?.write_pgm(path)?;
    let sidecar = sidecar_path(path);
    let text = format!(
        "tau_final={}\ndelta={}\nthreshold={}\n",
        mu.tau_final, mu.delta, threshold
    );
    fs::write(&sidecar, text).map_err(|e| Error::io(&sidecar, e))
}

/// Header fields recorded next to a serialized template.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TemplateHeader {
    pub tau_final: f32,
    pub delta: f32,
    pub threshold: u8,
}

pub fn read_template_header(path: impl AsRef<Path>) -> Result<TemplateHeader> {
    let sidecar = sidecar_path(path.as_ref());
    let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let mut tau_final = None;
    let mut delta = None;
    let mut threshold = None;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::format(&sidecar, format!("bad line {line:?}")))?;
        let bad = || Error::format(&sidecar, format!("bad value for {key}"));
        match key.trim() {
            "tau_final" => tau_final = Some(value.trim().parse::<f32>().map_err(|_| bad())?),
            "delta" => delta = Some(value.trim().parse::<f32>().map_err(|_| bad())?),
            "threshold" => threshold = Some(value.trim().parse::<u8>().map_err(|_| bad())?),
            other => return Err(Error::format(&sidecar, format!("unknown key {other}"))),
        }
    }
    match (tau_final, delta, threshold) {
        (Some(tau_final), Some(delta), Some(threshold)) => Ok(TemplateHeader {
            tau_final,
            delta,
            threshold,
        }),
        _ => Err(Error::format(&sidecar, "missing header field")),
    }
}

fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta");
    name.into()
}
