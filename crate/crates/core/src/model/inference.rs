//! Inference helpers: template generation, discriminator probes and
//! held-out evaluation.

use super::networks::{Discriminator, Generator};
use super::train::TrainData;
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::tensor::{Tape, Tensor};

fn frame_tensor(frame: &GrayImage, resolution: usize) -> Result<Tensor> {
    if frame.dims() != (resolution, resolution) {
        return Err(Error::Shape(format!(
            "expected a {resolution}x{resolution} image, got {}x{}",
            frame.width(),
            frame.height()
        )));
    }
    Tensor::new(vec![1, 1, resolution, resolution], frame.to_unit())
}

/// Raw head outputs in (0, 1) for one frame, one vector per head.
pub fn generate_raw(generator: &Generator, frame: &GrayImage) -> Result<Vec<Vec<f32>>> {
    let r = generator.resolution();
    let out = generator.predict(&frame_tensor(frame, r)?)?;
    Ok(out.data().chunks(r * r).map(<[f32]>::to_vec).collect())
}

/// One template image per head.
pub fn generate(generator: &Generator, frame: &GrayImage) -> Result<Vec<GrayImage>> {
    let r = generator.resolution();
    generate_raw(generator, frame)?
        .iter()
        .map(|h| GrayImage::from_unit(r, r, h))
        .collect()
}

/// The input frame followed by every head's template, side by side.
pub fn panel(frame: &GrayImage, templates: &[GrayImage]) -> Result<GrayImage> {
    let mut tiles = Vec::with_capacity(templates.len() + 1);
    tiles.push(frame.clone());
    tiles.extend_from_slice(templates);
    GrayImage::hstack(&tiles)
}

/// Discriminator view of one `(frame, template)` pair.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscProbe {
    /// Feature-layer activations, `[2c, R/4, R/4]`.
    pub features: Tensor,
    /// Mean patch probability of "real".
    pub realism: f32,
}

pub fn probe(disc: &Discriminator, frame: &GrayImage, template: &GrayImage) -> Result<DiscProbe> {
    let r = disc.config().resolution;
    let f = frame_tensor(frame, r)?;
    let t = frame_tensor(template, r)?;
    let tape = Tape::new();
    let p = disc.params().bind(&tape);
    let out = disc.forward(&p, tape.leaf(f), tape.leaf(t))?;
    let shape = disc.config().feature_shape();
    let features = (*out.features.value()).clone().reshape(&shape)?;
    let logits = out.logits.sigmoid().mean().item();
    Ok(DiscProbe {
        features,
        realism: logits,
    })
}

pub fn discriminator_features(
    disc: &Discriminator,
    frame: &GrayImage,
    template: &GrayImage,
) -> Result<Tensor> {
    Ok(probe(disc, frame, template)?.features)
}

pub fn realism(disc: &Discriminator, frame: &GrayImage, template: &GrayImage) -> Result<f32> {
    Ok(probe(disc, frame, template)?.realism)
}

/// Held-out reconstruction quality.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    /// Mean over samples of the closest head's mean absolute error.
    pub min_l1: f64,
    pub argmin_histogram: Vec<usize>,
}

pub fn evaluate(generator: &Generator, data: &TrainData) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::Config("evaluation set is empty".into()));
    }
    let heads = generator.heads();
    let px = data.resolution() * data.resolution();
    let mut histogram = vec![0usize; heads];
    let mut total = 0.0f64;
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(16) {
        let (x, y) = data.batch(chunk);
        let out = generator.predict(&x)?;
        for (i, truth) in y.data().chunks(px).enumerate() {
            let mut best = (0usize, f64::INFINITY);
            for k in 0..heads {
                let start = (i * heads + k) * px;
                let d = l1(&out.data()[start..start + px], truth);
                if d < best.1 {
                    best = (k, d);
                }
            }
            histogram[best.0] += 1;
            total += best.1;
        }
    }
    Ok(Evaluation {
        min_l1: total / data.len() as f64,
        argmin_histogram: histogram,
    })
}

fn l1(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x as f64 - y as f64).abs())
        .sum::<f64>()
        / a.len() as f64
}

/// Pixelwise mean of the training targets.
pub fn mean_template(data: &TrainData) -> Vec<f32> {
    let px = data.resolution() * data.resolution();
    let mut acc = vec![0.0f64; px];
    for t in data.targets() {
        for (a, &v) in acc.iter_mut().zip(t) {
            *a += v as f64;
        }
    }
    acc.iter()
        .map(|&a| (a / data.len() as f64) as f32)
        .collect()
}

/// Mean absolute error of predicting `template` for every sample.
pub fn constant_l1(template: &[f32], data: &TrainData) -> f64 {
    data.targets().iter().map(|t| l1(template, t)).sum::<f64>() / data.len() as f64
}
