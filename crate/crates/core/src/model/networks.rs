//! Generator and patch discriminator.
//!
//! Generator: a U-Net-lite. Four stride-2 4×4 convolutions take the
//! `R×R×1` frame down to `R/16`, four transposed convolutions bring it back,
//! and each decoder stage is concatenated with the matching encoder
//! activation. Inner stages are instance-normalized. The last layer has one
//! output channel per head, squashed into (0, 1). Inputs in [0, 1] are mapped
//! to [-1, 1] first.
//!
//! | stage | op                         | channels (base c) | side |
//! |-------|----------------------------|-------------------|------|
//! | down1 | conv, leaky-ReLU           | 1 → c             | R/2  |
//! | down2 | conv, norm, leaky-ReLU     | c → 2c            | R/4  |
//! | down3 | conv, norm, leaky-ReLU     | 2c → 4c           | R/8  |
//! | down4 | conv, leaky-ReLU           | 4c → 4c           | R/16 |
//! | up1   | tconv, norm, ReLU, ⧺ down3 | 4c → 4c (+4c)     | R/8  |
//! | up2   | tconv, norm, ReLU, ⧺ down2 | 8c → 2c (+2c)     | R/4  |
//! | up3   | tconv, norm, ReLU, ⧺ down1 | 4c → c (+c)       | R/2  |
//! | up4   | tconv, sigmoid             | 2c → K            | R    |
//!
//! Discriminator: the frame and a template are stacked as two channels and
//! passed through three stride-2 4×4 convolutions, giving an `R/8 × R/8`
//! grid of realism logits. The activations after the second block
//! (`2c × R/4 × R/4`) are the feature layer used for reward shaping.

use serde::{Deserialize, Serialize};

use super::params::{he_uniform, ParamSet};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::tensor::{Element, Tape, Tensor, Var};

pub const LEAKY_SLOPE: f64 = 0.2;
pub const NORM_EPS: f64 = 1e-5;
/// Outputs live in `[EDGE, 1 - EDGE]`, so they stay strictly inside (0, 1) even in `f32`.
pub const OUTPUT_EDGE: f64 = 1e-6;
/// Initial head bias: heads start close to an empty template.
pub const HEAD_BIAS_INIT: f64 = -2.0;

const KERNEL: usize = 4;
const STRIDE: usize = 2;
const PAD: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub heads: usize,
    pub base_channels: usize,
    pub resolution: usize,
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 {
            return Err(Error::Config("generator needs at least one head".into()));
        }
        if self.base_channels == 0 {
            return Err(Error::Config("base_channels must be positive".into()));
        }
        if self.resolution < 16 || self.resolution % 16 != 0 {
            return Err(Error::Config(format!(
                "resolution must be a positive multiple of 16, got {}",
                self.resolution
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generator<T: Element = f32> {
    config: GeneratorConfig,
    params: ParamSet<T>,
}

fn conv_param<T: Element>(
    params: &mut ParamSet<T>,
    name: &str,
    cin: usize,
    cout: usize,
    rng: &mut Rng,
) {
    params.push(
        format!("{name}.weight"),
        he_uniform(&[cout, cin, KERNEL, KERNEL], cin * KERNEL * KERNEL, rng),
    );
    params.push(format!("{name}.bias"), Tensor::zeros(&[cout]));
}

fn tconv_param<T: Element>(
    params: &mut ParamSet<T>,
    name: &str,
    cin: usize,
    cout: usize,
    rng: &mut Rng,
) {
    // each output pixel sees (k / stride)^2 taps per input channel
    let taps = cin * (KERNEL / STRIDE) * (KERNEL / STRIDE);
    params.push(
        format!("{name}.weight"),
        he_uniform(&[cin, cout, KERNEL, KERNEL], taps, rng),
    );
    params.push(format!("{name}.bias"), Tensor::zeros(&[cout]));
}

fn conv<'t, T: Element>(x: Var<'t, T>, p: &[Var<'t, T>], layer: usize) -> Result<Var<'t, T>> {
    x.conv2d(p[2 * layer], STRIDE, PAD)?
        .add_bias(p[2 * layer + 1])
}

fn tconv<'t, T: Element>(x: Var<'t, T>, p: &[Var<'t, T>], layer: usize) -> Result<Var<'t, T>> {
    x.conv_transpose2d(p[2 * layer], STRIDE, PAD)?
        .add_bias(p[2 * layer + 1])
}

fn check_input<T: Element>(x: &Var<'_, T>, channels: usize, res: usize) -> Result<()> {
    let s = x.shape();
    if s.len() != 4 || s[1] != channels || s[2] != res || s[3] != res {
        return Err(Error::Shape(format!(
            "expected [N, {channels}, {res}, {res}], got {s:?}"
        )));
    }
    Ok(())
}

impl<T: Element> Generator<T> {
    pub fn new(config: GeneratorConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let c = config.base_channels;
        let mut p = ParamSet::default();
        conv_param(&mut p, "down1", 1, c, rng);
        conv_param(&mut p, "down2", c, 2 * c, rng);
        conv_param(&mut p, "down3", 2 * c, 4 * c, rng);
        conv_param(&mut p, "down4", 4 * c, 4 * c, rng);
        tconv_param(&mut p, "up1", 4 * c, 4 * c, rng);
        tconv_param(&mut p, "up2", 8 * c, 2 * c, rng);
        tconv_param(&mut p, "up3", 4 * c, c, rng);
        tconv_param(&mut p, "up4", 2 * c, config.heads, rng);
        let last = p.len() - 1;
        p.tensors_mut()[last] = Tensor::full(&[config.heads], T::of(HEAD_BIAS_INIT));
        Ok(Self { config, params: p })
    }

    pub fn config(&self) -> GeneratorConfig {
        self.config
    }

    pub fn heads(&self) -> usize {
        self.config.heads
    }

    pub fn resolution(&self) -> usize {
        self.config.resolution
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    pub fn cast<U: Element>(&self) -> Generator<U> {
        Generator {
            config: self.config,
            params: self.params.cast(),
        }
    }

    /// `[N, 1, R, R]` frames to `[N, K, R, R]` templates, one channel per head.
    pub fn forward<'t>(&self, p: &[Var<'t, T>], x: Var<'t, T>) -> Result<Var<'t, T>> {
        check_input(&x, 1, self.config.resolution)?;
        let slope = T::of(LEAKY_SLOPE);
        // inputs are in [0, 1]; the layers see them centred on zero
        let x = x.affine(T::of(2.0), -T::one());
        let eps = T::of(NORM_EPS);
        let d1 = conv(x, p, 0)?.leaky_relu(slope);
        let d2 = conv(d1, p, 1)?.instance_norm(eps)?.leaky_relu(slope);
        let d3 = conv(d2, p, 2)?.instance_norm(eps)?.leaky_relu(slope);
        let d4 = conv(d3, p, 3)?.leaky_relu(slope);
        let u1 = tconv(d4, p, 4)?.instance_norm(eps)?.relu();
        let u2 = tconv(Var::concat(&[u1, d3], 1)?, p, 5)?
            .instance_norm(eps)?
            .relu();
        let u3 = tconv(Var::concat(&[u2, d2], 1)?, p, 6)?
            .instance_norm(eps)?
            .relu();
        let logits = tconv(Var::concat(&[u3, d1], 1)?, p, 7)?;
        let edge = T::of(OUTPUT_EDGE);
        Ok(logits.sigmoid().affine(T::one() - edge - edge, edge))
    }

    /// Forward pass on a fresh tape, returning the output values only.
    pub fn predict(&self, frames: &Tensor<T>) -> Result<Tensor<T>> {
        let tape = Tape::new();
        let p = self.params.bind(&tape);
        let out = self.forward(&p, tape.leaf(frames.clone()))?;
        let value = out.value();
        Ok((*value).clone())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscriminatorConfig {
    pub base_channels: usize,
    pub resolution: usize,
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.base_channels == 0 {
            return Err(Error::Config("base_channels must be positive".into()));
        }
        if self.resolution < 8 || self.resolution % 8 != 0 {
            return Err(Error::Config(format!(
                "resolution must be a positive multiple of 8, got {}",
                self.resolution
            )));
        }
        Ok(())
    }

    /// Shape of the per-sample feature layer: `[2c, R/4, R/4]`.
    pub fn feature_shape(&self) -> [usize; 3] {
        [
            2 * self.base_channels,
            self.resolution / 4,
            self.resolution / 4,
        ]
    }

    /// Shape of the per-sample logit grid: `[1, R/8, R/8]`.
    pub fn patch_shape(&self) -> [usize; 3] {
        [1, self.resolution / 8, self.resolution / 8]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator<T: Element = f32> {
    config: DiscriminatorConfig,
    params: ParamSet<T>,
}

/// Outputs of one discriminator pass.
pub struct DiscOutput<'t, T: Element> {
    pub features: Var<'t, T>,
    pub logits: Var<'t, T>,
}

impl<T: Element> Discriminator<T> {
    pub fn new(config: DiscriminatorConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let c = config.base_channels;
        let mut p = ParamSet::default();
        conv_param(&mut p, "block1", 2, c, rng);
        conv_param(&mut p, "block2", c, 2 * c, rng);
        conv_param(&mut p, "patch", 2 * c, 1, rng);
        Ok(Self { config, params: p })
    }

    pub fn config(&self) -> DiscriminatorConfig {
        self.config
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    pub fn cast<U: Element>(&self) -> Discriminator<U> {
        Discriminator {
            config: self.config,
            params: self.params.cast(),
        }
    }

    /// Scores `(frame, template)` pairs, both `[N, 1, R, R]`.
    pub fn forward<'t>(
        &self,
        p: &[Var<'t, T>],
        frame: Var<'t, T>,
        template: Var<'t, T>,
    ) -> Result<DiscOutput<'t, T>> {
        let res = self.config.resolution;
        check_input(&frame, 1, res)?;
        check_input(&template, 1, res)?;
        if frame.shape()[0] != template.shape()[0] {
            return Err(Error::Shape(format!(
                "frame batch {:?} vs template batch {:?}",
                frame.shape(),
                template.shape()
            )));
        }
        let slope = T::of(LEAKY_SLOPE);
        let x = Var::concat(&[frame, template], 1)?.affine(T::of(2.0), -T::one());
        let h1 = conv(x, p, 0)?.leaky_relu(slope);
        let features = conv(h1, p, 1)?.leaky_relu(slope);
        let logits = conv(features, p, 2)?;
        Ok(DiscOutput { features, logits })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn small_gen(heads: usize) -> Generator<f32> {
        let cfg = GeneratorConfig {
            heads,
            base_channels: 2,
            resolution: 16,
        };
        Generator::new(cfg, &mut stream(1, Stream::Init)).unwrap()
    }

    #[test]
    fn generator_shapes() {
        let g = small_gen(3);
        let out = g.predict(&Tensor::zeros(&[2, 1, 16, 16])).unwrap();
        assert_eq!(out.shape(), &[2, 3, 16, 16]);
        assert!(out.data().iter().all(|&v| v > 0.0 && v < 1.0));
        assert!(g.predict(&Tensor::zeros(&[1, 1, 32, 32])).is_err());
    }

    #[test]
    fn saturated_logits_stay_inside_unit_interval() {
        let mut g = small_gen(1);
        let last = g.params().len() - 1;
        g.params_mut().tensors_mut()[last] = Tensor::full(&[1], 1e4);
        let hi = g.predict(&Tensor::full(&[1, 1, 16, 16], 1.0)).unwrap();
        assert!(hi.data().iter().all(|&v| v < 1.0));
        g.params_mut().tensors_mut()[last] = Tensor::full(&[1], -1e4);
        let lo = g.predict(&Tensor::full(&[1, 1, 16, 16], 1.0)).unwrap();
        assert!(lo.data().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn discriminator_shapes() {
        let cfg = DiscriminatorConfig {
            base_channels: 3,
            resolution: 16,
        };
        let d = Discriminator::<f32>::new(cfg, &mut stream(2, Stream::Init)).unwrap();
        let tape = Tape::new();
        let p = d.params().bind(&tape);
        let f = tape.leaf(Tensor::zeros(&[2, 1, 16, 16]));
        let t = tape.leaf(Tensor::zeros(&[2, 1, 16, 16]));
        let out = d.forward(&p, f, t).unwrap();
        assert_eq!(out.features.shape(), vec![2, 6, 4, 4]);
        assert_eq!(out.logits.shape(), vec![2, 1, 2, 2]);
        assert_eq!(cfg.feature_shape(), [6, 4, 4]);
    }

    #[test]
    fn config_validation() {
        let bad = GeneratorConfig {
            heads: 0,
            base_channels: 2,
            resolution: 16,
        };
        assert!(bad.validate().is_err());
        let bad = GeneratorConfig {
            heads: 1,
            base_channels: 2,
            resolution: 24,
        };
        assert!(bad.validate().is_err());
    }
}
