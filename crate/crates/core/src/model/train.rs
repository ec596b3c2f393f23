//! Alternating discriminator/generator training, checkpoints and metrics.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::{adversarial_losses, multimodal_reconstruction, sum_vars};
use super::networks::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig};
use crate::datagen::FrameMotionPair;
use crate::error::{Error, Result};
use crate::rng::{stream_with, Stream};
use crate::tensor::{Adam, AdamConfig, Checkpoint, Tape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub heads: usize,
    pub base_channels: usize,
    pub lambda_rec: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            heads: 1,
            base_channels: 8,
            lambda_rec: 100.0,
            batch_size: 4,
            epochs: 10,
            seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 {
            return Err(Error::Config("heads must be at least 1".into()));
        }
        if !(self.lambda_rec >= 0.0 && self.lambda_rec.is_finite()) {
            return Err(Error::Config(format!(
                "lambda_rec must be finite and >= 0, got {}",
                self.lambda_rec
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.adam.lr >= 0.0 && self.adam.lr.is_finite()) {
            return Err(Error::Config(format!(
                "invalid learning rate {}",
                self.adam.lr
            )));
        }
        Ok(())
    }

    fn generator(&self, resolution: usize) -> GeneratorConfig {
        GeneratorConfig {
            heads: self.heads,
            base_channels: self.base_channels,
            resolution,
        }
    }

    fn discriminator(&self, resolution: usize) -> DiscriminatorConfig {
        DiscriminatorConfig {
            base_channels: self.base_channels,
            resolution,
        }
    }
}

/// Frames and targets in the unit domain, ready for batching.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainData {
    resolution: usize,
    inputs: Vec<Vec<f32>>,
    targets: Vec<Vec<f32>>,
}

impl TrainData {
    pub fn from_pairs(pairs: &[FrameMotionPair]) -> Result<Self> {
        let first = pairs
            .first()
            .ok_or_else(|| Error::Config("dataset has no pairs".into()))?;
        let (w, h) = first.input.dims();
        if w != h {
            return Err(Error::Shape(format!("frames must be square, got {w}x{h}")));
        }
        let mut inputs = Vec::with_capacity(pairs.len());
        let mut targets = Vec::with_capacity(pairs.len());
        for p in pairs {
            if p.input.dims() != (w, h) || p.target.dims() != (w, h) {
                return Err(Error::Shape(format!(
                    "pair {}@{} is not {w}x{h}",
                    p.meta.source_id, p.meta.start_index
                )));
            }
            inputs.push(p.input.to_unit());
            targets.push(p.target.to_unit());
        }
        Ok(Self {
            resolution: w,
            inputs,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn targets(&self) -> &[Vec<f32>] {
        &self.targets
    }

    /// `[B, 1, R, R]` tensors of inputs and targets for `indices`.
    pub fn batch(&self, indices: &[usize]) -> (Tensor, Tensor) {
        let r = self.resolution;
        let gather = |src: &[Vec<f32>]| {
            let data: Vec<f32> = indices
                .iter()
                .flat_map(|&i| src[i].iter().copied())
                .collect();
            Tensor::new(vec![indices.len(), 1, r, r], data).expect("sized by resolution")
        };
        (gather(&self.inputs), gather(&self.targets))
    }
}

/// Averages over one epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Optimizer steps taken so far, counted over the whole run.
    pub step: u64,
    pub d_loss: f64,
    /// Sum over heads of the generator adversarial loss.
    pub g_adv: f64,
    pub g_rec: f64,
    /// How often each head was the closest to the target.
    pub argmin_histogram: Vec<usize>,
}

pub const METRICS_HEADER: &str = "epoch,step,d_loss,g_adv,g_rec,argmin_head_histogram";

impl EpochMetrics {
    pub fn csv_row(&self) -> String {
        let hist: Vec<String> = self
            .argmin_histogram
            .iter()
            .map(|c| c.to_string())
            .collect();
        format!(
            "{},{},{:?},{:?},{:?},{}",
            self.epoch,
            self.step,
            self.d_loss,
            self.g_adv,
            self.g_rec,
            hist.join("|")
        )
    }
}

pub fn metrics_csv(rows: &[EpochMetrics]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.csv_row());
    }
    out
}

/// Generator, discriminator and both optimizers.
#[derive(Clone, Debug)]
pub struct Trainer {
    config: TrainConfig,
    generator: Generator,
    discriminator: Discriminator,
    opt_g: Adam,
    opt_d: Adam,
    epoch: usize,
}

impl Trainer {
    pub fn new(config: TrainConfig, resolution: usize) -> Result<Self> {
        config.validate()?;
        let generator = Generator::new(
            config.generator(resolution),
            &mut stream_with(config.seed, Stream::Init, 0),
        )?;
        let discriminator = Discriminator::new(
            config.discriminator(resolution),
            &mut stream_with(config.seed, Stream::Init, 1),
        )?;
        let opt_g = Adam::new(config.adam, generator.params().tensors());
        let opt_d = Adam::new(config.adam, discriminator.params().tensors());
        Ok(Self {
            config,
            generator,
            discriminator,
            opt_g,
            opt_d,
            epoch: 0,
        })
    }

    /// Changes the epoch target stored with the config, e.g. when resuming
    /// towards a longer run.
    pub fn set_epochs(&mut self, epochs: usize) {
        self.config.epochs = epochs;
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn generator(&self) -> &Generator {
        &self.generator
    }

    pub fn discriminator(&self) -> &Discriminator {
        &self.discriminator
    }

    /// Completed epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn step(&self) -> u64 {
        self.opt_g.step_count()
    }

    pub fn resolution(&self) -> usize {
        self.generator.resolution()
    }

    pub fn model(&self) -> Model {
        Model {
            generator: self.generator.clone(),
            discriminator: self.discriminator.clone(),
        }
    }

    /// One pass over `data` in a per-epoch shuffled order.
    pub fn run_epoch(&mut self, data: &TrainData) -> Result<EpochMetrics> {
        if data.is_empty() {
            return Err(Error::Config("dataset has no pairs".into()));
        }
        if data.resolution() != self.resolution() {
            return Err(Error::Shape(format!(
                "data is {0}x{0}, model expects {1}x{1}",
                data.resolution(),
                self.resolution()
            )));
        }
        let epoch = self.epoch + 1;
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut stream_with(
            self.config.seed,
            Stream::Shuffle,
            epoch as u64,
        ));

        let mut totals = [0.0f64; 3];
        let mut histogram = vec![0usize; self.config.heads];
        let mut batches = 0usize;
        for chunk in order.chunks(self.config.batch_size) {
            let (x, y) = data.batch(chunk);
            let (d, g_adv, g_rec) = self.train_step(x, y, &mut histogram)?;
            totals[0] += d;
            totals[1] += g_adv;
            totals[2] += g_rec;
            batches += 1;
        }
        self.epoch = epoch;
        let n = batches as f64;
        Ok(EpochMetrics {
            epoch,
            step: self.step(),
            d_loss: totals[0] / n,
            g_adv: totals[1] / n,
            g_rec: totals[2] / n,
            argmin_histogram: histogram,
        })
    }

    fn train_step(
        &mut self,
        x: Tensor,
        y: Tensor,
        histogram: &mut [usize],
    ) -> Result<(f64, f64, f64)> {
        let tape = Tape::new();
        let gp = self.generator.params().bind(&tape);
        let dp = self.discriminator.params().bind(&tape);
        let frame = tape.leaf(x);
        let truth = tape.leaf(y);
        let fakes = self.generator.forward(&gp, frame)?;
        let adv = adversarial_losses(&self.discriminator, &dp, frame, truth, fakes)?;
        let rec = multimodal_reconstruction(fakes, truth)?;
        let g_adv = sum_vars(&adv.g_adv)?;
        let g_total = g_adv.add(rec.loss.scale(self.config.lambda_rec as f32))?;

        let (d_val, adv_val, rec_val) = (
            adv.d_loss.item() as f64,
            g_adv.item() as f64,
            rec.loss.item() as f64,
        );
        if !(d_val.is_finite() && adv_val.is_finite() && rec_val.is_finite()) {
            return Err(Error::Diverged(format!(
                "non-finite loss at step {} (d={d_val}, g_adv={adv_val}, g_rec={rec_val})",
                self.step() + 1
            )));
        }

        let d_grads = tape.backward(adv.d_loss)?;
        let d_grads: Vec<Tensor> = dp.iter().map(|&p| d_grads.wrt(p)).collect();
        let g_grads = tape.backward(g_total)?;
        let g_grads: Vec<Tensor> = gp.iter().map(|&p| g_grads.wrt(p)).collect();
        // both updates use gradients from the same pre-update parameters
        self.opt_d
            .step(self.discriminator.params_mut().tensors_mut(), &d_grads)?;
        self.opt_g
            .step(self.generator.params_mut().tensors_mut(), &g_grads)?;
        for k in rec.argmin {
            histogram[k] += 1;
        }
        Ok((d_val, adv_val, rec_val))
    }

    /// Runs epochs until `total_epochs` have completed, calling `after_epoch`
    /// after each one.
    pub fn train_until(
        &mut self,
        data: &TrainData,
        total_epochs: usize,
        mut after_epoch: impl FnMut(&Trainer, &EpochMetrics) -> Result<()>,
    ) -> Result<Vec<EpochMetrics>> {
        let mut out = Vec::new();
        while self.epoch < total_epochs {
            let m = self.run_epoch(data)?;
            log::info!(
                "epoch {} step {} d_loss {:.4} g_adv {:.4} g_rec {:.4} heads {:?}",
                m.epoch,
                m.step,
                m.d_loss,
                m.g_adv,
                m.g_rec,
                m.argmin_histogram
            );
            after_epoch(self, &m)?;
            out.push(m);
        }
        Ok(out)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new();
        let json = serde_json::to_vec(&self.config).expect("config serializes");
        ck.push("meta.config", bytes_tensor(&json));
        ck.push("meta.resolution", Tensor::scalar(self.resolution() as f32));
        ck.push("meta.epoch", Tensor::scalar(self.epoch as f32));
        push_params(&mut ck, "gen.", self.generator.params());
        push_params(&mut ck, "disc.", self.discriminator.params());
        push_adam(
            &mut ck,
            "adam_g.",
            &self.opt_g,
            self.generator.params().names(),
        );
        push_adam(
            &mut ck,
            "adam_d.",
            &self.opt_d,
            self.discriminator.params().names(),
        );
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let config: TrainConfig = serde_json::from_slice(&tensor_bytes(meta(ck, "meta.config")?)?)
            .map_err(|e| Error::Integrity(format!("checkpoint config: {e}")))?;
        let resolution = meta_usize(ck, "meta.resolution")?;
        let epoch = meta_usize(ck, "meta.epoch")?;
        let mut t = Self::new(config, resolution)?;
        t.generator.params_mut().load(&ck.with_prefix("gen."))?;
        t.discriminator
            .params_mut()
            .load(&ck.with_prefix("disc."))?;
        t.opt_g = load_adam(
            ck,
            "adam_g.",
            config.adam,
            t.generator.params().names(),
            t.generator.params().tensors(),
        )?;
        t.opt_d = load_adam(
            ck,
            "adam_d.",
            config.adam,
            t.discriminator.params().names(),
            t.discriminator.params().tensors(),
        )?;
        t.epoch = epoch;
        Ok(t)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }
}

fn push_params(ck: &mut Checkpoint, prefix: &str, params: &super::ParamSet) {
    for (n, t) in params.names().iter().zip(params.tensors()) {
        ck.push(format!("{prefix}{n}"), t.clone());
    }
}

fn push_adam(ck: &mut Checkpoint, prefix: &str, opt: &Adam, names: &[String]) {
    ck.push(format!("{prefix}step"), u64_tensor(opt.step_count()));
    let (m, v) = opt.moments();
    for (n, t) in names.iter().zip(m) {
        ck.push(format!("{prefix}m.{n}"), t.clone());
    }
    for (n, t) in names.iter().zip(v) {
        ck.push(format!("{prefix}v.{n}"), t.clone());
    }
}

fn load_adam(
    ck: &Checkpoint,
    prefix: &str,
    config: AdamConfig,
    names: &[String],
    params: &[Tensor],
) -> Result<Adam> {
    let step = tensor_u64(meta(ck, &format!("{prefix}step"))?)?;
    let moments = |kind: &str| -> Result<Vec<Tensor>> {
        names
            .iter()
            .zip(params)
            .map(|(n, p)| {
                let t = meta(ck, &format!("{prefix}{kind}.{n}"))?;
                if t.shape() != p.shape() {
                    return Err(Error::Shape(format!(
                        "{prefix}{kind}.{n}: {:?} vs {:?}",
                        t.shape(),
                        p.shape()
                    )));
                }
                Ok(t.clone())
            })
            .collect()
    };
    let first = moments("m")?;
    let second = moments("v")?;
    Adam::from_state(config, step, first, second)
}

fn meta<'a>(ck: &'a Checkpoint, name: &str) -> Result<&'a Tensor> {
    ck.get(name)
        .ok_or_else(|| Error::Integrity(format!("checkpoint lacks {name}")))
}

fn meta_usize(ck: &Checkpoint, name: &str) -> Result<usize> {
    let t = meta(ck, name)?;
    let v = t.data().first().copied().unwrap_or(f32::NAN);
    if t.numel() != 1 || !(v >= 0.0) || v.fract() != 0.0 {
        return Err(Error::Integrity(format!("{name} is not a count")));
    }
    Ok(v as usize)
}

/// Bytes stored one per element; exact in `f32`.
fn bytes_tensor(bytes: &[u8]) -> Tensor {
    Tensor::new(vec![bytes.len()], bytes.iter().map(|&b| b as f32).collect()).expect("1-d")
}

fn tensor_bytes(t: &Tensor) -> Result<Vec<u8>> {
    t.data()
        .iter()
        .map(|&v| {
            if (0.0..=255.0).contains(&v) && v.fract() == 0.0 {
                Ok(v as u8)
            } else {
                Err(Error::Integrity(format!("byte tensor holds {v}")))
            }
        })
        .collect()
}

/// A `u64` as four 16-bit limbs, little end first.
fn u64_tensor(v: u64) -> Tensor {
    let limbs = (0..4).map(|i| ((v >> (16 * i)) & 0xFFFF) as f32).collect();
    Tensor::new(vec![4], limbs).expect("4 limbs")
}

fn tensor_u64(t: &Tensor) -> Result<u64> {
    if t.numel() != 4 {
        return Err(Error::Integrity("counter tensor must have 4 limbs".into()));
    }
    t.data().iter().enumerate().try_fold(0u64, |acc, (i, &l)| {
        if !(0.0..65536.0).contains(&l) || l.fract() != 0.0 {
            return Err(Error::Integrity(format!("counter limb {l} out of range")));
        }
        Ok(acc | ((l as u64) << (16 * i)))
    })
}

/// Trains from scratch for `config.epochs` epochs, saving a checkpoint to
/// `checkpoint` (when given) after each good epoch.
pub fn train(
    pairs: &[FrameMotionPair],
    config: TrainConfig,
    checkpoint: Option<&Path>,
) -> Result<(Trainer, Vec<EpochMetrics>)> {
    let data = TrainData::from_pairs(pairs)?;
    let mut trainer = Trainer::new(config, data.resolution())?;
    let metrics = trainer.train_until(&data, config.epochs, |t, _| match checkpoint {
        Some(p) => t.save(p),
        None => Ok(()),
    })?;
    Ok((trainer, metrics))
}

/// Generator and discriminator for inference.
#[derive(Clone, Debug)]
pub struct Model {
    pub generator: Generator,
    pub discriminator: Discriminator,
}

impl Model {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(Trainer::load(path)?.model())
    }

    pub fn resolution(&self) -> usize {
        self.generator.resolution()
    }

    pub fn heads(&self) -> usize {
        self.generator.heads()
    }
}
