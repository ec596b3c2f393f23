//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use log::info;
use serde::Serialize;

use mogan_core::controller::{
    random_returns, returns_csv, reward, table_csv, train_controller, trajectory_csv,
    ControllerConfig, Distance, RewardConfig,
};
use mogan_core::datagen::{
    pairs_from_videos, read_dataset, write_dataset, CorpusSpec, DatasetHeader, Video,
};
use mogan_core::image::is_image_path;
use mogan_core::model::{generate, panel, Model, TrainConfig, TrainData, Trainer};
use mogan_core::motion::{compute_template, normalize_template};
use mogan_core::selfcheck;
use mogan_core::tensor::AdamConfig;
use mogan_core::{Error, GrayImage, TemplateConfig};

use crate::header::RunHeader;

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const METRICS_FILE: &str = "metrics.csv";

/// Episodes averaged at each end of a learning curve.
pub const WINDOW: usize = 20;

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

/// Image files in a directory, sorted by name.
fn read_frames(dir: &Path) -> Result<Vec<GrayImage>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| Error::Io {
                path: dir.to_path_buf(),
                source: e,
            })?
            .path();
        if path.is_file() && is_image_path(&path) {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths
        .iter()
        .map(GrayImage::read)
        .collect::<mogan_core::Result<_>>()?)
}

fn source_id(dir: &Path) -> String {
    let name: String = dir
        .file_name()
        .and_then(|s| s.to_str())
        .unwrap_or("frames")
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect();
    if name.is_empty() {
        "frames".into()
    } else {
        name
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MakeDatasetArgs {
    pub spec: Option<CorpusSpec>,
    pub frames: Option<PathBuf>,
    pub n: usize,
    pub threshold: u8,
    pub delta: f32,
    pub seed: u64,
}

pub fn make_dataset(args: &MakeDatasetArgs, out: &Path) -> Result<usize> {
    let cfg = TemplateConfig::new(args.threshold, args.delta)?;
    let videos = match (&args.spec, &args.frames) {
        (Some(spec), None) => spec.render(args.seed)?,
        (None, Some(dir)) => vec![Video {
            id: source_id(dir),
            frames: read_frames(dir)?,
        }],
        _ => unreachable!("clap enforces exactly one source"),
    };
    let header = RunHeader::new("make-dataset", Some(args.seed), args);
    println!("{}", header.summary());
    let pairs = pairs_from_videos(&videos, args.n, &cfg)?;
    create_dir(out)?;
    write_dataset(out, &DatasetHeader::new(args.n, &cfg), &pairs)?;
    header.write(out)?;
    println!("{} pairs", pairs.len());
    Ok(pairs.len())
}

#[derive(Clone, Debug)]
pub struct TrainArgs {
    pub data: PathBuf,
    pub config: TrainConfig,
    pub resume: bool,
}

pub fn train_command(args: &TrainArgs, out: &Path) -> Result<()> {
    let dataset = read_dataset(&args.data)?;
    let data = TrainData::from_pairs(&dataset.pairs)?;
    create_dir(out)?;
    let ckpt = out.join(CHECKPOINT_FILE);
    let metrics_path = out.join(METRICS_FILE);
    let (mut trainer, mut rows) = if args.resume {
        let trainer = Trainer::load(&ckpt)?;
        let done = trainer.epoch();
        let previous = fs::read_to_string(&metrics_path).map_err(|e| Error::Io {
            path: metrics_path.clone(),
            source: e,
        })?;
        let rows = previous
            .lines()
            .skip(1)
            .filter(|l| {
                l.split(',')
                    .next()
                    .and_then(|e| e.parse::<usize>().ok())
                    .is_some_and(|e| e <= done)
            })
            .map(str::to_string)
            .collect::<Vec<_>>();
        info!("resuming from epoch {done}");
        (trainer, rows)
    } else {
        (Trainer::new(args.config, data.resolution())?, Vec::new())
    };
    trainer.set_epochs(args.config.epochs);
    let config = *trainer.config();
    let header = RunHeader::new("train", Some(config.seed), &config);
    println!("{}", header.summary());
    header.write(out)?;

    let write_metrics = |rows: &[String]| -> mogan_core::Result<()> {
        let mut text = String::from(mogan_core::model::METRICS_HEADER);
        text.push('\n');
        for r in rows {
            text.push_str(r);
            text.push('\n');
        }
        fs::write(&metrics_path, text).map_err(|e| Error::Io {
            path: metrics_path.clone(),
            source: e,
        })
    };
    trainer.save(&ckpt)?;
    write_metrics(&rows)?;
    trainer.train_until(&data, config.epochs, |t, m| {
        t.save(&ckpt)?;
        rows.push(m.csv_row());
        write_metrics(&rows)?;
        println!("{}", m.csv_row());
        Ok(())
    })?;
    println!(
        "checkpoint {} after epoch {}",
        ckpt.display(),
        trainer.epoch()
    );
    Ok(())
}

#[derive(Clone, Copy, Debug, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ImageFormat {
    Pgm,
    Png,
}

impl ImageFormat {
    fn ext(self) -> &'static str {
        match self {
            ImageFormat::Pgm => "pgm",
            ImageFormat::Png => "png",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GenerateArgs {
    pub ckpt: PathBuf,
    pub input: PathBuf,
    pub format: ImageFormat,
}

pub fn generate_command(args: &GenerateArgs, out: &Path) -> Result<()> {
    let model = Model::load(&args.ckpt)?;
    let frame = GrayImage::read(&args.input)?;
    let header = RunHeader::new("generate", None, args);
    println!("{}", header.summary());
    let templates = generate(&model.generator, &frame)?;
    create_dir(out)?;
    for (k, t) in templates.iter().enumerate() {
        let path = out.join(format!("template_{k}.{}", args.format.ext()));
        t.write(&path)?;
        println!("{}", path.display());
    }
    let path = out.join(format!("panel.{}", args.format.ext()));
    panel(&frame, &templates)?.write(&path)?;
    println!("{}", path.display());
    header.write(out)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, Serialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DistanceArg {
    Feature,
    Template,
}

impl From<DistanceArg> for Distance {
    fn from(d: DistanceArg) -> Self {
        match d {
            DistanceArg::Feature => Distance::Feature,
            DistanceArg::Template => Distance::Template,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ScoreArgs {
    pub ckpt: PathBuf,
    pub frames: PathBuf,
    pub goal: PathBuf,
    pub threshold: u8,
    pub delta: Option<f32>,
    pub reward: RewardConfig,
}

/// The reward of the frames' template against the goal, with the last frame
/// as the observation.
pub fn score_command(args: &ScoreArgs, out: Option<&Path>) -> Result<()> {
    let model = Model::load(&args.ckpt)?;
    let frames = read_frames(&args.frames)?;
    if frames.len() < 2 {
        return Err(Error::InsufficientInput(format!(
            "scoring needs at least 2 frames, found {} in {}",
            frames.len(),
            args.frames.display()
        ))
        .into());
    }
    let goal = GrayImage::read(&args.goal)?;
    let delta = args.delta.unwrap_or((frames.len() - 1) as f32);
    let cfg = TemplateConfig::new(args.threshold, delta)?;
    let header = RunHeader::new("score", None, args);
    println!("{}", header.summary());
    let progress = normalize_template(&compute_template(&frames, &cfg)?)?;
    let obs = frames.last().expect("at least two frames");
    let report = reward(&model.discriminator, obs, &goal, &progress, &args.reward)?;
    println!("distance {}", report.distance);
    println!("realism {}", report.realism);
    println!("reward {}", report.reward);
    if let Some(dir) = out {
        header.write(dir)?;
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        write_file(&dir.join("score.json"), text + "\n")?;
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct RlArgs {
    pub ckpt: PathBuf,
    pub episodes: usize,
    pub seed: u64,
    pub controller: ControllerConfig,
    pub export_frames: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RlSummary {
    pub episodes: usize,
    pub first_mean: f64,
    pub last_mean: f64,
    /// Uniform random policy on the same episode seeds as `last_mean`.
    pub random_last_mean: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn rl_command(args: &RlArgs, out: &Path) -> Result<RlSummary> {
    let model = Model::load(&args.ckpt)?;
    let header = RunHeader::new("rl-run", Some(args.seed), args);
    println!("{}", header.summary());
    let run = train_controller(&model, &args.controller, args.episodes, args.seed)?;
    let n = run.returns.len();
    let w = WINDOW.min(n);
    let tail = n - w..n;
    let random = random_returns(&model, &args.controller, args.seed, tail.clone())?;
    let summary = RlSummary {
        episodes: n,
        first_mean: if w > 0 { mean(&run.returns[..w]) } else { 0.0 },
        last_mean: if w > 0 { mean(&run.returns[tail]) } else { 0.0 },
        random_last_mean: if w > 0 { mean(&random) } else { 0.0 },
    };

    create_dir(out)?;
    header.write(out)?;
    write_file(
        &out.join("returns.csv"),
        returns_csv(&run.returns, &run.epsilons),
    )?;
    write_file(&out.join("qtable.csv"), table_csv(&run.table))?;
    if let Some(last) = &run.last {
        write_file(&out.join("trajectory.csv"), trajectory_csv(&last.steps))?;
        if args.export_frames {
            let dir = out.join("frames");
            create_dir(&dir)?;
            for (i, f) in last.frames.iter().enumerate() {
                f.write_pgm(dir.join(format!("frame_{i:04}.pgm")))?;
            }
        }
    }
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_file(&out.join("summary.json"), text + "\n")?;
    println!(
        "episodes {} first{w} {:.6} last{w} {:.6} random-last{w} {:.6}",
        summary.episodes, summary.first_mean, summary.last_mean, summary.random_last_mean
    );
    Ok(summary)
}

#[derive(Clone, Debug, Serialize)]
pub struct SelfcheckArgs {
    pub seed: u64,
    pub cases: usize,
}

/// Prints one line per suite; returns whether all passed.
pub fn selfcheck_command(args: &SelfcheckArgs) -> Result<bool> {
    let header = RunHeader::new("selfcheck", Some(args.seed), args);
    println!("{}", header.summary());
    let results = vec![
        selfcheck::template_suite(args.seed, args.cases)?,
        selfcheck::gradient_suite(args.seed)?,
        selfcheck::qlearning_suite()?,
    ];
    for r in &results {
        println!("{r}");
    }
    Ok(results.iter().all(|r| r.passed))
}

pub fn default_adam(lr: f64) -> AdamConfig {
    AdamConfig {
        lr,
        ..AdamConfig::default()
    }
}
