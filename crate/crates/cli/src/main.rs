//! `mogan`: dataset synthesis, GAN training, template generation, scoring and
//! controller runs.

mod commands;
mod header;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use commands::{
    default_adam, generate_command, make_dataset, rl_command, score_command, selfcheck_command,
    train_command, DistanceArg, GenerateArgs, ImageFormat, MakeDatasetArgs, RlArgs, ScoreArgs,
    SelfcheckArgs, TrainArgs,
};
use mogan_core::controller::{ControllerConfig, RewardConfig};
use mogan_core::datagen::CorpusSpec;
use mogan_core::model::TrainConfig;
use mogan_core::motion::DEFAULT_THRESHOLD;
use mogan_core::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

#[derive(Parser)]
#[command(
    name = "mogan",
    version,
    about = "Motion-template GAN and goal-driven controller"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render videos or read frames and write a frame-motion dataset.
    MakeDataset(MakeDatasetCmd),
    /// Train the generator and discriminator on a dataset.
    Train(TrainCmd),
    /// Write one template per head and a side-by-side panel for one frame.
    Generate(GenerateCmd),
    /// Reward of a frame sequence's template against a goal template.
    Score(ScoreCmd),
    /// Train the tabular controller against a trained model.
    RlRun(RlCmd),
    /// Run the template, gradient and Q-learning oracle suites.
    Selfcheck(SelfcheckCmd),
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["spec", "frames"]))]
struct MakeDatasetCmd {
    /// JSON corpus spec.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Directory of .pgm/.png frames forming one video, in name order.
    #[arg(long)]
    frames: Option<PathBuf>,
    /// Frames per clip.
    #[arg(long, default_value_t = 5)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: u8,
    /// Template duration; defaults to n - 1.
    #[arg(long)]
    delta: Option<f32>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainCmd {
    #[arg(long)]
    data: PathBuf,
    /// Number of generator heads.
    #[arg(long, default_value_t = 1, conflicts_with = "resume")]
    k: usize,
    /// Total epochs, counting any already in a resumed checkpoint.
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 0, conflicts_with = "resume")]
    seed: u64,
    /// Reconstruction weight.
    #[arg(long, default_value_t = 100.0, conflicts_with = "resume")]
    lambda: f64,
    #[arg(long, default_value_t = 2e-4, conflicts_with = "resume")]
    lr: f64,
    #[arg(long, default_value_t = 4, conflicts_with = "resume")]
    batch: usize,
    #[arg(long, default_value_t = 8, conflicts_with = "resume")]
    base_channels: usize,
    /// Continue from the checkpoint and metrics already in --out.
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenerateCmd {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = ImageFormat::Pgm)]
    format: ImageFormat,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RewardArgs {
    #[arg(long, value_enum, default_value_t = DistanceArg::Feature)]
    distance: DistanceArg,
    /// Weight of the realism term.
    #[arg(long, default_value_t = RewardConfig::default().beta)]
    beta: f64,
}

impl RewardArgs {
    fn config(&self) -> RewardConfig {
        RewardConfig {
            beta: self.beta,
            distance: self.distance.into(),
        }
    }
}

#[derive(Args)]
struct ScoreCmd {
    #[arg(long)]
    ckpt: PathBuf,
    /// Directory of at least two frames, in name order.
    #[arg(long)]
    frames: PathBuf,
    #[arg(long)]
    goal: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: u8,
    /// Template duration; defaults to frame count - 1.
    #[arg(long)]
    delta: Option<f32>,
    #[command(flatten)]
    reward: RewardArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RlCmd {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long, default_value_t = 500)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    reward: RewardArgs,
    /// Also write the last episode's frames as numbered PGM files.
    #[arg(long)]
    export_frames: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SelfcheckCmd {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random motion-template cases.
    #[arg(long, default_value_t = 200)]
    cases: usize,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Io { .. } | Error::Parse { .. } | Error::Format { .. } => EXIT_IO,
                Error::Integrity(_) => EXIT_IO,
                Error::Diverged(_) | Error::Episode(_) => EXIT_NUMERIC,
                _ => EXIT_CONFIG,
            };
        }
        if cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
    }
    EXIT_CONFIG
}

/// The error chain, skipping causes already spelled out by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn read_spec(path: &PathBuf) -> Result<CorpusSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Spec(format!("{}: {e}", path.display())))
        .context("reading corpus spec")
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::MakeDataset(c) => {
            let spec = c.spec.as_ref().map(read_spec).transpose()?;
            let args = MakeDatasetArgs {
                spec,
                frames: c.frames,
                n: c.n,
                threshold: c.threshold,
                delta: c.delta.unwrap_or(c.n.saturating_sub(1) as f32),
                seed: c.seed,
            };
            make_dataset(&args, &c.out)?;
        }
        Command::Train(c) => {
            let config = TrainConfig {
                heads: c.k,
                base_channels: c.base_channels,
                lambda_rec: c.lambda,
                batch_size: c.batch,
                epochs: c.epochs,
                seed: c.seed,
                adam: default_adam(c.lr),
            };
            let args = TrainArgs {
                data: c.data,
                config,
                resume: c.resume,
            };
            train_command(&args, &c.out)?;
        }
        Command::Generate(c) => {
            let args = GenerateArgs {
                ckpt: c.ckpt,
                input: c.input,
                format: c.format,
            };
            generate_command(&args, &c.out)?;
        }
        Command::Score(c) => {
            let args = ScoreArgs {
                ckpt: c.ckpt,
                frames: c.frames,
                goal: c.goal,
                threshold: c.threshold,
                delta: c.delta,
                reward: c.reward.config(),
            };
            score_command(&args, c.out.as_deref())?;
        }
        Command::RlRun(c) => {
            let args = RlArgs {
                ckpt: c.ckpt,
                episodes: c.episodes,
                seed: c.seed,
                controller: ControllerConfig {
                    reward: c.reward.config(),
                    ..ControllerConfig::default()
                },
                export_frames: c.export_frames,
            };
            rl_command(&args, &c.out)?;
        }
        Command::Selfcheck(c) => {
            let args = SelfcheckArgs {
                seed: c.seed,
                cases: c.cases,
            };
            if !selfcheck_command(&args)? {
                return Ok(EXIT_NUMERIC);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("MOGAN_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
