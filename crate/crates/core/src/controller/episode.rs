//! Episodes, epsilon-greedy control and controller training.

use std::fmt::Write as _;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::env::{Action, GridConfig, GridEnv};
use super::goal::{compute_progress, refresh_goal, Goal};
use super::qtable::QTable;
use super::reward::{reward, RewardConfig};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::model::Model;
use crate::motion::TemplateConfig;
use crate::rng::{stream_with, Rng, Stream};

/// Q-table key: sprite position, goal head and steps since the last refresh.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateKey {
    pub x: i64,
    pub y: i64,
    pub head: usize,
    pub phase: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub grid: GridConfig,
    pub reward: RewardConfig,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub threshold: u8,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            grid: GridConfig::default(),
            reward: RewardConfig::default(),
            alpha: 0.2,
            gamma: 0.9,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            threshold: crate::motion::DEFAULT_THRESHOLD,
        }
    }
}

impl ControllerConfig {
    pub fn template_config(&self) -> Result<TemplateConfig> {
        TemplateConfig::new(self.threshold, (self.grid.n - 1) as f32)
    }

    /// Linear decay from `epsilon_start` at the first episode to
    /// `epsilon_end` at the last.
    pub fn epsilon(&self, episode: usize, episodes: usize) -> f64 {
        if episodes <= 1 {
            return self.epsilon_end;
        }
        let frac = episode as f64 / (episodes - 1) as f64;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }

    pub fn table(&self) -> Result<QTable<StateKey>> {
        QTable::new(Action::COUNT, self.alpha, self.gamma)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    /// 1-based step number.
    pub step: usize,
    pub action: Action,
    pub reward: f64,
    /// A new goal was generated before this step's action.
    pub goal_refresh: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub ret: f64,
    pub steps: Vec<StepRecord>,
    /// Rendered observations, starting with the reset frame.
    pub frames: Vec<GrayImage>,
    pub goal_calls: usize,
}

/// How actions are chosen and whether the table learns.
pub struct Control<'a> {
    pub table: &'a mut QTable<StateKey>,
    pub epsilon: f64,
    pub learn: bool,
}

fn key(env: &GridEnv, goal: &Goal) -> StateKey {
    let (x, y) = env.position();
    StateKey {
        x,
        y,
        head: goal.head,
        phase: env.step_index() % env.config().n,
    }
}

/// Plays one episode from reset. With probability `epsilon` an action is
/// drawn uniformly from `rng`, otherwise the table's greedy action is taken.
pub fn run_episode(
    env: &mut GridEnv,
    model: &Model,
    control: Control<'_>,
    cfg: &ControllerConfig,
    rng: &mut Rng,
) -> Result<Episode> {
    let tcfg = cfg.template_config()?;
    let n = env.config().n;
    let mut obs = env.reset();
    let mut frames = vec![obs.clone()];
    let mut goal = None;
    let mut refreshed = refresh_goal(model, &obs, 0, n, &mut goal)?;
    let mut goal_calls = 1;
    let mut steps = Vec::new();
    let mut ret = 0.0;
    loop {
        let current = goal.clone().expect("goal set before acting");
        let state = key(env, &current);
        let explore = control.epsilon > 0.0 && rng.gen::<f64>() < control.epsilon;
        let a = if explore {
            rng.gen_range(0..Action::COUNT)
        } else {
            control.table.greedy(&state)
        };
        let action = Action::from_index(a).expect("index in range");
        let out = env.step(action)?;
        let progress = compute_progress(env, &tcfg)?;
        let r = reward(
            &model.discriminator,
            &out.observation,
            &current.template,
            &progress,
            &cfg.reward,
        )?
        .reward;
        if !r.is_finite() {
            return Err(Error::Diverged(format!(
                "non-finite reward at step {}",
                env.step_index()
            )));
        }
        ret += r;
        steps.push(StepRecord {
            step: env.step_index(),
            action,
            reward: r,
            goal_refresh: refreshed,
        });
        obs = out.observation;
        frames.push(obs.clone());
        if out.done {
            if control.learn {
                control.table.update(&state, a, r, None)?;
            }
            break;
        }
        refreshed = refresh_goal(model, &obs, env.step_index(), n, &mut goal)?;
        goal_calls += refreshed as usize;
        if control.learn {
            let next = key(env, goal.as_ref().expect("goal kept"));
            control.table.update(&state, a, r, Some(&next))?;
        }
    }
    Ok(Episode {
        ret,
        steps,
        frames,
        goal_calls,
    })
}

/// Per-episode results of a controller run.
#[derive(Clone, Debug)]
pub struct ControllerRun {
    pub returns: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub table: QTable<StateKey>,
    pub last: Option<Episode>,
}

/// Episode `i` draws its exploration from its own stream, so another policy
/// can be replayed on the same seeds.
pub fn episode_rng(seed: u64, episode: usize) -> Rng {
    stream_with(seed, Stream::Episode, episode as u64)
}

pub fn train_controller(
    model: &Model,
    cfg: &ControllerConfig,
    episodes: usize,
    seed: u64,
) -> Result<ControllerRun> {
    check_resolution(model, cfg)?;
    let mut env = GridEnv::new(cfg.grid)?;
    let mut table = cfg.table()?;
    let mut returns = Vec::with_capacity(episodes);
    let mut epsilons = Vec::with_capacity(episodes);
    let mut last = None;
    for i in 0..episodes {
        let epsilon = cfg.epsilon(i, episodes);
        let control = Control {
            table: &mut table,
            epsilon,
            learn: true,
        };
        let ep = run_episode(&mut env, model, control, cfg, &mut episode_rng(seed, i))?;
        log::debug!("episode {i} epsilon {epsilon:.3} return {:.4}", ep.ret);
        returns.push(ep.ret);
        epsilons.push(epsilon);
        last = Some(ep);
    }
    Ok(ControllerRun {
        returns,
        epsilons,
        table,
        last,
    })
}

/// Returns of a uniformly random policy on the given episode seeds.
pub fn random_returns(
    model: &Model,
    cfg: &ControllerConfig,
    seed: u64,
    episodes: impl IntoIterator<Item = usize>,
) -> Result<Vec<f64>> {
    check_resolution(model, cfg)?;
    let mut env = GridEnv::new(cfg.grid)?;
    let mut table = cfg.table()?;
    episodes
        .into_iter()
        .map(|i| {
            let control = Control {
                table: &mut table,
                epsilon: 1.0,
                learn: false,
            };
            Ok(run_episode(&mut env, model, control, cfg, &mut episode_rng(seed, i))?.ret)
        })
        .collect()
}

fn check_resolution(model: &Model, cfg: &ControllerConfig) -> Result<()> {
    if model.resolution() != cfg.grid.size {
        return Err(Error::Shape(format!(
            "model expects {0}x{0} frames, grid is {1}x{1}",
            model.resolution(),
            cfg.grid.size
        )));
    }
    Ok(())
}

pub fn returns_csv(returns: &[f64], epsilons: &[f64]) -> String {
    let mut out = String::from("episode,return,epsilon\n");
    for (i, (r, e)) in returns.iter().zip(epsilons).enumerate() {
        let _ = writeln!(out, "{i},{r:?},{e:?}");
    }
    out
}

pub fn trajectory_csv(steps: &[StepRecord]) -> String {
    let mut out = String::from("step,action,reward,goal_refresh_flag\n");
    for s in steps {
        let _ = writeln!(
            out,
            "{},{},{:?},{}",
            s.step,
            s.action.name(),
            s.reward,
            s.goal_refresh as u8
        );
    }
    out
}

/// One row per visited state, sorted by key.
pub fn table_csv(table: &QTable<StateKey>) -> String {
    let mut rows: Vec<_> = table.iter().collect();
    rows.sort_by_key(|(k, _)| **k);
    let mut out = String::from("x,y,head,phase");
    for a in Action::ALL {
        let _ = write!(out, ",q_{}", a.name());
    }
    out.push('\n');
    for (k, v) in rows {
        let _ = write!(out, "{},{},{},{}", k.x, k.y, k.head, k.phase);
        for q in v {
            let _ = write!(out, ",{q:?}");
        }
        out.push('\n');
    }
    out
}
