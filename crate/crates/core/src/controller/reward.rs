//! Goal-matching reward.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::model::{probe, Discriminator};

/// How the goal and progress templates are compared.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Distance {
    /// Mean absolute difference of discriminator features.
    #[default]
    Feature,
    /// Mean absolute difference of the templates themselves.
    Template,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    pub beta: f64,
    pub distance: Distance,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            beta: 0.1,
            distance: Distance::Feature,
        }
    }
}

/// Reward terms for one step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RewardReport {
    /// Normalized L1 distance between goal and progress (>= 0).
    pub distance: f64,
    /// Mean patch probability that `(obs, progress)` is real.
    pub realism: f64,
    /// `-distance + beta * realism`
    pub reward: f64,
}

pub fn reward(
    disc: &Discriminator,
    obs: &GrayImage,
    goal: &GrayImage,
    progress: &GrayImage,
    cfg: &RewardConfig,
) -> Result<RewardReport> {
    if !obs.same_dims(goal) || !obs.same_dims(progress) {
        return Err(Error::Shape(format!(
            "reward inputs differ: obs {:?}, goal {:?}, progress {:?}",
            obs.dims(),
            goal.dims(),
            progress.dims()
        )));
    }
    let current = probe(disc, obs, progress)?;
    let distance = match cfg.distance {
        Distance::Feature => {
            let target = probe(disc, obs, goal)?;
            let a = target.features.data();
            let b = current.features.data();
            a.iter()
                .zip(b)
                .map(|(&x, &y)| (x as f64 - y as f64).abs())
                .sum::<f64>()
                / a.len() as f64
        }
        Distance::Template => goal.mean_abs_diff(progress)? as f64,
    };
    let realism = current.realism as f64;
    Ok(RewardReport {
        distance,
        realism,
        reward: -distance + cfg.beta * realism,
    })
}
