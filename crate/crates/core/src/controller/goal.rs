//! Goal refresh from the generator, and the progress template.

use crate::error::Result;
use crate::image::GrayImage;
use crate::model::{generate, realism, Model};
use crate::motion::{compute_template, normalize_template, TemplateConfig};

use super::env::GridEnv;

/// Current goal template and the head it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Goal {
    pub template: GrayImage,
    pub head: usize,
}

/// Picks the head whose template the discriminator finds most realistic
/// next to `obs`; ties go to the lowest head.
pub fn propose_goal(model: &Model, obs: &GrayImage) -> Result<Goal> {
    let mut templates = generate(&model.generator, obs)?;
    if templates.len() == 1 {
        return Ok(Goal {
            template: templates.remove(0),
            head: 0,
        });
    }
    let mut best = (0usize, f32::NEG_INFINITY);
    for (k, t) in templates.iter().enumerate() {
        let r = realism(&model.discriminator, obs, t)?;
        if r > best.1 {
            best = (k, r);
        }
    }
    Ok(Goal {
        template: templates.swap_remove(best.0),
        head: best.0,
    })
}

/// Replaces the goal exactly when `step` is a multiple of `n` (or no goal is
/// set yet). Returns whether a new goal was generated.
pub fn refresh_goal(
    model: &Model,
    obs: &GrayImage,
    step: usize,
    n: usize,
    goal: &mut Option<Goal>,
) -> Result<bool> {
    if step % n == 0 || goal.is_none() {
        *goal = Some(propose_goal(model, obs)?);
        return Ok(true);
    }
    Ok(false)
}

/// Template of the buffered frames; all zero until two frames exist.
pub fn compute_progress(env: &GridEnv, cfg: &TemplateConfig) -> Result<GrayImage> {
    let frames = env.frames();
    if frames.len() < 2 {
        let (w, h) = frames[0].dims();
        return Ok(GrayImage::zeros(w, h));
    }
    normalize_template(&compute_template(&frames, cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::{Action, GridConfig};

    #[test]
    fn progress_falls_back_to_zero() {
        let mut env = GridEnv::new(GridConfig::default()).unwrap();
        let cfg = TemplateConfig::for_clip(5);
        assert!(compute_progress(&env, &cfg)
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 0));
        env.step(Action::Stay).unwrap();
        env.step(Action::Stay).unwrap();
        assert!(compute_progress(&env, &cfg)
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 0));
        env.step(Action::Right).unwrap();
        assert!(compute_progress(&env, &cfg)
            .unwrap()
            .data()
            .iter()
            .any(|&v| v > 0));
    }
}
