//! A single square sprite on a flat background, moved by discrete actions.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::datagen::{rasterize, step_clipped, Shape};
use crate::error::{Error, Result};
use crate::image::GrayImage;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl Action {
    pub const ALL: [Action; 5] = [
        Action::Up,
        Action::Down,
        Action::Left,
        Action::Right,
        Action::Stay,
    ];
    pub const COUNT: usize = 5;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Up => "up",
            Action::Down => "down",
            Action::Left => "left",
            Action::Right => "right",
            Action::Stay => "stay",
        }
    }

    pub fn unit(self) -> (i64, i64) {
        match self {
            Action::Up => (0, -1),
            Action::Down => (0, 1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
            Action::Stay => (0, 0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub size: usize,
    pub sprite_size: usize,
    pub speed: i64,
    pub background: u8,
    pub intensity: u8,
    pub start: (i64, i64),
    /// Frames kept in the buffer; also the goal refresh period.
    pub n: usize,
    pub horizon: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        let n = 5;
        Self {
            size: 64,
            sprite_size: 6,
            speed: 2,
            background: 40,
            intensity: 200,
            start: (8, 29),
            n,
            horizon: 4 * n,
        }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sprite_size == 0 || self.sprite_size > self.size {
            return Err(Error::Config(format!(
                "sprite of {} px does not fit a {} px grid",
                self.sprite_size, self.size
            )));
        }
        let max = (self.size - self.sprite_size) as i64;
        let (x, y) = self.start;
        if !(0..=max).contains(&x) || !(0..=max).contains(&y) {
            return Err(Error::Config(format!(
                "start {:?} is off the grid",
                self.start
            )));
        }
        if self.n < 2 {
            return Err(Error::Config("frame buffer needs n >= 2".into()));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be positive".into()));
        }
        Ok(())
    }

    pub fn shape(&self) -> Shape {
        Shape::Rect {
            width: self.sprite_size,
            height: self.sprite_size,
        }
    }

    pub fn render(&self, pos: (i64, i64)) -> GrayImage {
        rasterize(
            self.size,
            self.size,
            self.background,
            &[(self.shape(), pos, self.intensity)],
        )
    }
}

/// Result of [`GridEnv::step`].
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub observation: GrayImage,
    pub done: bool,
}

#[derive(Clone, Debug)]
pub struct GridEnv {
    config: GridConfig,
    position: (i64, i64),
    step: usize,
    frames: VecDeque<GrayImage>,
}

impl GridEnv {
    pub fn new(config: GridConfig) -> Result<Self> {
        config.validate()?;
        let mut env = Self {
            config,
            position: config.start,
            step: 0,
            frames: VecDeque::with_capacity(config.n),
        };
        env.reset();
        Ok(env)
    }

    /// Back to the start position with only the first frame buffered.
    pub fn reset(&mut self) -> GrayImage {
        self.position = self.config.start;
        self.step = 0;
        self.frames.clear();
        let obs = self.config.render(self.position);
        self.frames.push_back(obs.clone());
        obs
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    pub fn position(&self) -> (i64, i64) {
        self.position
    }

    /// Steps taken in this episode.
    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn done(&self) -> bool {
        self.step >= self.config.horizon
    }

    pub fn observation(&self) -> &GrayImage {
        self.frames.back().expect("buffer never empty")
    }

    /// The last `n` frames, oldest first.
    pub fn frames(&self) -> Vec<GrayImage> {
        self.frames.iter().cloned().collect()
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome> {
        if self.done() {
            return Err(Error::Episode(format!(
                "step after episode end (horizon {})",
                self.config.horizon
            )));
        }
        let (ux, uy) = action.unit();
        let c = &self.config;
        self.position = step_clipped(
            self.position,
            (ux * c.speed, uy * c.speed),
            c.shape(),
            c.size,
            c.size,
        );
        self.step += 1;
        let obs = self.config.render(self.position);
        if self.frames.len() == self.config.n {
            self.frames.pop_front();
        }
        self.frames.push_back(obs.clone());
        Ok(StepOutcome {
            observation: obs,
            done: self.done(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stay_repeats_the_frame() {
        let mut env = GridEnv::new(GridConfig::default()).unwrap();
        let first = env.observation().clone();
        let out = env.step(Action::Stay).unwrap();
        assert_eq!(out.observation, first);
        assert_eq!(env.frames().len(), 2);
    }

    #[test]
    fn wall_blocks_movement() {
        let cfg = GridConfig {
            start: (58, 10),
            ..GridConfig::default()
        };
        let mut env = GridEnv::new(cfg).unwrap();
        env.step(Action::Right).unwrap();
        assert_eq!(env.position(), (58, 10));
    }

    #[test]
    fn buffer_is_bounded_and_episode_ends() {
        let mut env = GridEnv::new(GridConfig::default()).unwrap();
        for i in 0..20 {
            let out = env.step(Action::ALL[i % 5]).unwrap();
            assert!(env.frames().len() <= 5);
            assert_eq!(out.done, i == 19);
        }
        assert!(matches!(env.step(Action::Stay), Err(Error::Episode(_))));
        env.reset();
        assert_eq!(env.step_index(), 0);
        assert_eq!(env.frames().len(), 1);
    }
}
