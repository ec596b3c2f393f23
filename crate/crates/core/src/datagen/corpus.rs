//! Corpus descriptions: explicit sprite worlds and seeded random batches of them.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::pairs::{build_pairs, segment_video, FrameMotionPair};
use super::sprite::{render_sprite_world, Shape, Sprite, SpriteWorldSpec};
use crate::error::{Error, Result};
use crate::motion::TemplateConfig;
use crate::rng::{stream, stream_with, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Up,
    Down,
    Left,
    Right,
}

impl Direction {
    pub fn unit(self) -> (i64, i64) {
        match self {
            Direction::Up => (0, -1),
            Direction::Down => (0, 1),
            Direction::Left => (-1, 0),
            Direction::Right => (1, 0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoEntry {
    #[serde(default)]
    pub id: Option<String>,
    #[serde(flatten)]
    pub world: SpriteWorldSpec,
}

/// Single-sprite videos with a random start and a direction drawn uniformly
/// from `directions`. Starts are chosen so the sprite never touches a wall.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomCorpus {
    pub count: usize,
    #[serde(default = "default_res")]
    pub width: usize,
    #[serde(default = "default_res")]
    pub height: usize,
    pub frame_count: usize,
    #[serde(default = "default_sprite")]
    pub sprite_size: usize,
    #[serde(default = "default_speed")]
    pub speed: i64,
    #[serde(default = "default_background")]
    pub background: u8,
    #[serde(default = "default_intensity")]
    pub intensity: u8,
    #[serde(default)]
    pub noise: u8,
    #[serde(default = "default_directions")]
    pub directions: Vec<Direction>,
}

fn default_res() -> usize {
    64
}
fn default_sprite() -> usize {
    6
}
fn default_speed() -> i64 {
    2
}
fn default_background() -> u8 {
    40
}
fn default_intensity() -> u8 {
    200
}
fn default_directions() -> Vec<Direction> {
    vec![Direction::Right]
}

impl RandomCorpus {
    pub fn new(count: usize, frame_count: usize, directions: Vec<Direction>) -> Self {
        Self {
            count,
            width: default_res(),
            height: default_res(),
            frame_count,
            sprite_size: default_sprite(),
            speed: default_speed(),
            background: default_background(),
            intensity: default_intensity(),
            noise: 0,
            directions,
        }
    }

    pub fn expand(&self, seed: u64) -> Result<Vec<VideoEntry>> {
        if self.directions.is_empty() {
            return Err(Error::Spec(
                "random corpus needs at least one direction".into(),
            ));
        }
        let travel = self.speed.unsigned_abs() as usize * self.frame_count.saturating_sub(1);
        let size = self.sprite_size;
        if size == 0 || size + travel > self.width.min(self.height) {
            return Err(Error::Spec(format!(
                "a {size}px sprite travelling {travel}px does not fit a {}x{} grid",
                self.width, self.height
            )));
        }
        let mut rng = stream(seed, Stream::Dataset);
        (0..self.count)
            .map(|i| {
                let dir = *self.directions.choose(&mut rng).expect("non-empty");
                let (ux, uy) = dir.unit();
                let range = |extent: usize, u: i64| -> (i64, i64) {
                    let max = (extent - size) as i64;
                    match u {
                        1 => (0, max - travel as i64),
                        -1 => (travel as i64, max),
                        _ => (0, max),
                    }
                };
                let (x0, x1) = range(self.width, ux);
                let (y0, y1) = range(self.height, uy);
                let sprite = Sprite {
                    shape: Shape::Rect {
                        width: size,
                        height: size,
                    },
                    x: rng.gen_range(x0..=x1),
                    y: rng.gen_range(y0..=y1),
                    vx: ux * self.speed,
                    vy: uy * self.speed,
                    intensity: self.intensity,
                };
                Ok(VideoEntry {
                    id: Some(format!("r{i:05}")),
                    world: SpriteWorldSpec {
                        width: self.width,
                        height: self.height,
                        frame_count: self.frame_count,
                        background: self.background,
                        noise: self.noise,
                        sprites: vec![sprite],
                    },
                })
            })
            .collect()
    }
}

/// The `make-dataset --spec` file format.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    #[serde(default)]
    pub videos: Vec<VideoEntry>,
    #[serde(default)]
    pub random: Option<RandomCorpus>,
}

/// A rendered source video.
#[derive(Clone, Debug, PartialEq)]
pub struct Video {
    pub id: String,
    pub frames: Vec<crate::image::GrayImage>,
}

impl CorpusSpec {
    /// All videos described by the spec, explicit ones first.
    pub fn entries(&self, seed: u64) -> Result<Vec<VideoEntry>> {
        let mut all: Vec<VideoEntry> = self
            .videos
            .iter()
            .enumerate()
            .map(|(i, v)| VideoEntry {
                id: Some(v.id.clone().unwrap_or_else(|| format!("video{i:04}"))),
                world: v.world.clone(),
            })
            .collect();
        if let Some(random) = &self.random {
            all.extend(random.expand(seed)?);
        }
        Ok(all)
    }

    pub fn render(&self, seed: u64) -> Result<Vec<Video>> {
        self.entries(seed)?
            .into_iter()
            .enumerate()
            .map(|(i, entry)| {
                Ok(Video {
                    id: entry.id.expect("ids assigned in entries()"),
                    frames: render_sprite_world(
                        &entry.world,
                        stream_with(seed, Stream::Render, i as u64).gen(),
                    )?,
                })
            })
            .collect()
    }
}

/// Segments each video and builds its pairs, preserving video order.
pub fn pairs_from_videos(
    videos: &[Video],
    n: usize,
    cfg: &TemplateConfig,
) -> Result<Vec<FrameMotionPair>> {
    let mut out = Vec::new();
    for video in videos {
        let clips = segment_video(&video.frames, n, &video.id)?;
        out.extend(build_pairs(&clips, cfg));
    }
    Ok(out)
}

/// Convenience: render a random corpus straight into pairs (one clip per video
/// when `frame_count == n`).
pub fn synthesize_pairs(
    corpus: &RandomCorpus,
    n: usize,
    cfg: &TemplateConfig,
    seed: u64,
) -> Result<Vec<FrameMotionPair>> {
    let spec = CorpusSpec {
        videos: Vec::new(),
        random: Some(corpus.clone()),
    };
    pairs_from_videos(&spec.render(seed)?, n, cfg)
}
