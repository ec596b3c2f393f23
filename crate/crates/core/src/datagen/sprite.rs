//! Synthetic sprite videos with analytically known motion.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::rng::{stream, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Rect {
        width: usize,
        height: usize,
    },
    /// Disc of the given radius; its bounding box is `2r + 1` pixels square.
    Disc {
        radius: usize,
    },
}

impl Shape {
    pub fn extent(&self) -> (usize, usize) {
        match *self {
            Shape::Rect { width, height } => (width, height),
            Shape::Disc { radius } => (2 * radius + 1, 2 * radius + 1),
        }
    }

    /// Whether the pixel at offset `(dx, dy)` inside the bounding box is covered.
    pub fn covers(&self, dx: usize, dy: usize) -> bool {
        match *self {
            Shape::Rect { width, height } => dx < width && dy < height,
            Shape::Disc { radius } => {
                let r = radius as i64;
                let ox = dx as i64 - r;
                let oy = dy as i64 - r;
                ox * ox + oy * oy <= r * r
            }
        }
    }
}

/// One moving sprite. `(x, y)` is the top-left corner of its bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sprite {
    pub shape: Shape,
    pub x: i64,
    pub y: i64,
    #[serde(default)]
    pub vx: i64,
    #[serde(default)]
    pub vy: i64,
    pub intensity: u8,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpriteWorldSpec {
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub background: u8,
    /// Uniform per-pixel noise amplitude drawn from the render seed; 0 disables it.
    #[serde(default)]
    pub noise: u8,
    pub sprites: Vec<Sprite>,
}

impl SpriteWorldSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Spec("grid dimensions must be positive".into()));
        }
        if self.frame_count < 2 {
            return Err(Error::Spec(format!(
                "frame_count must be at least 2, got {}",
                self.frame_count
            )));
        }
        for (i, s) in self.sprites.iter().enumerate() {
            let (sw, sh) = s.shape.extent();
            if sw == 0 || sh == 0 {
                return Err(Error::Spec(format!("sprite {i} has an empty shape")));
            }
            if sw > self.width || sh > self.height {
                return Err(Error::Spec(format!(
                    "sprite {i} ({sw}x{sh}) does not fit in the {}x{} grid",
                    self.width, self.height
                )));
            }
            let max_x = (self.width - sw) as i64;
            let max_y = (self.height - sh) as i64;
            if !(0..=max_x).contains(&s.x) || !(0..=max_y).contains(&s.y) {
                return Err(Error::Spec(format!(
                    "sprite {i} starts outside the grid at ({}, {})",
                    s.x, s.y
                )));
            }
        }
        Ok(())
    }

    /// Per-frame top-left positions of every sprite, with wall clipping.
    pub fn trajectories(&self) -> Result<Vec<Vec<(i64, i64)>>> {
        self.validate()?;
        let mut frames = Vec::with_capacity(self.frame_count);
        let mut pos: Vec<(i64, i64)> = self.sprites.iter().map(|s| (s.x, s.y)).collect();
        frames.push(pos.clone());
        for _ in 1..self.frame_count {
            for (p, s) in pos.iter_mut().zip(&self.sprites) {
                *p = step_clipped(*p, (s.vx, s.vy), s.shape, self.width, self.height);
            }
            frames.push(pos.clone());
        }
        Ok(frames)
    }
}

/// Moves a sprite by `velocity`, clamping so its bounding box stays in the grid.
pub fn step_clipped(
    pos: (i64, i64),
    velocity: (i64, i64),
    shape: Shape,
    width: usize,
    height: usize,
) -> (i64, i64) {
    let (sw, sh) = shape.extent();
    let x = (pos.0 + velocity.0).clamp(0, (width - sw) as i64);
    let y = (pos.1 + velocity.1).clamp(0, (height - sh) as i64);
    (x, y)
}

/// Draws sprites in order over a flat background; later sprites cover earlier ones.
pub fn rasterize(
    width: usize,
    height: usize,
    background: u8,
    sprites: &[(Shape, (i64, i64), u8)],
) -> GrayImage {
    let mut img = GrayImage::filled(width, height, background);
    for &(shape, (x0, y0), intensity) in sprites {
        let (sw, sh) = shape.extent();
        for dy in 0..sh {
            for dx in 0..sw {
                if shape.covers(dx, dy) {
                    img.set(x0 as usize + dx, y0 as usize + dy, intensity);
                }
            }
        }
    }
    img
}

/// Renders every frame of a sprite world. Output is a pure function of `(spec, seed)`.
pub fn render_sprite_world(spec: &SpriteWorldSpec, seed: u64) -> Result<Vec<GrayImage>> {
    let trajectories = spec.trajectories()?;
    let mut rng = stream(seed, Stream::Render);
    let noise = spec.noise as i32;
    Ok(trajectories
        .iter()
        .map(|positions| {
            let placed: Vec<_> = spec
                .sprites
                .iter()
                .zip(positions)
                .map(|(s, &p)| (s.shape, p, s.intensity))
                .collect();
            let mut frame = rasterize(spec.width, spec.height, spec.background, &placed);
            if noise > 0 {
                for px in frame.data_mut() {
                    let jitter = rng.gen_range(-noise..=noise);
                    *px = (*px as i32 + jitter).clamp(0, 255) as u8;
                }
            }
            frame
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dot(x: i64, y: i64, vx: i64, vy: i64) -> Sprite {
        Sprite {
            shape: Shape::Rect {
                width: 1,
                height: 1,
            },
            x,
            y,
            vx,
            vy,
            intensity: 255,
        }
    }

    fn world(sprites: Vec<Sprite>, frames: usize) -> SpriteWorldSpec {
        SpriteWorldSpec {
            width: 8,
            height: 8,
            frame_count: frames,
            background: 0,
            noise: 0,
            sprites,
        }
    }

    #[test]
    fn zero_velocity_frames_identical() {
        let frames = render_sprite_world(&world(vec![dot(3, 3, 0, 0)], 5), 1).unwrap();
        assert!(frames.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn dot_moves_one_column_per_frame() {
        let frames = render_sprite_world(&world(vec![dot(2, 4, 1, 0)], 4), 0).unwrap();
        for (t, f) in frames.iter().enumerate() {
            let lit: Vec<_> = (0..64).filter(|&i| f.data()[i] != 0).collect();
            assert_eq!(lit, vec![4 * 8 + 2 + t]);
        }
    }

    #[test]
    fn clipped_at_wall() {
        let spec = world(vec![dot(6, 0, 1, 0)], 4);
        let xs: Vec<_> = spec
            .trajectories()
            .unwrap()
            .iter()
            .map(|p| p[0].0)
            .collect();
        assert_eq!(xs, vec![6, 7, 7, 7]);
    }

    #[test]
    fn oversized_sprite_rejected() {
        let mut s = dot(0, 0, 0, 0);
        s.shape = Shape::Rect {
            width: 9,
            height: 1,
        };
        assert!(matches!(
            render_sprite_world(&world(vec![s], 2), 0),
            Err(Error::Spec(_))
        ));
    }

    #[test]
    fn disc_coverage() {
        let d = Shape::Disc { radius: 1 };
        assert_eq!(d.extent(), (3, 3));
        assert!(d.covers(1, 1) && d.covers(0, 1) && !d.covers(0, 0));
    }

    #[test]
    fn noise_depends_on_seed_only() {
        let mut spec = world(vec![dot(2, 2, 1, 1)], 3);
        spec.background = 100;
        spec.noise = 10;
        let a = render_sprite_world(&spec, 5).unwrap();
        let b = render_sprite_world(&spec, 5).unwrap();
        let c = render_sprite_world(&spec, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
