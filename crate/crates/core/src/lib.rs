//! Motion-template prediction with a multi-head conditional GAN, and a
//! hierarchical controller that uses generated templates as goals.
//!
//! The crate is organised bottom-up:
//!
//! * [`motion`]: silhouettes and motion history templates.
//! * [`datagen`]: clip segmentation, frame-motion pairs, synthetic sprite videos.
//! * [`tensor`]: a small tape-based reverse-mode autodiff engine and Adam.
//! * [`model`]: generator, patch discriminator, losses and the training loop.
//! * [`controller`]: sprite gridworld, goal refresh, reward and tabular Q-learning.

pub mod controller;
pub mod datagen;
pub mod error;
pub mod image;
pub mod model;
pub mod motion;
pub mod oracle;
pub mod rng;
pub mod selfcheck;
pub mod tensor;

pub use error::{Error, Result};
pub use image::GrayImage;
pub use motion::{MotionTemplate, TemplateConfig};
