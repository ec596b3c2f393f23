//! Frame-motion datasets: clip segmentation, pair construction, the sprite
//! world renderer and the dataset directory format.

mod corpus;
mod dataset;
mod pairs;
mod sprite;

pub use corpus::{
    pairs_from_videos, synthesize_pairs, CorpusSpec, Direction, RandomCorpus, Video, VideoEntry,
};
pub use dataset::{
    read_dataset, write_dataset, Dataset, DatasetHeader, MANIFEST_FILE, MANIFEST_VERSION,
};
pub use pairs::{
    build_pair, build_pairs, recompute_target, segment_video, Clip, FrameMotionPair, PairMeta,
};
pub use sprite::{rasterize, render_sprite_world, step_clipped, Shape, Sprite, SpriteWorldSpec};
