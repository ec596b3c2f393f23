//! A small tensor library with tape-based reverse-mode differentiation,
//! an Adam optimizer and a binary checkpoint format.

pub mod checkpoint;
pub mod gradcheck;
pub mod kernels;
mod optim;
mod tape;
mod value;

pub use checkpoint::Checkpoint;
pub use optim::{Adam, AdamConfig};
pub use tape::{Gradients, Tape, Var};
pub use value::{Element, Tensor};
