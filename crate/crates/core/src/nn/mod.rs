//! Fully-connected ReLU network with hand-written reverse mode and Adam.

mod adam;
mod checkpoint;
mod mlp;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use mlp::{ForwardCache, Gradients, Init, Layer, Mlp};
