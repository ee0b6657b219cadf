//! Physically grounded relighting toolkit: linear HDR synthesis, a
//! differentiable split-sum Cook–Torrance renderer, guided inverse rendering,
//! scale-aligned masked evaluation and capture-synchronization checks.

pub mod cli;
pub mod envmap;
pub mod eval;
pub mod error;
pub mod hdr_merge;
pub mod imaging;
pub mod inverse;
pub mod manifest;
pub mod math;
pub mod renderer;
pub mod sync;

pub use error::{Error, Result};
pub use imaging::{LinearImage, Mask};
