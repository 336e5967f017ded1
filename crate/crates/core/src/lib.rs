//! Few-shot image generation by Reptile meta-training of a Wasserstein GAN.
//!
//! The crate is organised bottom-up:
//!
//! - [`autodiff`]: arrays and a reverse-mode differentiation graph that can
//!   differentiate its own backward pass (needed by the gradient penalty).
//! - [`nn`]: residual generator and critic networks over flat parameter sets.
//! - [`losses`]: Wasserstein critic/generator losses, gradient penalty, BCE.
//! - [`meta`]: the inner adaptation loop, Reptile outer update with Adam, and
//!   few-shot generation.
//! - [`data`]: IDX / PGM / FGR8 ingestion, resizing, splits, task sampling and
//!   a synthetic glyph corpus.
//! - [`eval`]: MMD and nearest-neighbour proxies plus montage rendering.

pub mod autodiff;
pub mod data;
pub mod nn;
pub mod error;
pub mod eval;
pub mod losses;
pub mod meta;
pub mod real;
pub mod rng;

pub use autodiff::{Array, Gradients, Graph, Var};
pub use error::{Error, Result};
pub use real::{Precision, Real};
