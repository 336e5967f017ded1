//! Residual generator and Wasserstein critic over flat parameter sets.
//!
//! Both networks use layer normalization and PReLU throughout; neither keeps
//! running statistics, so copying and interpolating parameter vectors is the
//! whole state.

mod blocks;
mod discriminator;
mod generator;
mod latent;
mod params;

pub use discriminator::Discriminator;
pub use generator::Generator;
pub use latent::{sample_latent, LatentBatch};
pub use params::{params_delta, Bound, Layout, ParameterSet, Segment, SegmentKind};

use crate::error::{Error, Result};
use crate::real::Precision;

/// Epsilon inside every layer-norm square root.
pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Pixels per side of the square images.
    pub image_size: usize,
    /// Always 1 (grayscale).
    pub channels: usize,
    pub latent_dim: usize,
    /// Channel width of the full-resolution stage.
    pub base_width: usize,
    /// Residual blocks per resolution stage; the first of each stage resamples.
    pub n_blocks: usize,
    pub precision: Precision,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            image_size: 32,
            channels: 1,
            latent_dim: 64,
            base_width: 16,
            n_blocks: 1,
            precision: Precision::Single,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if ![8, 16, 32, 64].contains(&self.image_size) {
            return Err(Error::InvalidConfig(format!("image_size {} not in {{8,16,32,64}}", self.image_size)));
        }
        if self.channels != 1 {
            return Err(Error::InvalidConfig("only grayscale (channels = 1) is supported".into()));
        }
        if self.latent_dim == 0 {
            return Err(Error::InvalidConfig("latent_dim must be positive".into()));
        }
        if self.base_width == 0 {
            return Err(Error::InvalidConfig("base_width must be positive".into()));
        }
        if self.n_blocks == 0 {
            return Err(Error::InvalidConfig("n_blocks must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of 2× resampling stages between 4×4 and the image size.
    pub fn stages(&self) -> usize {
        (self.image_size / 4).trailing_zeros() as usize
    }
}

#[cfg(test)]
mod tests;
