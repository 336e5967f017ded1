use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::ModelConfig;
use crate::autodiff::Array;
use crate::real::Real;

/// A batch of latent vectors `[B, latent_dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentBatch<T> {
    pub values: Array<T>,
}

impl<T: Real> LatentBatch<T> {
    pub fn batch(&self) -> usize {
        self.values.shape()[0]
    }
}

/// I.i.d. standard normal latents. Draws are made in `f64` and rounded, so
/// single and double precision runs see the same underlying stream.
pub fn sample_latent<T: Real, R: Rng + ?Sized>(batch: usize, cfg: &ModelConfig, rng: &mut R) -> LatentBatch<T> {
    assert!(batch >= 1, "latent batch must be non-empty");
    let data = (0..batch * cfg.latent_dim)
        .map(|_| {
            let v: f64 = StandardNormal.sample(rng);
            T::of(v)
        })
        .collect();
    LatentBatch { values: Array::new(vec![batch, cfg.latent_dim], data).expect("latent shape") }
}
