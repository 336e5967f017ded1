use std::sync::Arc;

use rand::Rng;

use super::blocks::{conv_bias, dense, Resample, ResBlock};
use super::params::{Bound, Layout, ParameterSet, SegmentKind};
use super::{LatentBatch, ModelConfig, LAYER_NORM_EPS};
use crate::autodiff::{Array, Graph, Var};
use crate::error::{Error, Result};
use crate::real::Real;

/// Residual generator: dense projection of `z` to a 4×4 map, one upsampling
/// stage per doubling of resolution, a final 3×3 convolution and tanh.
#[derive(Debug, Clone)]
pub struct Generator {
    cfg: ModelConfig,
    layout: Arc<Layout>,
    blocks: Vec<(String, ResBlock)>,
}

impl Generator {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let m = cfg.stages();
        // Channel width at 4·2^j pixels: halves towards the image, floor base_width.
        let width = |j: usize| cfg.base_width << (m.saturating_sub(1).saturating_sub(j));
        let w0 = width(0);
        let mut layout = Layout::new();
        layout.push("dense.w", &[cfg.latent_dim, w0 * 16], SegmentKind::Weight { fan_in: cfg.latent_dim });
        layout.push("dense.b", &[w0 * 16], SegmentKind::Bias);
        layout.push("stem.ln.g", &[w0, 4, 4], SegmentKind::Gain);
        layout.push("stem.ln.b", &[w0, 4, 4], SegmentKind::Shift);
        layout.push("stem.act", &[w0], SegmentKind::Slope);
        let mut blocks = Vec::new();
        for j in 0..m {
            for r in 0..cfg.n_blocks {
                let block = ResBlock {
                    in_ch: if r == 0 { width(j) } else { width(j + 1) },
                    out_ch: width(j + 1),
                    res: 4 << (j + 1),
                    resample: if r == 0 { Resample::Up } else { Resample::None },
                };
                let prefix = format!("up{j}.{r}");
                block.declare(&mut layout, &prefix);
                blocks.push((prefix, block));
            }
        }
        layout.push("out.w", &[1, width(m), 3, 3], SegmentKind::Weight { fan_in: width(m) * 9 });
        layout.push("out.b", &[1], SegmentKind::Bias);
        Ok(Generator { cfg: cfg.clone(), layout: Arc::new(layout), blocks })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    /// Fresh parameters, deterministic for the rng state.
    pub fn init<T: Real, R: Rng + ?Sized>(&self, rng: &mut R) -> ParameterSet<T> {
        ParameterSet::init(self.layout.clone(), rng)
    }

    /// Records the generator on `g`; `params` are registered as trainable
    /// leaves when `trainable`, constants otherwise.
    pub fn forward<T: Real>(
        &self,
        g: &mut Graph<T>,
        params: &ParameterSet<T>,
        trainable: bool,
        z: Var,
    ) -> Result<Var> {
        if !params.has_layout(&self.layout) {
            return Err(Error::LayoutMismatch);
        }
        let p = params.bind(g, trainable);
        self.forward_bound(g, &p, z)
    }

    /// Forward with parameters already bound on `g`.
    pub fn forward_bound<T: Real>(&self, g: &mut Graph<T>, p: &Bound, z: Var) -> Result<Var> {
        let zs = g.shape(z).to_vec();
        if zs.len() != 2 || zs[1] != self.cfg.latent_dim {
            return Err(Error::ShapeMismatch(format!("latent {:?}, expected [B, {}]", zs, self.cfg.latent_dim)));
        }
        let b = zs[0];
        let h = dense(g, z, p.var("dense.w"), p.var("dense.b"))?;
        let w0 = g.shape(h)[1] / 16;
        let h = g.reshape(h, &[b, w0, 4, 4])?;
        let h = g.layer_norm(h, p.var("stem.ln.g"), p.var("stem.ln.b"), LAYER_NORM_EPS)?;
        let mut h = g.prelu(h, p.var("stem.act"))?;
        for (prefix, block) in &self.blocks {
            h = block.forward(g, p, prefix, h)?;
        }
        let h = conv_bias(g, h, p.var("out.w"), p.var("out.b"), 1)?;
        Ok(g.tanh(h))
    }

    /// Convenience forward returning plain images `[B, 1, S, S]`.
    pub fn generate<T: Real>(&self, params: &ParameterSet<T>, z: &LatentBatch<T>) -> Result<Array<T>> {
        let mut g = Graph::new();
        let zv = g.constant(z.values.clone());
        let out = self.forward(&mut g, params, false, zv)?;
        Ok(g.value(out).clone())
    }
}
