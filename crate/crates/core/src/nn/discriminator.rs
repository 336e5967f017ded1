use std::sync::Arc;

use rand::Rng;

use super::blocks::{conv_bias, dense, Resample, ResBlock};
use super::params::{Bound, Layout, ParameterSet, SegmentKind};
use super::ModelConfig;
use crate::autodiff::{Array, Graph, Var};
use crate::error::{Error, Result};
use crate::real::Real;

/// Residual Wasserstein critic: 3×3 stem, one stride-2 stage per halving
/// down to 4×4, then a dense layer to one unbounded score per image.
#[derive(Debug, Clone)]
pub struct Discriminator {
    cfg: ModelConfig,
    layout: Arc<Layout>,
    blocks: Vec<(String, ResBlock)>,
    final_width: usize,
}

impl Discriminator {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let m = cfg.stages();
        // Width after stage j (0 = stem): base, base, 2·base, 4·base, ...
        let width = |j: usize| if j == 0 { cfg.base_width } else { cfg.base_width << (j - 1) };
        let mut layout = Layout::new();
        layout.push("stem.w", &[width(0), cfg.channels, 3, 3], SegmentKind::Weight { fan_in: cfg.channels * 9 });
        layout.push("stem.b", &[width(0)], SegmentKind::Bias);
        layout.push("stem.act", &[width(0)], SegmentKind::Slope);
        let mut blocks = Vec::new();
        for j in 0..m {
            for r in 0..cfg.n_blocks {
                let block = ResBlock {
                    in_ch: if r == 0 { width(j) } else { width(j + 1) },
                    out_ch: width(j + 1),
                    res: cfg.image_size >> (j + 1),
                    resample: if r == 0 { Resample::Down } else { Resample::None },
                };
                let prefix = format!("down{j}.{r}");
                block.declare(&mut layout, &prefix);
                blocks.push((prefix, block));
            }
        }
        let final_width = width(m);
        layout.push("dense.w", &[final_width * 16, 1], SegmentKind::Weight { fan_in: final_width * 16 });
        layout.push("dense.b", &[1], SegmentKind::Bias);
        Ok(Discriminator { cfg: cfg.clone(), layout: Arc::new(layout), blocks, final_width })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn init<T: Real, R: Rng + ?Sized>(&self, rng: &mut R) -> ParameterSet<T> {
        ParameterSet::init(self.layout.clone(), rng)
    }

    /// Records the critic on `g` for images `[B, 1, S, S]`, returning `[B, 1]`.
    pub fn forward<T: Real>(
        &self,
        g: &mut Graph<T>,
        params: &ParameterSet<T>,
        trainable: bool,
        images: Var,
    ) -> Result<Var> {
        if !params.has_layout(&self.layout) {
            return Err(Error::LayoutMismatch);
        }
        let p = params.bind(g, trainable);
        self.forward_bound(g, &p, images)
    }

    /// Forward with parameters already bound, so several batches can share
    /// one set of parameter leaves.
    pub fn forward_bound<T: Real>(&self, g: &mut Graph<T>, p: &Bound, images: Var) -> Result<Var> {
        let s = g.shape(images).to_vec();
        let size = self.cfg.image_size;
        if s.len() != 4 || s[1] != self.cfg.channels || s[2] != size || s[3] != size {
            return Err(Error::ShapeMismatch(format!("images {:?}, expected [B, 1, {size}, {size}]", s)));
        }
        let h = conv_bias(g, images, p.var("stem.w"), p.var("stem.b"), 1)?;
        let mut h = g.prelu(h, p.var("stem.act"))?;
        for (prefix, block) in &self.blocks {
            h = block.forward(g, p, prefix, h)?;
        }
        let h = g.reshape(h, &[s[0], self.final_width * 16])?;
        dense(g, h, p.var("dense.w"), p.var("dense.b"))
    }

    /// Convenience forward returning plain scores `[B, 1]`.
    pub fn score<T: Real>(&self, params: &ParameterSet<T>, images: &Array<T>) -> Result<Array<T>> {
        let mut g = Graph::new();
        let x = g.constant(images.clone());
        let out = self.forward(&mut g, params, false, x)?;
        Ok(g.value(out).clone())
    }
}
