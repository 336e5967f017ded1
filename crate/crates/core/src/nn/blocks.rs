use super::params::{Bound, Layout, SegmentKind};
use super::LAYER_NORM_EPS;
use crate::autodiff::{Graph, Var};
use crate::error::Result;
use crate::real::Real;

/// Shape of one residual block: two 3×3 convolutions with layer norm and
/// PReLU, plus an identity or 1×1 projection skip.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ResBlock {
    pub in_ch: usize,
    pub out_ch: usize,
    /// Spatial extent of the block output.
    pub res: usize,
    pub resample: Resample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Resample {
    None,
    /// Nearest-neighbour upsample before the block.
    Up,
    /// Stride-2 first convolution and skip.
    Down,
}

impl ResBlock {
    fn projects(&self) -> bool {
        self.in_ch != self.out_ch || self.resample == Resample::Down
    }

    pub fn declare(&self, layout: &mut Layout, prefix: &str) {
        let (ci, co, r) = (self.in_ch, self.out_ch, self.res);
        layout.push(format!("{prefix}.conv1.w"), &[co, ci, 3, 3], SegmentKind::Weight { fan_in: ci * 9 });
        layout.push(format!("{prefix}.conv1.b"), &[co], SegmentKind::Bias);
        layout.push(format!("{prefix}.ln1.g"), &[co, r, r], SegmentKind::Gain);
        layout.push(format!("{prefix}.ln1.b"), &[co, r, r], SegmentKind::Shift);
        layout.push(format!("{prefix}.act1"), &[co], SegmentKind::Slope);
        layout.push(format!("{prefix}.conv2.w"), &[co, co, 3, 3], SegmentKind::Weight { fan_in: co * 9 });
        layout.push(format!("{prefix}.conv2.b"), &[co], SegmentKind::Bias);
        layout.push(format!("{prefix}.ln2.g"), &[co, r, r], SegmentKind::Gain);
        layout.push(format!("{prefix}.ln2.b"), &[co, r, r], SegmentKind::Shift);
        if self.projects() {
            layout.push(format!("{prefix}.skip.w"), &[co, ci, 1, 1], SegmentKind::Weight { fan_in: ci });
        }
        layout.push(format!("{prefix}.act2"), &[co], SegmentKind::Slope);
    }

    pub fn forward<T: Real>(&self, g: &mut Graph<T>, p: &Bound, prefix: &str, x: Var) -> Result<Var> {
        let x = if self.resample == Resample::Up { g.upsample2(x)? } else { x };
        let stride = if self.resample == Resample::Down { 2 } else { 1 };
        let h = conv_bias(g, x, p.var(&format!("{prefix}.conv1.w")), p.var(&format!("{prefix}.conv1.b")), stride)?;
        let h = g.layer_norm(h, p.var(&format!("{prefix}.ln1.g")), p.var(&format!("{prefix}.ln1.b")), LAYER_NORM_EPS)?;
        let h = g.prelu(h, p.var(&format!("{prefix}.act1")))?;
        let h = conv_bias(g, h, p.var(&format!("{prefix}.conv2.w")), p.var(&format!("{prefix}.conv2.b")), 1)?;
        let h = g.layer_norm(h, p.var(&format!("{prefix}.ln2.g")), p.var(&format!("{prefix}.ln2.b")), LAYER_NORM_EPS)?;
        let skip = if self.projects() { g.conv2d(x, p.var(&format!("{prefix}.skip.w")), stride)? } else { x };
        let sum = g.add(h, skip)?;
        g.prelu(sum, p.var(&format!("{prefix}.act2")))
    }
}

pub(crate) fn conv_bias<T: Real>(g: &mut Graph<T>, x: Var, w: Var, b: Var, stride: usize) -> Result<Var> {
    let y = g.conv2d(x, w, stride)?;
    let shape = g.shape(y).to_vec();
    let bb = g.expand_channels(b, &shape)?;
    g.add(y, bb)
}

pub(crate) fn dense<T: Real>(g: &mut Graph<T>, x: Var, w: Var, b: Var) -> Result<Var> {
    let y = g.matmul(x, w)?;
    g.add(y, b)
}
