//! Raw numeric kernels over row-major slices.
//!
//! Every kernel accumulates each output element in a fixed order, so results
//! are bit-identical regardless of how many worker threads run them.

use rayon::prelude::*;

use crate::real::Real;

/// `c[m×n] = a[m×k] · b[k×n]`.
pub fn matmul<T: Real>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut c = vec![T::zero(); m * n];
    gemm(m, k, n, a, false, b, false, T::zero(), &mut c);
    c
}

pub fn transpose<T: Real>(a: &[T], rows: usize, cols: usize) -> Vec<T> {
    let mut t = vec![T::zero(); rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            t[j * rows + i] = a[i * cols + j];
        }
    }
    t
}

/// Geometry of a square-kernel convolution with symmetric zero padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub batch: usize,
    pub in_ch: usize,
    pub in_h: usize,
    pub in_w: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub fn out_h(&self) -> usize {
        (self.in_h + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn out_w(&self) -> usize {
        (self.in_w + 2 * self.pad - self.kernel) / self.stride + 1
    }

    pub fn input_len(&self) -> usize {
        self.batch * self.in_ch * self.in_h * self.in_w
    }

    pub fn output_len(&self) -> usize {
        self.batch * self.out_ch * self.out_h() * self.out_w()
    }

    pub fn weight_len(&self) -> usize {
        self.out_ch * self.in_ch * self.kernel * self.kernel
    }

    /// Output positions `[lo, hi)` along one axis whose input tap
    /// `o * stride + k - pad` lands inside `[0, extent)`.
    #[inline]
    fn valid_range(&self, k: usize, extent: usize, out_extent: usize) -> (usize, usize) {
        let s = self.stride as isize;
        let off = k as isize - self.pad as isize;
        let lo = if off >= 0 { 0 } else { ((-off) + s - 1) / s };
        let last = extent as isize - 1 - off;
        let hi = if last < 0 { 0 } else { (last / s + 1).min(out_extent as isize) };
        (lo as usize, hi.max(lo) as usize)
    }
}

/// `c ← op(a)·op(b) + beta·c` with `c` row-major m×n. `a` is stored
/// row-major as m×k, or k×m when `ta`; `b` as k×n, or n×k when `tb`.
#[allow(clippy::too_many_arguments)]
pub fn gemm<T: Real>(m: usize, k: usize, n: usize, a: &[T], ta: bool, b: &[T], tb: bool, beta: T, c: &mut [T]) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n, "gemm operand too small");
    if m == 0 || n == 0 {
        return;
    }
    let sa = if ta { (1, m as isize) } else { (k as isize, 1) };
    let sb = if tb { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: the strides address exactly the m×k, k×n and m×n prefixes
    // whose lengths were checked above.
    unsafe { T::gemm(m, k, n, a.as_ptr(), sa, b.as_ptr(), sb, beta, c.as_mut_ptr(), (n as isize, 1)) }
}

/// Unfolds one image `[C, H, W]` into `[C·k·k, oh·ow]` patch columns.
fn im2col<T: Real>(xb: &[T], g: &ConvGeom, cols: &mut [T]) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let (h, wd, k, s, p) = (g.in_h, g.in_w, g.kernel, g.stride, g.pad);
    let n = oh * ow;
    for c in 0..g.in_ch {
        let xc = &xb[c * h * wd..(c + 1) * h * wd];
        for ky in 0..k {
            let (oy_lo, oy_hi) = g.valid_range(ky, h, oh);
            for kx in 0..k {
                let (ox_lo, ox_hi) = g.valid_range(kx, wd, ow);
                let row = &mut cols[((c * k + ky) * k + kx) * n..][..n];
                row.fill(T::zero());
                for oy in oy_lo..oy_hi {
                    let iy = oy * s + ky - p;
                    let src = &xc[iy * wd..(iy + 1) * wd];
                    let dst = &mut row[oy * ow..(oy + 1) * ow];
                    if s == 1 {
                        let ix0 = ox_lo + kx - p;
                        dst[ox_lo..ox_hi].copy_from_slice(&src[ix0..ix0 + ox_hi - ox_lo]);
                    } else {
                        for ox in ox_lo..ox_hi {
                            dst[ox] = src[ox * s + kx - p];
                        }
                    }
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: scatters patch columns back onto `dxb`, which must
/// start zeroed.
fn col2im<T: Real>(cols: &[T], g: &ConvGeom, dxb: &mut [T]) {
    let (oh, ow) = (g.out_h(), g.out_w());
    let (h, wd, k, s, p) = (g.in_h, g.in_w, g.kernel, g.stride, g.pad);
    let n = oh * ow;
    for c in 0..g.in_ch {
        let dxc = &mut dxb[c * h * wd..(c + 1) * h * wd];
        for ky in 0..k {
            let (oy_lo, oy_hi) = g.valid_range(ky, h, oh);
            for kx in 0..k {
                let (ox_lo, ox_hi) = g.valid_range(kx, wd, ow);
                let row = &cols[((c * k + ky) * k + kx) * n..][..n];
                for oy in oy_lo..oy_hi {
                    let iy = oy * s + ky - p;
                    let dst = &mut dxc[iy * wd..(iy + 1) * wd];
                    let src = &row[oy * ow..(oy + 1) * ow];
                    if s == 1 {
                        let ix0 = ox_lo + kx - p;
                        for (d, &v) in dst[ix0..ix0 + ox_hi - ox_lo].iter_mut().zip(&src[ox_lo..ox_hi]) {
                            *d += v;
                        }
                    } else {
                        for ox in ox_lo..ox_hi {
                            dst[ox * s + kx - p] += src[ox];
                        }
                    }
                }
            }
        }
    }
}

impl ConvGeom {
    /// Patch rows of the unfolded input.
    fn patch_len(&self) -> usize {
        self.in_ch * self.kernel * self.kernel
    }

    /// A 1×1 stride-1 convolution reads its input as the patch matrix.
    fn is_pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == 1 && self.pad == 0
    }
}

/// Cross-correlation `y[b,f] = Σ_c w[f,c] ⋆ x[b,c]`.
pub fn conv_forward<T: Real>(x: &[T], w: &[T], g: &ConvGeom) -> Vec<T> {
    let n = g.out_h() * g.out_w();
    let kk = g.patch_len();
    let plane_in = g.in_ch * g.in_h * g.in_w;
    let mut y = vec![T::zero(); g.output_len()];
    y.par_chunks_mut(g.out_ch * n).enumerate().for_each(|(bi, yb)| {
        let xb = &x[bi * plane_in..(bi + 1) * plane_in];
        if g.is_pointwise() {
            gemm(g.out_ch, kk, n, w, false, xb, false, T::zero(), yb);
        } else {
            let mut cols = vec![T::zero(); kk * n];
            im2col(xb, g, &mut cols);
            gemm(g.out_ch, kk, n, w, false, &cols, false, T::zero(), yb);
        }
    });
    y
}

/// Adjoint of [`conv_forward`] in its input: `dx = Σ_f wᵀ ⋆ dy`.
pub fn conv_backward_input<T: Real>(dy: &[T], w: &[T], g: &ConvGeom) -> Vec<T> {
    let n = g.out_h() * g.out_w();
    let kk = g.patch_len();
    let plane_in = g.in_ch * g.in_h * g.in_w;
    let mut dx = vec![T::zero(); g.input_len()];
    dx.par_chunks_mut(plane_in).enumerate().for_each(|(bi, dxb)| {
        let dyb = &dy[bi * g.out_ch * n..(bi + 1) * g.out_ch * n];
        if g.is_pointwise() {
            gemm(kk, g.out_ch, n, w, true, dyb, false, T::zero(), dxb);
        } else {
            let mut cols = vec![T::zero(); kk * n];
            gemm(kk, g.out_ch, n, w, true, dyb, false, T::zero(), &mut cols);
            col2im(&cols, g, dxb);
        }
    });
    dx
}

/// Adjoint of [`conv_forward`] in its weights: `dw[f,c] = Σ_b dy[b,f] ⋆ x[b,c]`,
/// accumulated over the batch in order.
pub fn conv_backward_weight<T: Real>(x: &[T], dy: &[T], g: &ConvGeom) -> Vec<T> {
    let n = g.out_h() * g.out_w();
    let kk = g.patch_len();
    let plane_in = g.in_ch * g.in_h * g.in_w;
    let mut dw = vec![T::zero(); g.weight_len()];
    let mut cols = vec![T::zero(); if g.is_pointwise() { 0 } else { kk * n }];
    for bi in 0..g.batch {
        let xb = &x[bi * plane_in..(bi + 1) * plane_in];
        let dyb = &dy[bi * g.out_ch * n..(bi + 1) * g.out_ch * n];
        let beta = if bi == 0 { T::zero() } else { T::one() };
        if g.is_pointwise() {
            gemm(g.out_ch, n, kk, dyb, false, xb, true, beta, &mut dw);
        } else {
            im2col(xb, g, &mut cols);
            gemm(g.out_ch, n, kk, dyb, false, &cols, true, beta, &mut dw);
        }
    }
    dw
}

/// Nearest-neighbour 2× upsampling of `planes` planes of `h×w`.
pub fn upsample2<T: Real>(x: &[T], planes: usize, h: usize, w: usize) -> Vec<T> {
    let (h2, w2) = (2 * h, 2 * w);
    let mut y = vec![T::zero(); planes * h2 * w2];
    for pl in 0..planes {
        let src = &x[pl * h * w..(pl + 1) * h * w];
        let dst = &mut y[pl * h2 * w2..(pl + 1) * h2 * w2];
        for yy in 0..h2 {
            let srow = &src[(yy / 2) * w..(yy / 2 + 1) * w];
            for (xx, d) in dst[yy * w2..(yy + 1) * w2].iter_mut().enumerate() {
                *d = srow[xx / 2];
            }
        }
    }
    y
}

/// Sum over non-overlapping 2×2 blocks; the adjoint of [`upsample2`].
/// `h`, `w` are the output extents.
pub fn sum_pool2<T: Real>(x: &[T], planes: usize, h: usize, w: usize) -> Vec<T> {
    let (h2, w2) = (2 * h, 2 * w);
    let mut y = vec![T::zero(); planes * h * w];
    for pl in 0..planes {
        let src = &x[pl * h2 * w2..(pl + 1) * h2 * w2];
        let dst = &mut y[pl * h * w..(pl + 1) * h * w];
        for yy in 0..h {
            for xx in 0..w {
                let a = src[(2 * yy) * w2 + 2 * xx];
                let b = src[(2 * yy) * w2 + 2 * xx + 1];
                let c = src[(2 * yy + 1) * w2 + 2 * xx];
                let d = src[(2 * yy + 1) * w2 + 2 * xx + 1];
                dst[yy * w + xx] = (a + b) + (c + d);
            }
        }
    }
    y
}

/// Broadcast `src[c]` to `out[o, c, i]`.
pub fn expand<T: Real>(src: &[T], outer: usize, inner: usize) -> Vec<T> {
    let mid = src.len();
    let mut out = Vec::with_capacity(outer * mid * inner);
    for _ in 0..outer {
        for &v in src {
            out.extend(std::iter::repeat(v).take(inner));
        }
    }
    debug_assert_eq!(out.len(), outer * mid * inner);
    out
}

/// `out[c] = Σ_o Σ_i src[o, c, i]`, the adjoint of [`expand`].
pub fn reduce<T: Real>(src: &[T], outer: usize, mid: usize, inner: usize) -> Vec<T> {
    let mut out = vec![T::zero(); mid];
    for o in 0..outer {
        for (c, acc) in out.iter_mut().enumerate() {
            let base = (o * mid + c) * inner;
            let mut s = T::zero();
            for &v in &src[base..base + inner] {
                s += v;
            }
            *acc += s;
        }
    }
    out
}
