/// Source coordinate and blend weight for output index `i`, half-pixel
/// centres, clamped to the image.
fn taps(i: usize, in_len: usize, out_len: usize) -> (usize, usize, f64) {
    let scale = in_len as f64 / out_len as f64;
    let s = ((i as f64 + 0.5) * scale - 0.5).max(0.0);
    let i0 = (s.floor() as usize).min(in_len - 1);
    let i1 = (i0 + 1).min(in_len - 1);
    (i0, i1, s - i0 as f64)
}

/// Bilinear resize of a row-major `h × w` image, align-corners-false.
pub fn bilinear_resize(src: &[f64], h: usize, w: usize, out_h: usize, out_w: usize) -> Vec<f64> {
    assert_eq!(src.len(), h * w, "source is not {h}x{w}");
    assert!(h > 0 && w > 0 && out_h > 0 && out_w > 0, "image extents must be positive");
    let cols: Vec<_> = (0..out_w).map(|j| taps(j, w, out_w)).collect();
    let mut out = Vec::with_capacity(out_h * out_w);
    for i in 0..out_h {
        let (y0, y1, fy) = taps(i, h, out_h);
        let (top, bot) = (&src[y0 * w..(y0 + 1) * w], &src[y1 * w..(y1 + 1) * w]);
        for &(x0, x1, fx) in &cols {
            let t = top[x0] + fx * (top[x1] - top[x0]);
            let b = bot[x0] + fx * (bot[x1] - bot[x0]);
            out.push(t + fy * (b - t));
        }
    }
    out
}
