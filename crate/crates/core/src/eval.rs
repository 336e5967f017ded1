//! Sample-quality proxies and figure rendering.

use rand::seq::index;

use crate::autodiff::Array;
use crate::data::{denormalize, RawImage, TaskDataset};
use crate::error::{Error, Result};
use crate::losses::LossConfig;
use crate::meta::{figr_generate, InnerConfig, Networks};
use crate::nn::ParameterSet;
use crate::real::Real;
use crate::rng::{stream, InnerRngs, Purpose};

/// Multipliers of the median pairwise distance used as kernel bandwidths.
pub const BANDWIDTH_SCALES: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

/// Rows of an `[M, ...]` array as f64 vectors.
fn rows<T: Real>(a: &Array<T>) -> Result<Vec<Vec<f64>>> {
    let m = a.shape().first().copied().unwrap_or(0);
    if m == 0 || a.is_empty() {
        return Err(Error::EmptySet);
    }
    let per = a.len() / m;
    Ok(a.data().chunks(per).map(|r| r.iter().map(|v| v.as_f64()).collect()).collect())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn kernel(d2: f64, bandwidths: &[f64]) -> f64 {
    bandwidths.iter().map(|s| (-d2 / (2.0 * s * s)).exp()).sum()
}

fn mean_kernel(a: &[Vec<f64>], b: &[Vec<f64>], bandwidths: &[f64], skip_diagonal: bool) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            if skip_diagonal && i == j {
                continue;
            }
            sum += kernel(sq_dist(x, y), bandwidths);
            count += 1;
        }
    }
    sum / count as f64
}

/// Cross term, symmetric in its arguments by construction.
fn cross_kernel(a: &[Vec<f64>], b: &[Vec<f64>], bandwidths: &[f64]) -> f64 {
    let mut vals: Vec<f64> = a.iter().flat_map(|x| b.iter().map(move |y| (x, y))).map(|(x, y)| kernel(sq_dist(x, y), bandwidths)).collect();
    vals.sort_by(f64::total_cmp);
    vals.iter().sum::<f64>() / vals.len() as f64
}

/// Unbiased MMD² with a sum of Gaussian kernels `exp(−‖x−y‖²/(2σ²))`.
/// Sets of one element fall back to the biased within-set term.
pub fn mmd_squared<T: Real>(a: &Array<T>, b: &Array<T>, bandwidths: &[f64]) -> Result<f64> {
    let (ra, rb) = (rows(a)?, rows(b)?);
    let kaa = mean_kernel(&ra, &ra, bandwidths, ra.len() > 1);
    let kbb = mean_kernel(&rb, &rb, bandwidths, rb.len() > 1);
    Ok(kaa + kbb - 2.0 * cross_kernel(&ra, &rb, bandwidths))
}

/// Biased (V-statistic) MMD²; exactly zero for identical sets.
pub fn mmd_squared_biased<T: Real>(a: &Array<T>, b: &Array<T>, bandwidths: &[f64]) -> Result<f64> {
    let (ra, rb) = (rows(a)?, rows(b)?);
    let kaa = mean_kernel(&ra, &ra, bandwidths, false);
    let kbb = mean_kernel(&rb, &rb, bandwidths, false);
    Ok(kaa + kbb - 2.0 * cross_kernel(&ra, &rb, bandwidths))
}

/// Median of the pairwise L2 distances within `set`; 1 when undefined or 0.
pub fn median_pairwise_distance<T: Real>(set: &Array<T>) -> Result<f64> {
    let r = rows(set)?;
    let mut d: Vec<f64> = (0..r.len()).flat_map(|i| (i + 1..r.len()).map(move |j| (i, j))).map(|(i, j)| sq_dist(&r[i], &r[j]).sqrt()).collect();
    if d.is_empty() {
        return Ok(1.0);
    }
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    let m = if d.len() % 2 == 1 { d[mid] } else { 0.5 * (d[mid - 1] + d[mid]) };
    Ok(if m > 0.0 { m } else { 1.0 })
}

/// [`BANDWIDTH_SCALES`] times the median pairwise distance of `real`.
pub fn median_bandwidths<T: Real>(real: &Array<T>) -> Result<Vec<f64>> {
    let m = median_pairwise_distance(real)?;
    Ok(BANDWIDTH_SCALES.iter().map(|s| s * m).collect())
}

/// Mean over generated images of the L2 distance to the nearest
/// conditioning image, divided by the per-image dimension.
pub fn nn_distance<T: Real>(generated: &Array<T>, conditioning: &Array<T>) -> Result<f64> {
    let (g, c) = (rows(generated)?, rows(conditioning)?);
    let dim = g[0].len() as f64;
    let total: f64 = g.iter().map(|x| c.iter().map(|y| sq_dist(x, y).sqrt()).fold(f64::INFINITY, f64::min)).sum();
    Ok(total / g.len() as f64 / dim)
}

/// Grid of `[M, 1, S, S]` images, `columns` wide, left to right then top to
/// bottom, with `separator_px` lines of value 255 between cells. Pixels map
/// from [−1, 1] by `round(127.5·(v + 1))`.
pub fn montage<T: Real>(images: &Array<T>, columns: usize, separator_px: usize) -> Result<RawImage> {
    let s = images.shape();
    if s.len() != 4 || s[1] != 1 || s[0] == 0 {
        return Err(Error::ShapeMismatch(format!("montage needs [M, 1, H, W] with M >= 1, got {s:?}")));
    }
    if columns == 0 {
        return Err(Error::InvalidConfig("montage needs at least one column".into()));
    }
    let (m, h, w) = (s[0], s[2], s[3]);
    let grid_rows = m.div_ceil(columns);
    let width = columns * w + (columns - 1) * separator_px;
    let height = grid_rows * h + (grid_rows - 1) * separator_px;
    let mut px = vec![255u8; width * height];
    for (i, img) in images.data().chunks(h * w).enumerate() {
        let (r, c) = (i / columns, i % columns);
        let (y0, x0) = (r * (h + separator_px), c * (w + separator_px));
        for y in 0..h {
            for x in 0..w {
                px[(y0 + y) * width + x0 + x] = denormalize(img[y * w + x].as_f64());
            }
        }
    }
    RawImage::new(width, height, px)
}

/// One row of the evaluation table.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub task_id: usize,
    pub mmd2: f64,
    pub nn_distance: f64,
    pub baseline_mmd2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalProtocol {
    pub inner: InnerConfig,
    pub loss: LossConfig,
    /// Generated samples per class.
    pub samples: usize,
    pub seed: u64,
}

/// Adapts both the meta-trained and the baseline parameters to `n`
/// conditioning images of `class` with identical random draws, generates
/// `samples` images from each, and scores them against the class's
/// remaining images (all of them if fewer than two remain).
pub fn evaluate_class<T: Real>(
    nets: &Networks,
    meta: (&ParameterSet<T>, &ParameterSet<T>),
    baseline: (&ParameterSet<T>, &ParameterSet<T>),
    dataset: &TaskDataset,
    class: usize,
    protocol: &EvalProtocol,
) -> Result<EvalReport> {
    let images = &dataset.class(class).images;
    let class_seed = protocol.seed ^ (class as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut pick = stream(class_seed, Purpose::Eval);
    let n = protocol.inner.n;
    let chosen: Vec<usize> = if images.len() >= n {
        index::sample(&mut pick, images.len(), n).into_vec()
    } else {
        (0..n).map(|i| i % images.len()).collect()
    };
    let mut rest: Vec<usize> = (0..images.len()).filter(|i| !chosen.contains(i)).collect();
    if rest.len() < 2 {
        rest = (0..images.len()).collect();
    }
    let x = dataset.stack::<T>(class, &chosen);
    let held_out = dataset.stack::<T>(class, &rest);
    let bandwidths = median_bandwidths(&held_out)?;

    let rngs = InnerRngs::new(class_seed);
    let gen = |d: &ParameterSet<T>, g: &ParameterSet<T>| {
        figr_generate(nets, d, g, &x, &protocol.inner, &protocol.loss, &mut rngs.clone(), protocol.samples)
    };
    let ours = gen(meta.0, meta.1)?;
    let base = gen(baseline.0, baseline.1)?;
    Ok(EvalReport {
        task_id: class,
        mmd2: mmd_squared(&ours, &held_out, &bandwidths)?,
        nn_distance: nn_distance(&ours, &x)?,
        baseline_mmd2: mmd_squared(&base, &held_out, &bandwidths)?,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::data::{normalize, synth_glyph_dataset};
    use crate::nn::ModelConfig;

    fn set(rows: &[Vec<f64>]) -> Array<f64> {
        let dim = rows[0].len();
        Array::new(vec![rows.len(), 1, 1, dim], rows.concat()).unwrap()
    }

    fn random_set(rng: &mut ChaCha8Rng, m: usize, dim: usize, shift: f64) -> Array<f64> {
        set(&(0..m).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0) + shift).collect()).collect::<Vec<_>>())
    }

    #[test]
    fn identical_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_set(&mut rng, 6, 5, 0.0);
        let bw = [0.5, 1.0, 2.0];
        assert_eq!(mmd_squared_biased(&a, &a, &bw).unwrap(), 0.0);
        assert!(mmd_squared(&a, &a, &bw).unwrap() <= 1e-12);
    }

    #[test]
    fn two_point_masses_closed_form() {
        // All −1 images against all +1 images: within-set kernels are L (one
        // per bandwidth), the cross kernel is Σ exp(−4·dim/(2σ²)).
        let dim = 16;
        let a = set(&vec![vec![-1.0; dim]; 5]);
        let b = set(&vec![vec![1.0; dim]; 7]);
        let bw = [2.0, 4.0, 8.0];
        let cross: f64 = bw.iter().map(|s| (-(4.0 * dim as f64) / (2.0 * s * s)).exp()).sum();
        let expected = 2.0 * bw.len() as f64 - 2.0 * cross;
        assert!((mmd_squared(&a, &b, &bw).unwrap() - expected).abs() < 1e-6);
        assert!((mmd_squared_biased(&a, &b, &bw).unwrap() - expected).abs() < 1e-6);
    }

    #[test]
    fn empty_sets_are_rejected() {
        let a = Array::<f64>::zeros(&[0, 1, 2, 2]);
        let b = Array::<f64>::zeros(&[2, 1, 2, 2]);
        assert_eq!(mmd_squared(&a, &b, &[1.0]).unwrap_err(), Error::EmptySet);
        assert_eq!(nn_distance(&b, &a).unwrap_err(), Error::EmptySet);
    }

    #[test]
    fn median_bandwidths_examples() {
        let a = set(&[vec![0.0, 0.0], vec![3.0, 4.0], vec![6.0, 8.0]]);
        // distances 5, 10, 5
        assert_eq!(median_pairwise_distance(&a).unwrap(), 5.0);
        assert_eq!(median_bandwidths(&a).unwrap(), vec![1.25, 2.5, 5.0, 10.0, 20.0]);
        assert_eq!(median_pairwise_distance(&set(&vec![vec![1.0; 3]; 4])).unwrap(), 1.0);
    }

    #[test]
    fn nn_distance_examples() {
        let c = set(&[vec![0.0; 4], vec![1.0; 4]]);
        assert_eq!(nn_distance(&c, &c).unwrap(), 0.0);
        let g = set(&[vec![0.0, 0.0, 3.0, 4.0]]);
        let one = set(&[vec![0.0; 4]]);
        assert_eq!(nn_distance(&g, &one).unwrap(), 5.0 / 4.0);
    }

    #[test]
    fn montage_geometry() {
        let one = Array::<f64>::full(&[1, 1, 3, 3], -1.0);
        let m = montage(&one, 1, 2).unwrap();
        assert_eq!((m.width, m.height), (3, 3));
        assert_eq!(m.pixels, vec![0; 9]);
        let four = Array::<f64>::zeros(&[4, 1, 5, 5]);
        assert_eq!(montage(&four, 4, 2).unwrap().width, 4 * 5 + 6);
        assert!(montage(&four, 0, 2).is_err());
    }

    #[test]
    fn montage_of_constants_fixture() {
        // Three 2×2 constants in 2 columns with 1-pixel separators: a 5×5
        // grid whose fourth cell is blank.
        let vals = [-1.0, 1.0, 0.0];
        let data: Vec<f64> = vals.iter().flat_map(|&v| [v; 4]).collect();
        let imgs = Array::new(vec![3, 1, 2, 2], data).unwrap();
        let m = montage(&imgs, 2, 1).unwrap();
        #[rustfmt::skip]
        let expected: Vec<u8> = vec![
            0,   0,   255, 255, 255,
            0,   0,   255, 255, 255,
            255, 255, 255, 255, 255,
            128, 128, 255, 255, 255,
            128, 128, 255, 255, 255,
        ];
        assert_eq!((m.width, m.height), (5, 5));
        assert_eq!(m.pixels, expected);
    }

    #[test]
    fn evaluation_runs_and_is_deterministic() {
        let cfg = ModelConfig { image_size: 8, latent_dim: 4, base_width: 2, ..ModelConfig::default() };
        let nets = Networks::new(&cfg).unwrap();
        let (d, g) = nets.init::<f32>(1);
        let (bd, bg) = nets.init::<f32>(2);
        let ds = synth_glyph_dataset(3, 8, 8, 4).unwrap();
        let protocol =
            EvalProtocol { inner: InnerConfig { k: 2, n: 4, inner_lr: 1e-3 }, loss: LossConfig::default(), samples: 6, seed: 5 };
        let a = evaluate_class(&nets, (&d, &g), (&bd, &bg), &ds, 1, &protocol).unwrap();
        let b = evaluate_class(&nets, (&d, &g), (&bd, &bg), &ds, 1, &protocol).unwrap();
        assert_eq!(a, b);
        assert!(a.nn_distance > 0.0 && a.mmd2.is_finite() && a.baseline_mmd2.is_finite());
        let same = evaluate_class(&nets, (&d, &g), (&d, &g), &ds, 1, &protocol).unwrap();
        assert_eq!(same.mmd2, same.baseline_mmd2);
    }

    proptest! {
        #[test]
        fn mmd_is_symmetric_and_permutation_invariant(seed in any::<u64>(), m in 1usize..6, n in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_set(&mut rng, m, 4, 0.0);
            let b = random_set(&mut rng, n, 4, 0.3);
            let bw = [0.5, 1.0, 2.0];
            let ab = mmd_squared(&a, &b, &bw).unwrap();
            prop_assert!((ab - mmd_squared(&b, &a, &bw).unwrap()).abs() < 1e-12);
            let rev: Vec<Array<f64>> = (0..m).rev().map(|i| a.slice_batch(i, i + 1)).collect();
            let a_rev = Array::concat_batch(&rev.iter().collect::<Vec<_>>()).unwrap();
            prop_assert!((ab - mmd_squared(&a_rev, &b, &bw).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn nn_distance_shrinks_with_more_conditioning(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = random_set(&mut rng, 3, 4, 0.0);
            let c = random_set(&mut rng, 4, 4, 0.0);
            let small = c.slice_batch(0, 2);
            let d_small = nn_distance(&g, &small).unwrap();
            let d_all = nn_distance(&g, &c).unwrap();
            prop_assert!(d_all >= 0.0 && d_all <= d_small);
        }

        #[test]
        fn montage_pixels_round_trip(v in any::<u8>()) {
            let img = Array::<f64>::full(&[1, 1, 1, 1], normalize(v));
            prop_assert_eq!(montage(&img, 1, 0).unwrap().pixels[0], v);
        }
    }
}
