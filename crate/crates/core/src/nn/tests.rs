use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::{finite_difference_gradient, relative_error, Array, Graph};
use crate::error::Error;

fn cfg(size: usize, base: usize, latent: usize) -> ModelConfig {
    ModelConfig { image_size: size, latent_dim: latent, base_width: base, ..ModelConfig::default() }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Per-layer parameter count of one residual block.
fn block_count(ci: usize, co: usize, res: usize, projects: bool) -> usize {
    let conv1 = co * ci * 9 + co;
    let conv2 = co * co * 9 + co;
    let norms = 2 * (2 * co * res * res);
    let slopes = 2 * co;
    let skip = if projects { co * ci } else { 0 };
    conv1 + conv2 + norms + slopes + skip
}

fn generator_count(size: usize, base: usize, latent: usize) -> usize {
    let m = (size / 4).trailing_zeros() as usize;
    let width = |j: usize| base * 2usize.pow(m.saturating_sub(1 + j) as u32);
    let w0 = width(0);
    let mut n = latent * w0 * 16 + w0 * 16 + 2 * w0 * 16 + w0;
    for j in 0..m {
        n += block_count(width(j), width(j + 1), 4 * 2usize.pow(j as u32 + 1), width(j) != width(j + 1));
    }
    n + width(m) * 9 + 1
}

fn discriminator_count(size: usize, base: usize) -> usize {
    let m = (size / 4).trailing_zeros() as usize;
    let width = |j: usize| if j == 0 { base } else { base * 2usize.pow(j as u32 - 1) };
    let mut n = base * 9 + base + base;
    for j in 0..m {
        n += block_count(width(j), width(j + 1), size / 2usize.pow(j as u32 + 1), true);
    }
    n + width(m) * 16 + 1
}

#[test]
fn config_validation() {
    assert!(cfg(32, 16, 64).validate().is_ok());
    for bad in [cfg(24, 16, 64), cfg(128, 16, 64), cfg(32, 16, 0), ModelConfig { n_blocks: 0, ..cfg(32, 16, 8) }] {
        assert!(matches!(Generator::new(&bad), Err(Error::InvalidConfig(_))));
        assert!(matches!(Discriminator::new(&bad), Err(Error::InvalidConfig(_))));
    }
}

#[test]
fn parameter_counts_match_closed_form() {
    let c = cfg(32, 16, 64);
    assert_eq!(generator_count(32, 16, 64), 200_913);
    assert_eq!(discriminator_count(32, 16), 106_865);
    assert_eq!(Generator::new(&c).unwrap().layout().total_len(), 200_913);
    assert_eq!(Discriminator::new(&c).unwrap().layout().total_len(), 106_865);
    for &(s, b, l) in &[(8, 4, 8), (16, 16, 64), (16, 8, 32), (64, 8, 16)] {
        let c = cfg(s, b, l);
        assert_eq!(Generator::new(&c).unwrap().layout().total_len(), generator_count(s, b, l), "G {s}/{b}/{l}");
        assert_eq!(Discriminator::new(&c).unwrap().layout().total_len(), discriminator_count(s, b), "D {s}/{b}");
    }
}

#[test]
fn extra_blocks_per_stage_add_identity_blocks() {
    let one = Generator::new(&cfg(16, 8, 8)).unwrap().layout().total_len();
    let two = Generator::new(&ModelConfig { n_blocks: 2, ..cfg(16, 8, 8) }).unwrap().layout().total_len();
    // One identity block (8 → 8 channels) per stage at 8×8 and 16×16.
    assert_eq!(two - one, block_count(8, 8, 8, false) + block_count(8, 8, 16, false));
}

#[test]
fn initialization_is_deterministic() {
    let c = cfg(16, 8, 16);
    let g = Generator::new(&c).unwrap();
    let d = Discriminator::new(&c).unwrap();
    let a: ParameterSet<f32> = g.init(&mut rng(5));
    let b: ParameterSet<f32> = g.init(&mut rng(5));
    assert_eq!(a, b);
    let c2: ParameterSet<f32> = g.init(&mut rng(6));
    assert_ne!(a, c2);
    let da: ParameterSet<f32> = d.init(&mut rng(5));
    let db: ParameterSet<f32> = d.init(&mut rng(5));
    assert_eq!(da, db);
    for (p, layout) in [(&a, g.layout()), (&da, d.layout())] {
        for seg in layout.segments().iter().filter(|s| s.kind == SegmentKind::Slope) {
            assert!(p.segment(&seg.name).unwrap().iter().all(|&v| v == 0.25), "{}", seg.name);
        }
    }
}

#[test]
fn generator_output_range_and_purity() {
    let c = cfg(16, 8, 16);
    let g = Generator::new(&c).unwrap();
    let p: ParameterSet<f32> = g.init(&mut rng(7));
    let z = sample_latent::<f32, _>(3, &c, &mut rng(8));
    let mut rows = z.values.clone().into_data();
    rows.extend_from_slice(&z.values.data()[..16]);
    let z4 = LatentBatch { values: Array::new(vec![4, 16], rows).unwrap() };
    let out = g.generate(&p, &z4).unwrap();
    assert_eq!(out.shape(), &[4, 1, 16, 16]);
    assert!(out.data().iter().all(|&v| v > -1.0 && v < 1.0));
    // Row 3 repeats row 0.
    assert_eq!(&out.data()[..256], &out.data()[3 * 256..]);
    let again = g.generate(&p, &z4).unwrap();
    assert_eq!(out, again);
}

#[test]
fn discriminator_is_per_sample() {
    let c = cfg(32, 4, 8);
    let d = Discriminator::new(&c).unwrap();
    let p: ParameterSet<f64> = d.init(&mut rng(9));
    let x = Array::new(vec![3, 1, 32, 32], (0..3 * 1024).map(|i| ((i * 37 % 101) as f64 / 50.0) - 1.0).collect()).unwrap();
    let s = d.score(&p, &x).unwrap();
    assert_eq!(s.shape(), &[3, 1]);
    assert!(s.data().iter().all(|v| v.is_finite()));
    let perm = Array::concat_batch(&[&x.slice_batch(2, 3), &x.slice_batch(0, 1), &x.slice_batch(1, 2)]).unwrap();
    let sp = d.score(&p, &perm).unwrap();
    assert_eq!(sp.data(), &[s.data()[2], s.data()[0], s.data()[1]]);
    let dup = Array::concat_batch(&[&x.slice_batch(1, 2), &x.slice_batch(1, 2)]).unwrap();
    let sd = d.score(&p, &dup).unwrap();
    assert_eq!(sd.data()[0], sd.data()[1]);
    let wrong = Array::<f64>::zeros(&[1, 1, 16, 16]);
    assert!(matches!(d.score(&p, &wrong), Err(Error::ShapeMismatch(_))));
}

#[test]
fn latent_shape_checks() {
    let c = cfg(8, 4, 6);
    let g = Generator::new(&c).unwrap();
    let p: ParameterSet<f64> = g.init(&mut rng(1));
    let z = LatentBatch { values: Array::<f64>::zeros(&[2, 5]) };
    assert!(matches!(g.generate(&p, &z), Err(Error::ShapeMismatch(_))));
    let other: ParameterSet<f64> = Generator::new(&cfg(8, 4, 7)).unwrap().init(&mut rng(1));
    let z = sample_latent(2, &c, &mut rng(2));
    assert_eq!(g.generate(&other, &z).unwrap_err(), Error::LayoutMismatch);
}

#[test]
fn sample_latent_is_deterministic_standard_normal() {
    let c = cfg(8, 4, 10);
    let a = sample_latent::<f32, _>(5, &c, &mut rng(3));
    let b = sample_latent::<f32, _>(5, &c, &mut rng(3));
    assert_eq!(a.values.shape(), &[5, 10]);
    assert_eq!(a, b);
    // Mean of N = 10⁵ standard normal draws lies within 4σ/√N = 0.01265.
    let big = sample_latent::<f64, _>(10_000, &c, &mut rng(4));
    let n = big.values.len() as f64;
    let mean = big.values.data().iter().sum::<f64>() / n;
    assert!(mean.abs() < 4.0 / n.sqrt(), "{mean}");
    let var = big.values.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    assert!((var - 1.0).abs() < 0.02, "{var}");
}

/// Finite-difference check of d(sum of critic(generator(z)))/d(generator params).
#[test]
fn generator_gradient_matches_finite_differences() {
    let c = cfg(8, 2, 3);
    let g = Generator::new(&c).unwrap();
    let d = Discriminator::new(&c).unwrap();
    let pg: ParameterSet<f64> = g.init(&mut rng(11));
    let pd: ParameterSet<f64> = d.init(&mut rng(12));
    let z = sample_latent::<f64, _>(2, &c, &mut rng(13));
    let value = |flat: &Array<f64>| {
        let p = ParameterSet::from_flat(pg.layout().clone(), flat.data().to_vec()).unwrap();
        let mut gr = Graph::new();
        let zv = gr.constant(z.values.clone());
        let img = g.forward(&mut gr, &p, false, zv).unwrap();
        let s = d.forward(&mut gr, &pd, false, img).unwrap();
        let m = gr.mean(s);
        gr.value(m).item()
    };
    let mut gr = Graph::new();
    let bound = pg.bind(&mut gr, true);
    let zv = gr.constant(z.values.clone());
    let img = g.forward_bound(&mut gr, &bound, zv).unwrap();
    let s = d.forward(&mut gr, &pd, false, img).unwrap();
    let m = gr.mean(s);
    let grads = gr.backward(m, false).unwrap();
    let analytic = bound.flat_grads(&grads);
    let fd = finite_difference_gradient(value, &Array::new(vec![pg.len()], pg.flat().to_vec()).unwrap(), 1e-6);
    let err = relative_error(&analytic, fd.data());
    assert!(err < 1e-5, "{err}");
}

#[test]
fn critic_input_gradient_matches_finite_differences() {
    let c = cfg(8, 2, 3);
    let d = Discriminator::new(&c).unwrap();
    let pd: ParameterSet<f64> = d.init(&mut rng(21));
    let x = Array::new(vec![2, 1, 8, 8], (0..128).map(|i| ((i * 53 % 97) as f64 / 48.5) - 1.0).collect()).unwrap();
    let mut gr = Graph::new();
    let xv = gr.param(x.clone());
    let s = d.forward(&mut gr, &pd, false, xv).unwrap();
    let m = gr.sum(s);
    let grads = gr.backward(m, false).unwrap();
    let fd = finite_difference_gradient(|probe| d.score(&pd, probe).unwrap().data().iter().sum(), &x, 1e-6);
    let err = relative_error(grads.get(xv).unwrap().data(), fd.data());
    assert!(err < 1e-6, "{err}");
}

#[test]
fn critic_parameter_gradient_matches_finite_differences() {
    let c = cfg(8, 2, 3);
    let d = Discriminator::new(&c).unwrap();
    let pd: ParameterSet<f64> = d.init(&mut rng(31));
    let x = Array::new(vec![2, 1, 8, 8], (0..128).map(|i| ((i * 29 % 89) as f64 / 44.5) - 1.0).collect()).unwrap();
    let mut gr = Graph::new();
    let bound = pd.bind(&mut gr, true);
    let xv = gr.constant(x.clone());
    let s = d.forward_bound(&mut gr, &bound, xv).unwrap();
    let m = gr.mean(s);
    let grads = gr.backward(m, false).unwrap();
    let analytic = bound.flat_grads(&grads);
    let fd = finite_difference_gradient(
        |flat| {
            let p = ParameterSet::from_flat(pd.layout().clone(), flat.data().to_vec()).unwrap();
            d.score(&p, &x).unwrap().data().iter().sum::<f64>() / 2.0
        },
        &Array::new(vec![pd.len()], pd.flat().to_vec()).unwrap(),
        1e-6,
    );
    let err = relative_error(&analytic, fd.data());
    assert!(err < 1e-6, "{err}");
}
