//! Double-precision finite-difference checks of every trainable gradient
//! path on small random networks.

use std::fmt::Write as _;

use anyhow::Result;
use figr_core::autodiff::relative_error;
use figr_core::losses::{bce_gan_losses, critic_loss, gradient_penalty, LossConfig};
use figr_core::meta::{critic_gradient, generator_gradient, Networks};
use figr_core::nn::{sample_latent, LatentBatch, ModelConfig, ParameterSet};
use figr_core::{Array, Graph, Precision};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOLERANCE: f64 = 1e-4;
/// Central-difference steps, largest first.
const STEPS: [f64; 4] = [1e-5, 1e-6, 1e-7, 1e-8];
/// Agreement required between two step sizes to accept an estimate.
const STEP_AGREEMENT: f64 = 1e-6;
/// Coordinates probed per check and trial.
const PROBES: usize = usize::MAX;

pub const CHECKS: [&str; 6] = [
    "generator params",
    "critic params",
    "critic input",
    "gradient penalty (double backward)",
    "critic objective with penalty",
    "bce critic loss",
];

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub trials: usize,
    /// Worst relative error per entry of [`CHECKS`].
    pub max_errors: [f64; 6],
}

impl GradcheckReport {
    pub fn max_error(&self) -> f64 {
        self.max_errors.iter().copied().fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_errors.iter().all(|e| *e < TOLERANCE)
    }

    pub fn text(&self) -> String {
        let mut out = String::new();
        for (name, err) in CHECKS.iter().zip(self.max_errors) {
            let verdict = if err < TOLERANCE { "ok" } else { "FAIL" };
            let _ = writeln!(out, "{name:<36} max relative error {err:.3e}  {verdict}");
        }
        let _ = writeln!(out, "{} trials, max relative error {:.3e} (tolerance {TOLERANCE:e})", self.trials, self.max_error());
        out
    }
}

fn with_flat(p: &ParameterSet<f64>, flat: &[f64]) -> ParameterSet<f64> {
    ParameterSet::from_flat(p.layout().clone(), flat.to_vec()).expect("same layout")
}

/// Central differences of `f` at `x` along the chosen coordinates. The
/// critic's input gradient is piecewise smooth in its parameters (PReLU
/// kinks), so each coordinate takes the largest step whose estimate agrees
/// with the next smaller one.
fn probe(mut f: impl FnMut(&[f64]) -> Result<f64>, x: &[f64], coords: &[usize]) -> Result<Vec<f64>> {
    let mut buf = x.to_vec();
    let mut central = |i: usize, h: f64| -> Result<f64> {
        buf[i] = x[i] + h;
        let up = f(&buf)?;
        buf[i] = x[i] - h;
        let down = f(&buf)?;
        buf[i] = x[i];
        Ok((up - down) / (2.0 * h))
    };
    coords
        .iter()
        .map(|&i| {
            let mut prev = central(i, STEPS[0])?;
            for &h in &STEPS[1..] {
                let next = central(i, h)?;
                if (next - prev).abs() <= STEP_AGREEMENT * prev.abs().max(1.0) {
                    return Ok(prev);
                }
                prev = next;
            }
            Ok(prev)
        })
        .collect()
}

fn pick<R: Rng>(rng: &mut R, len: usize) -> Vec<usize> {
    let mut c = index::sample(rng, len, len.min(PROBES)).into_vec();
    c.sort_unstable();
    c
}

fn select(v: &[f64], coords: &[usize]) -> Vec<f64> {
    coords.iter().map(|&i| v[i]).collect()
}

struct Trial {
    nets: Networks,
    d: ParameterSet<f64>,
    g: ParameterSet<f64>,
    real: Array<f64>,
    z: LatentBatch<f64>,
    rng: ChaCha8Rng,
}

impl Trial {
    fn new(seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = ModelConfig {
            image_size: 8,
            channels: 1,
            latent_dim: rng.random_range(2..=4),
            base_width: rng.random_range(1..=3),
            n_blocks: rng.random_range(1..=2),
            precision: Precision::Double,
        };
        let nets = Networks::new(&cfg)?;
        let (d, g) = nets.init::<f64>(rng.random());
        let b = rng.random_range(1..=3);
        let real = Array::new(vec![b, 1, 8, 8], (0..b * 64).map(|_| rng.random_range(-1.0..1.0)).collect())?;
        let z = sample_latent(b, &cfg, &mut rng);
        Ok(Trial { nets, d, g, real, z, rng })
    }

    fn fake(&self, g: &ParameterSet<f64>) -> Result<Array<f64>> {
        Ok(self.nets.generator.generate(g, &self.z)?)
    }

    fn generator_params(&mut self) -> Result<(Vec<f64>, Vec<f64>)> {
        let loss = LossConfig::default();
        let (_, grad) = generator_gradient(&self.nets, &self.d, &self.g, &self.z, &loss)?;
        let coords = pick(&mut self.rng, grad.len());
        let fd = probe(
            |flat| {
                let scores = self.nets.discriminator.score(&self.d, &self.fake(&with_flat(&self.g, flat))?)?;
                Ok(-scores.data().iter().sum::<f64>() / scores.len() as f64)
            },
            self.g.flat(),
            &coords,
        )?;
        Ok((select(&grad, &coords), fd))
    }

    /// Gradient of `objective(graph, bound critic, real, fake)` with respect to
    /// the critic parameters, against finite differences of its value.
    fn critic_params_of(
        &mut self,
        objective: impl Fn(&mut Graph<f64>, &figr_core::nn::Bound, &Array<f64>, &Array<f64>, &mut ChaCha8Rng) -> Result<figr_core::Var>,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let fake = self.fake(&self.g)?;
        let coords = pick(&mut self.rng, self.d.len());
        let draws = ChaCha8Rng::seed_from_u64(self.rng.random());
        let eval = |d: &ParameterSet<f64>, grad: bool| -> Result<(f64, Vec<f64>)> {
            let mut gr = Graph::new();
            let p = d.bind(&mut gr, true);
            let out = objective(&mut gr, &p, &self.real, &fake, &mut draws.clone())?;
            let value = gr.value(out).item();
            let flat = if grad { p.flat_grads(&gr.backward_wrt(out, p.vars(), false)?) } else { Vec::new() };
            Ok((value, flat))
        };
        let (_, grad) = eval(&self.d, true)?;
        let fd = probe(|flat| Ok(eval(&with_flat(&self.d, flat), false)?.0), self.d.flat(), &coords)?;
        Ok((select(&grad, &coords), fd))
    }

    fn critic_input(&mut self) -> Result<(Vec<f64>, Vec<f64>)> {
        let weights: Vec<f64> = (0..self.real.shape()[0]).map(|_| self.rng.random_range(-1.0..1.0)).collect();
        let disc = &self.nets.discriminator;
        let mut gr = Graph::new();
        let xv = gr.param(self.real.clone());
        let s = disc.forward(&mut gr, &self.d, false, xv)?;
        let w = gr.constant(Array::new(vec![weights.len(), 1], weights.clone())?);
        let ws = gr.mul(s, w)?;
        let total = gr.sum(ws);
        let grads = gr.backward_wrt(total, &[xv], false)?;
        let grad = grads.get(xv).expect("input gradient").data().to_vec();
        let coords = pick(&mut self.rng, grad.len());
        let shape = self.real.shape().to_vec();
        let fd = probe(
            |flat| {
                let scores = disc.score(&self.d, &Array::new(shape.clone(), flat.to_vec())?)?;
                Ok(scores.data().iter().zip(&weights).map(|(a, b)| a * b).sum())
            },
            self.real.data(),
            &coords,
        )?;
        Ok((select(&grad, &coords), fd))
    }

    fn full_critic_objective(&mut self) -> Result<(Vec<f64>, Vec<f64>)> {
        let loss = LossConfig::default();
        let draws = ChaCha8Rng::seed_from_u64(self.rng.random());
        let (_, grad) = critic_gradient(&self.nets, &self.d, &self.g, &self.real, &self.z, &loss, &mut draws.clone())?;
        let coords = pick(&mut self.rng, grad.len());
        let fd = probe(
            |flat| {
                let d = with_flat(&self.d, flat);
                Ok(critic_gradient(&self.nets, &d, &self.g, &self.real, &self.z, &loss, &mut draws.clone())?.0)
            },
            self.d.flat(),
            &coords,
        )?;
        Ok((select(&grad, &coords), fd))
    }
}

/// Runs every check on `trials` random configurations. `flip_sign` negates
/// one analytic gradient to confirm the checker detects a wrong sign.
pub fn gradcheck(trials: usize, seed: u64, flip_sign: bool) -> Result<GradcheckReport> {
    let mut max_errors = [0.0f64; 6];
    for t in 0..trials {
        let mut trial = Trial::new(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(t as u64))?;
        let disc = trial.nets.discriminator.clone();
        let lambda = LossConfig::default().gp_lambda;
        let results = [
            trial.generator_params()?,
            trial.critic_params_of(|gr, p, real, fake, _| {
                let r = gr.constant(real.clone());
                let f = gr.constant(fake.clone());
                let sr = disc.forward_bound(gr, p, r)?;
                let sf = disc.forward_bound(gr, p, f)?;
                Ok(critic_loss(gr, sr, sf)?)
            })?,
            trial.critic_input()?,
            trial.critic_params_of(|gr, p, real, fake, rng| {
                Ok(gradient_penalty(gr, |g: &mut Graph<f64>, v| disc.forward_bound(g, p, v), real, fake, lambda, rng)?)
            })?,
            trial.full_critic_objective()?,
            trial.critic_params_of(|gr, p, real, fake, _| {
                let r = gr.constant(real.clone());
                let f = gr.constant(fake.clone());
                let sr = disc.forward_bound(gr, p, r)?;
                let sf = disc.forward_bound(gr, p, f)?;
                Ok(bce_gan_losses(gr, sr, sf)?.0)
            })?,
        ];
        for (i, (mut analytic, fd)) in results.into_iter().enumerate() {
            if flip_sign && i == 2 {
                analytic.iter_mut().for_each(|v| *v = -*v);
            }
            max_errors[i] = max_errors[i].max(relative_error(&analytic, &fd));
        }
    }
    Ok(GradcheckReport { trials, max_errors })
}
