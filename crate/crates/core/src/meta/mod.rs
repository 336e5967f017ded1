//! Reptile meta-training: K-step adaptation of parameter copies on one task,
//! the outer Adam update along `Φ − W`, and few-shot generation.

mod optim;

pub use optim::{adam_step, sgd_step, AdamConfig, AdamState};

use std::time::Instant;

use rand::Rng;

use crate::autodiff::{Array, Graph};
use crate::data::{Split, TaskDataset};
use crate::error::{Error, Result};
use crate::losses::{bce_gan_losses, critic_loss, generator_loss, gradient_penalty, LossConfig, LossMode};
use crate::nn::{params_delta, sample_latent, Discriminator, Generator, LatentBatch, ModelConfig, ParameterSet};
use crate::real::Real;
use crate::rng::{stream, InnerRngs, Purpose, TrainRngs};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerConfig {
    /// Adaptation iterations, each one critic step then one generator step.
    pub k: usize,
    /// Images per task.
    pub n: usize,
    pub inner_lr: f64,
}

impl Default for InnerConfig {
    fn default() -> Self {
        InnerConfig { k: 10, n: 4, inner_lr: 1e-4 }
    }
}

impl InnerConfig {
    /// `inner_lr = 0` is accepted as the degenerate fixed-point case.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 || !(self.inner_lr >= 0.0) || !self.inner_lr.is_finite() {
            return Err(Error::InvalidConfig(format!("inner loop needs k >= 1, n >= 1, inner_lr >= 0; got {self:?}")));
        }
        Ok(())
    }
}

/// The generator and critic architectures for one model configuration.
#[derive(Debug, Clone)]
pub struct Networks {
    pub generator: Generator,
    pub discriminator: Discriminator,
}

impl Networks {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        Ok(Networks { generator: Generator::new(cfg)?, discriminator: Discriminator::new(cfg)? })
    }

    pub fn config(&self) -> &ModelConfig {
        self.generator.config()
    }

    /// Fresh `(Φ_d, Φ_g)` from the init stream of `seed`.
    pub fn init<T: Real>(&self, seed: u64) -> (ParameterSet<T>, ParameterSet<T>) {
        let mut rng = stream(seed, Purpose::Init);
        let d = self.discriminator.init(&mut rng);
        let g = self.generator.init(&mut rng);
        (d, g)
    }
}

/// Outer-loop state: meta-parameters and their persistent Adam moments.
#[derive(Debug, Clone)]
pub struct MetaState<T> {
    pub phi_d: ParameterSet<T>,
    pub phi_g: ParameterSet<T>,
    pub adam_d: AdamState<T>,
    pub adam_g: AdamState<T>,
    pub adam: AdamConfig,
    pub step: u64,
}

impl<T: Real> PartialEq for MetaState<T> {
    fn eq(&self, o: &Self) -> bool {
        self.phi_d == o.phi_d
            && self.phi_g == o.phi_g
            && self.adam_d == o.adam_d
            && self.adam_g == o.adam_g
            && self.adam == o.adam
            && self.step == o.step
    }
}

impl<T: Real> MetaState<T> {
    pub fn new(phi_d: ParameterSet<T>, phi_g: ParameterSet<T>, adam: AdamConfig) -> Self {
        let (nd, ng) = (phi_d.len(), phi_g.len());
        MetaState { phi_d, phi_g, adam_d: AdamState::zeros(nd), adam_g: AdamState::zeros(ng), adam, step: 0 }
    }
}

/// Per-meta-step log line.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRecord {
    pub step: u64,
    pub task_id: usize,
    pub critic_loss: f64,
    pub gen_loss: f64,
    pub delta_d_norm: f64,
    pub delta_g_norm: f64,
    pub seconds: f64,
}

/// Flat gradients of every inner step, in order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InnerTrace<T> {
    pub d_grads: Vec<Vec<T>>,
    pub g_grads: Vec<Vec<T>>,
}

#[derive(Debug, Clone)]
pub struct Adapted<T> {
    pub w_d: ParameterSet<T>,
    pub w_g: ParameterSet<T>,
    /// Losses of the last inner iteration.
    pub critic_loss: f64,
    pub gen_loss: f64,
    pub trace: Option<InnerTrace<T>>,
}

/// Critic loss and its flat gradient at `w_d`, for real images `x` and
/// fakes generated by `w_g` from `z`.
pub fn critic_gradient<T: Real, R: Rng + ?Sized>(
    nets: &Networks,
    w_d: &ParameterSet<T>,
    w_g: &ParameterSet<T>,
    x: &Array<T>,
    z: &LatentBatch<T>,
    loss: &LossConfig,
    interpolation_rng: &mut R,
) -> Result<(f64, Vec<T>)> {
    let fake = nets.generator.generate(w_g, z)?;
    let disc = &nets.discriminator;
    if !w_d.has_layout(disc.layout()) {
        return Err(Error::LayoutMismatch);
    }
    let mut g = Graph::new();
    let p = w_d.bind(&mut g, true);
    let xr = g.constant(x.clone());
    let xf = g.constant(fake.clone());
    let real_scores = disc.forward_bound(&mut g, &p, xr)?;
    let fake_scores = disc.forward_bound(&mut g, &p, xf)?;
    let total = match loss.mode {
        LossMode::WassersteinGp => {
            let base = critic_loss(&mut g, real_scores, fake_scores)?;
            let gp = gradient_penalty(
                &mut g,
                |g: &mut Graph<T>, v| disc.forward_bound(g, &p, v),
                x,
                &fake,
                loss.gp_lambda,
                interpolation_rng,
            )?;
            g.add(base, gp)?
        }
        LossMode::Bce => bce_gan_losses(&mut g, real_scores, fake_scores)?.0,
    };
    let value = g.value(total).item().as_f64();
    let grads = g.backward_wrt(total, p.vars(), false)?;
    Ok((value, p.flat_grads(&grads)))
}

/// Generator loss and its flat gradient at `w_g` against the critic `w_d`.
pub fn generator_gradient<T: Real>(
    nets: &Networks,
    w_d: &ParameterSet<T>,
    w_g: &ParameterSet<T>,
    z: &LatentBatch<T>,
    loss: &LossConfig,
) -> Result<(f64, Vec<T>)> {
    let gen = &nets.generator;
    if !w_g.has_layout(gen.layout()) {
        return Err(Error::LayoutMismatch);
    }
    let mut g = Graph::new();
    let p = w_g.bind(&mut g, true);
    let zv = g.constant(z.values.clone());
    let fake = gen.forward_bound(&mut g, &p, zv)?;
    let scores = nets.discriminator.forward(&mut g, w_d, false, fake)?;
    let total = match loss.mode {
        LossMode::WassersteinGp => generator_loss(&mut g, scores),
        LossMode::Bce => {
            let neg = g.neg(scores);
            let sp = g.softplus(neg);
            g.mean(sp)
        }
    };
    let value = g.value(total).item().as_f64();
    let grads = g.backward_wrt(total, p.vars(), false)?;
    Ok((value, p.flat_grads(&grads)))
}

/// K alternating SGD steps on copies of `Φ_d`, `Φ_g` with the same real
/// images `x_task` at every iteration and fresh latents before each step.
#[allow(clippy::too_many_arguments)]
pub fn inner_loop<T: Real>(
    nets: &Networks,
    phi_d: &ParameterSet<T>,
    phi_g: &ParameterSet<T>,
    x_task: &Array<T>,
    cfg: &InnerConfig,
    loss: &LossConfig,
    rngs: &mut InnerRngs,
    record_trace: bool,
) -> Result<Adapted<T>> {
    cfg.validate()?;
    let batch = x_task.shape().first().copied().unwrap_or(0);
    if batch == 0 {
        return Err(Error::EmptySet);
    }
    let mcfg = nets.config();
    let mut w_d = phi_d.clone();
    let mut w_g = phi_g.clone();
    let mut trace = record_trace.then(InnerTrace::default);
    let (mut d_loss, mut g_loss) = (f64::NAN, f64::NAN);
    for _ in 0..cfg.k {
        let z = sample_latent(batch, mcfg, &mut rngs.latent);
        let (l, gd) = critic_gradient(nets, &w_d, &w_g, x_task, &z, loss, &mut rngs.interpolation)?;
        w_d = sgd_step(&w_d, &gd, cfg.inner_lr)?;
        d_loss = l;

        let z = sample_latent(batch, mcfg, &mut rngs.latent);
        let (l, gg) = generator_gradient(nets, &w_d, &w_g, &z, loss)?;
        w_g = sgd_step(&w_g, &gg, cfg.inner_lr)?;
        g_loss = l;

        if let Some(t) = trace.as_mut() {
            t.d_grads.push(gd);
            t.g_grads.push(gg);
        }
    }
    Ok(Adapted { w_d, w_g, critic_loss: d_loss, gen_loss: g_loss, trace })
}

fn norm<T: Real>(v: &[T]) -> f64 {
    v.iter().map(|x| x.as_f64() * x.as_f64()).sum::<f64>().sqrt()
}

/// One outer iteration: sample a training task and `n` of its images, adapt,
/// then step both meta-parameter sets with Adam along `Φ − W`.
pub fn meta_step<T: Real>(
    nets: &Networks,
    state: &mut MetaState<T>,
    dataset: &TaskDataset,
    cfg: &InnerConfig,
    loss: &LossConfig,
    rngs: &mut TrainRngs,
) -> Result<TrainRecord> {
    let start = Instant::now();
    if dataset.classes().is_empty() {
        return Err(Error::EmptyDataset);
    }
    let task = dataset.sample_task(Split::Train, &mut rngs.task)?;
    let x = dataset.sample_images::<T, _>(task, cfg.n, &mut rngs.task);
    let out = inner_loop(nets, &state.phi_d, &state.phi_g, &x, cfg, loss, &mut rngs.inner, false)?;
    let delta_d = params_delta(&state.phi_d, &out.w_d)?;
    let delta_g = params_delta(&state.phi_g, &out.w_g)?;
    adam_step(&state.adam, &mut state.adam_d, &mut state.phi_d, &delta_d)?;
    adam_step(&state.adam, &mut state.adam_g, &mut state.phi_g, &delta_g)?;
    state.step += 1;
    Ok(TrainRecord {
        step: state.step,
        task_id: task,
        critic_loss: out.critic_loss,
        gen_loss: out.gen_loss,
        delta_d_norm: norm(&delta_d),
        delta_g_norm: norm(&delta_g),
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Adapts copies of `Φ` to `x_task`, then generates `count` images from
/// fresh latents with the adapted generator.
#[allow(clippy::too_many_arguments)]
pub fn figr_generate<T: Real>(
    nets: &Networks,
    phi_d: &ParameterSet<T>,
    phi_g: &ParameterSet<T>,
    x_task: &Array<T>,
    cfg: &InnerConfig,
    loss: &LossConfig,
    rngs: &mut InnerRngs,
    count: usize,
) -> Result<Array<T>> {
    if count == 0 {
        return Err(Error::InvalidConfig("count must be at least 1".into()));
    }
    let out = inner_loop(nets, phi_d, phi_g, x_task, cfg, loss, rngs, false)?;
    let z = sample_latent(count, nets.config(), &mut rngs.latent);
    nets.generator.generate(&out.w_g, &z)
}
