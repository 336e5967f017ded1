//! Wasserstein critic and generator losses with gradient penalty, plus the
//! non-saturating binary cross-entropy pair.

use rand::Rng;

use crate::autodiff::{Array, Graph, Var};
use crate::error::{Error, Result};
use crate::real::Real;

/// Floor added under the square root of the input-gradient norm.
pub const GP_NORM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossMode {
    #[default]
    WassersteinGp,
    Bce,
}

impl LossMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LossMode::WassersteinGp => "wasserstein_gp",
            LossMode::Bce => "bce",
        }
    }
}

impl std::str::FromStr for LossMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wasserstein_gp" => Ok(LossMode::WassersteinGp),
            "bce" => Ok(LossMode::Bce),
            other => Err(format!("unknown loss mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    /// Gradient-penalty coefficient; ignored in BCE mode.
    pub gp_lambda: f64,
    pub mode: LossMode,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { gp_lambda: 10.0, mode: LossMode::WassersteinGp }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gp_lambda >= 0.0) || !self.gp_lambda.is_finite() {
            return Err(Error::InvalidConfig(format!("gp_lambda must be finite and >= 0, got {}", self.gp_lambda)));
        }
        Ok(())
    }
}

fn check_same_batch<T: Real>(g: &Graph<T>, a: Var, b: Var) -> Result<()> {
    if g.shape(a) != g.shape(b) {
        return Err(Error::ShapeMismatch(format!("scores {:?} vs {:?}", g.shape(a), g.shape(b))));
    }
    Ok(())
}

/// `mean(fake) − mean(real)`.
pub fn critic_loss<T: Real>(g: &mut Graph<T>, real_scores: Var, fake_scores: Var) -> Result<Var> {
    check_same_batch(g, real_scores, fake_scores)?;
    let mf = g.mean(fake_scores);
    let mr = g.mean(real_scores);
    g.sub(mf, mr)
}

/// `−mean(fake)`.
pub fn generator_loss<T: Real>(g: &mut Graph<T>, fake_scores: Var) -> Var {
    let m = g.mean(fake_scores);
    g.neg(m)
}

/// `λ · mean_i (‖∇ D(x̂_i)‖₂ − 1)²` with `x̂_i = εᵢ·xᵢ + (1 − εᵢ)·yᵢ`,
/// `εᵢ ~ U(0, 1)` drawn per sample from `rng`.
///
/// `critic` records the critic on `g` for a batch of inputs. The interpolates
/// enter as leaves, so the penalty's gradient flows only into whatever
/// trainable leaves `critic` uses.
pub fn gradient_penalty<T, F, R>(
    g: &mut Graph<T>,
    mut critic: F,
    real: &Array<T>,
    fake: &Array<T>,
    lambda: f64,
    rng: &mut R,
) -> Result<Var>
where
    T: Real,
    F: FnMut(&mut Graph<T>, Var) -> Result<Var>,
    R: Rng + ?Sized,
{
    if real.shape() != fake.shape() || real.shape().is_empty() {
        return Err(Error::ShapeMismatch(format!("real {:?} vs fake {:?}", real.shape(), fake.shape())));
    }
    let batch = real.shape()[0];
    let per = real.len() / batch.max(1);
    let eps: Vec<T> = (0..batch).map(|_| T::of(rng.random::<f64>())).collect();
    let mut mixed = real.clone();
    for (i, e) in eps.iter().enumerate() {
        let rows = i * per..(i + 1) * per;
        for (m, &f) in mixed.data_mut()[rows.clone()].iter_mut().zip(&fake.data()[rows]) {
            *m = *e * *m + (T::one() - *e) * f;
        }
    }

    let x_hat = g.param(mixed);
    let scores = critic(g, x_hat)?;
    let total = g.sum(scores);
    let first = g.backward_wrt(total, &[x_hat], true).map_err(|e| match e {
        Error::DeadGraph => Error::DoubleBackwardUnavailable("graph already consumed".into()),
        other => other,
    })?;
    let grad = match first.node(x_hat) {
        Some(v) => v,
        None => g.constant(Array::zeros(real.shape())),
    };
    let sq = g.square(grad);
    let norm2 = g.sum_per_sample(sq);
    let floored = g.add_scalar(norm2, GP_NORM_FLOOR);
    let norm = g.sqrt(floored);
    let dev = g.add_scalar(norm, -1.0);
    let dev2 = g.square(dev);
    let mean = g.mean(dev2);
    Ok(g.scale(mean, lambda))
}

/// Discriminator and generator BCE losses on pre-sigmoid logits:
/// `d = BCE(real → 1) + BCE(fake → 0)`, `g = BCE(fake → 1)`.
pub fn bce_gan_losses<T: Real>(g: &mut Graph<T>, real_scores: Var, fake_scores: Var) -> Result<(Var, Var)> {
    check_same_batch(g, real_scores, fake_scores)?;
    let neg_real = g.neg(real_scores);
    let real_term = g.softplus(neg_real);
    let real_term = g.mean(real_term);
    let fake_term = g.softplus(fake_scores);
    let fake_term = g.mean(fake_term);
    let d_loss = g.add(real_term, fake_term)?;
    let neg_fake = g.neg(fake_scores);
    let g_term = g.softplus(neg_fake);
    let g_loss = g.mean(g_term);
    Ok((d_loss, g_loss))
}
