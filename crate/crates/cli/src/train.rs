use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use figr_core::data::{write_pgm, RawImage, Split, TaskDataset};
use figr_core::eval::montage;
use figr_core::meta::{figr_generate, meta_step, MetaState, Networks, TrainRecord};
use figr_core::rng::{stream, InnerRngs, Purpose, TrainRngs};
use figr_core::{Array, Precision};
use log::info;
use rand::Rng;
use rand::seq::index;

use crate::checkpoint::Checkpoint;
use crate::config::{hex, RunConfig};
use crate::dataset::load_dataset;

pub const LOG_HEADER: &str = "step,task_id,critic_loss,gen_loss,delta_d_norm,delta_g_norm,seconds";

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Total outer steps, overriding `meta_steps`.
    pub steps: Option<u64>,
    pub resume: Option<PathBuf>,
    /// Output directory, overriding `output_dir`.
    pub out: Option<PathBuf>,
}

pub fn checkpoint_path(out: &Path, step: u64) -> PathBuf {
    out.join("checkpoints").join(format!("step-{step:08}.figr"))
}

pub fn sample_path(out: &Path, step: u64) -> PathBuf {
    out.join("samples").join(format!("step-{step:08}.pgm"))
}

fn csv_row(r: &TrainRecord) -> String {
    format!(
        "{},{},{},{},{},{},{:.6}",
        r.step, r.task_id, r.critic_loss, r.gen_loss, r.delta_d_norm, r.delta_g_norm, r.seconds
    )
}

/// Conditioning row and two rows of samples for one fixed class, drawn from
/// the sample stream so the cadence never perturbs training.
pub fn progress_montage(
    nets: &Networks,
    state: &MetaState<f32>,
    ds: &TaskDataset,
    cfg: &RunConfig,
) -> Result<RawImage> {
    let class = ds.ids(Split::Validation).first().or_else(|| ds.ids(Split::Train).first()).copied();
    let Some(class) = class else { bail!("dataset has no classes") };
    let mut rng = stream(cfg.seed, Purpose::Sample);
    let n = cfg.inner.n;
    let count = ds.class(class).images.len();
    let picks: Vec<usize> = if count >= n {
        index::sample(&mut rng, count, n).into_vec()
    } else {
        (0..n).map(|i| i % count).collect()
    };
    let x: Array<f32> = ds.stack(class, &picks);
    let mut inner = InnerRngs::new(rng.random());
    let gen = figr_generate(nets, &state.phi_d, &state.phi_g, &x, &cfg.inner, &cfg.loss, &mut inner, 2 * n)?;
    Ok(montage(&Array::concat_batch(&[&x, &gen])?, n, 1)?)
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub output_dir: PathBuf,
    pub final_step: u64,
    pub checkpoints: Vec<PathBuf>,
}

pub fn train(cfg: &RunConfig, opts: &TrainOptions) -> Result<TrainSummary> {
    if cfg.model.precision != Precision::Single {
        bail!("training runs in single precision (checkpoints store 32-bit parameters); set precision = single");
    }
    let out = opts.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let total = opts.steps.unwrap_or(cfg.meta_steps);
    let nets = Networks::new(&cfg.model)?;
    let ds = load_dataset(cfg)?;
    for sub in ["checkpoints", "samples"] {
        std::fs::create_dir_all(out.join(sub)).with_context(|| format!("creating {}", out.join(sub).display()))?;
    }

    let (mut state, mut rngs) = match &opts.resume {
        Some(path) => {
            let ck = Checkpoint::load(path)?;
            if ck.fingerprint != cfg.fingerprint() {
                bail!(
                    "config fingerprint {} does not match checkpoint {} ({}); refusing to resume with different settings",
                    hex(&cfg.fingerprint()),
                    hex(&ck.fingerprint),
                    path.display()
                );
            }
            info!("resuming from {} at step {}", path.display(), ck.step);
            (ck.meta_state(&nets, cfg.adam)?, ck.rngs())
        }
        None => {
            let (d, g) = nets.init::<f32>(cfg.seed);
            (MetaState::new(d, g, cfg.adam), TrainRngs::new(cfg.seed))
        }
    };

    let mut checkpoints = Vec::new();
    let mut save = |state: &MetaState<f32>, rngs: &TrainRngs| -> Result<()> {
        let path = checkpoint_path(&out, state.step);
        Checkpoint::capture(cfg, state, rngs).save(&path)?;
        checkpoints.push(path);
        Ok(())
    };
    if opts.resume.is_none() {
        save(&state, &rngs)?;
    }

    let log_path = out.join("train_log.csv");
    let mut log = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&log_path)
        .with_context(|| format!("opening {}", log_path.display()))?;
    if log.metadata()?.len() == 0 {
        writeln!(log, "{LOG_HEADER}")?;
    }

    while state.step < total {
        let rec = meta_step(&nets, &mut state, &ds, &cfg.inner, &cfg.loss, &mut rngs)?;
        writeln!(log, "{}", csv_row(&rec))?;
        if rec.step % cfg.checkpoint_every == 0 || rec.step == total {
            save(&state, &rngs)?;
            info!("step {} critic {:.4} generator {:.4}", rec.step, rec.critic_loss, rec.gen_loss);
        }
        if cfg.sample_every > 0 && rec.step % cfg.sample_every == 0 {
            let img = progress_montage(&nets, &state, &ds, cfg)?;
            std::fs::write(sample_path(&out, rec.step), write_pgm(&img))?;
        }
    }
    log.flush()?;
    Ok(TrainSummary { output_dir: out, final_step: state.step, checkpoints })
}
