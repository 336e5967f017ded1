use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;
use figr_core::data::{Split, TaskDataset};
use figr_core::eval::{evaluate_class, EvalProtocol, EvalReport};
use figr_core::meta::Networks;
use figr_core::Error;
use log::warn;

use crate::checkpoint::Checkpoint;
use crate::dataset::load_dataset;

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub trials: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { trials: 10, samples: 64, seed: 0 }
    }
}

/// Seed of the random-init baseline for one class. Every class gets its own
/// fresh initialization, distinct from the run's.
pub fn baseline_seed(run_seed: u64, class: usize) -> u64 {
    !run_seed ^ (class as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Scores the checkpoint against fresh random initializations on the first
/// `trials` validation classes.
pub fn evaluate(checkpoint: &Path, opts: &EvalOptions) -> Result<(TaskDataset, Vec<EvalReport>)> {
    let ck = Checkpoint::load(checkpoint)?;
    let cfg = ck.config()?;
    let nets = Networks::new(&cfg.model)?;
    let (phi_d, phi_g) = ck.params(&nets)?;
    let ds = load_dataset(&cfg)?;
    let ids = ds.ids(Split::Validation);
    if ids.is_empty() {
        return Err(Error::EmptySplit.into());
    }
    let trials = if opts.trials > ids.len() {
        warn!("--trials {} exceeds the {} validation classes; evaluating {}", opts.trials, ids.len(), ids.len());
        ids.len()
    } else {
        opts.trials
    };
    let protocol = EvalProtocol { inner: cfg.inner, loss: cfg.loss, samples: opts.samples, seed: opts.seed };
    let reports = ids[..trials]
        .iter()
        .map(|&c| {
            let (base_d, base_g) = nets.init::<f32>(baseline_seed(cfg.seed, c));
            evaluate_class(&nets, (&phi_d, &phi_g), (&base_d, &base_g), &ds, c, &protocol)
        })
        .collect::<figr_core::Result<Vec<_>>>()?;
    Ok((ds, reports))
}

pub const EVAL_HEADER: &str = "task_id,class,mmd2,baseline_mmd2,nn_distance";

pub fn eval_csv(ds: &TaskDataset, reports: &[EvalReport]) -> String {
    let mut out = format!("{EVAL_HEADER}\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6}",
            r.task_id,
            ds.class(r.task_id).name,
            r.mmd2,
            r.baseline_mmd2,
            r.nn_distance
        );
    }
    out
}
