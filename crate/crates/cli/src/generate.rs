use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use figr_core::data::{denormalize, encode_shard, write_pgm, RawClass, RawImage, Split, TaskDataset};
use figr_core::eval::montage;
use figr_core::meta::{figr_generate, InnerConfig, Networks};
use figr_core::rng::{stream, InnerRngs, Purpose};
use figr_core::Array;
use rand::seq::index;

use crate::checkpoint::Checkpoint;
use crate::dataset::{load_dataset, pgm_class};

/// Where the conditioning images come from.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskSource {
    /// A class of the checkpoint's dataset, by id or name; the first
    /// validation class when absent.
    Class(Option<String>),
    /// A directory of PGM images.
    Images(PathBuf),
}

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    pub source: TaskSource,
    pub n: usize,
    pub k: usize,
    pub count: usize,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Debug, Clone)]
pub struct GenerateOutput {
    pub montage: PathBuf,
    pub shard: PathBuf,
}

fn resolve_class(ds: &TaskDataset, name: Option<&str>) -> Result<usize> {
    match name {
        None => match ds.ids(Split::Validation).first().or_else(|| ds.ids(Split::Train).first()) {
            Some(&id) => Ok(id),
            None => bail!("dataset has no classes"),
        },
        Some(s) => {
            if let Some(id) = ds.classes().iter().position(|c| c.name == s) {
                return Ok(id);
            }
            match s.parse::<usize>() {
                Ok(id) if id < ds.classes().len() => Ok(id),
                _ => bail!("no class named or numbered `{s}`"),
            }
        }
    }
}

fn to_raw(images: &Array<f32>) -> Result<Vec<RawImage>> {
    let s = images.shape();
    let (h, w) = (s[2], s[3]);
    images
        .data()
        .chunks(h * w)
        .map(|px| Ok(RawImage::new(w, h, px.iter().map(|&v| denormalize(v as f64)).collect())?))
        .collect()
}

/// Adapts the checkpoint's meta-parameters to `n` images of one task and
/// writes `montage.pgm` (conditioning row first, then `count` samples, `n`
/// per row) and `generated.fgr8` into the output directory.
pub fn generate(checkpoint: &Path, opts: &GenerateOptions) -> Result<GenerateOutput> {
    if opts.count == 0 {
        bail!("--count must be at least 1");
    }
    let ck = Checkpoint::load(checkpoint)?;
    let cfg = ck.config()?;
    let nets = Networks::new(&cfg.model)?;
    let (phi_d, phi_g) = ck.params(&nets)?;
    let (ds, class) = match &opts.source {
        TaskSource::Class(name) => {
            let ds = load_dataset(&cfg)?;
            let class = resolve_class(&ds, name.as_deref())?;
            (ds, class)
        }
        TaskSource::Images(dir) => {
            let raw = pgm_class(dir)?;
            if raw.images.is_empty() {
                bail!("no PGM images in {}", dir.display());
            }
            (TaskDataset::from_raw(&[raw], cfg.model.image_size)?, 0)
        }
    };
    let available = ds.class(class).images.len();
    if available < opts.n {
        bail!("insufficient images: task `{}` has {available}, --n needs {}", ds.class(class).name, opts.n);
    }
    let inner = InnerConfig { k: opts.k, n: opts.n, ..cfg.inner };
    let mut pick = stream(opts.seed, Purpose::Sample);
    let picks = index::sample(&mut pick, available, opts.n).into_vec();
    let x: Array<f32> = ds.stack(class, &picks);
    let mut rngs = InnerRngs::new(opts.seed);
    let generated = figr_generate(&nets, &phi_d, &phi_g, &x, &inner, &cfg.loss, &mut rngs, opts.count)?;

    std::fs::create_dir_all(&opts.out).with_context(|| format!("creating {}", opts.out.display()))?;
    let out = GenerateOutput { montage: opts.out.join("montage.pgm"), shard: opts.out.join("generated.fgr8") };
    let sheet = montage(&Array::concat_batch(&[&x, &generated])?, opts.n, 1)?;
    std::fs::write(&out.montage, write_pgm(&sheet))?;
    let shard = encode_shard(&[RawClass { name: "generated".into(), images: to_raw(&generated)? }])?;
    std::fs::write(&out.shard, shard)?;
    Ok(out)
}
