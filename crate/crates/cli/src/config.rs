//! Flat `key = value` run configuration with a content fingerprint.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use figr_core::losses::{LossConfig, LossMode};
use figr_core::meta::{AdamConfig, InnerConfig};
use figr_core::nn::ModelConfig;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    /// MNIST-style IDX image and label files; classes are the labels.
    Idx,
    /// FGR8 shard.
    Fgr8,
    /// Procedural glyph classes.
    Synth,
}

impl DatasetFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetFormat::Idx => "idx",
            DatasetFormat::Fgr8 => "fgr8",
            DatasetFormat::Synth => "synth",
        }
    }
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "idx" => Ok(DatasetFormat::Idx),
            "fgr8" => Ok(DatasetFormat::Fgr8),
            "synth" => Ok(DatasetFormat::Synth),
            other => Err(format!("unknown dataset format `{other}` (idx|fgr8|synth)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetConfig {
    pub format: DatasetFormat,
    /// Image file for `idx`, shard for `fgr8`.
    pub path: PathBuf,
    /// Label file for `idx`.
    pub labels_path: PathBuf,
    pub synth_classes: usize,
    pub synth_per_class: usize,
    pub synth_seed: u64,
    pub split_seed: u64,
    pub n_validation: usize,
    /// Explicit validation class ids; overrides the seeded split when set.
    pub validation_classes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub inner: InnerConfig,
    pub loss: LossConfig,
    pub adam: AdamConfig,
    pub dataset: DatasetConfig,
    pub meta_steps: u64,
    pub checkpoint_every: u64,
    pub sample_every: u64,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            inner: InnerConfig::default(),
            loss: LossConfig::default(),
            adam: AdamConfig::default(),
            dataset: DatasetConfig {
                format: DatasetFormat::Synth,
                path: PathBuf::new(),
                labels_path: PathBuf::new(),
                synth_classes: 200,
                synth_per_class: 20,
                synth_seed: 1,
                split_seed: 0,
                n_validation: 10,
                validation_classes: Vec::new(),
            },
            meta_steps: 2000,
            checkpoint_every: 500,
            sample_every: 500,
            output_dir: PathBuf::from("figr-run"),
            seed: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| anyhow!("`{key}`: cannot parse `{value}`: {e}"))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| parse(key, s)).collect()
}

impl RunConfig {
    /// Parses config text; unknown and repeated keys are errors, absent keys
    /// keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| anyhow!("line {}: expected `key = value`", lineno + 1))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_owned()) {
                bail!("line {}: duplicate key `{key}`", lineno + 1);
            }
            cfg.set(key, value).with_context(|| format!("line {}", lineno + 1))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let d = &mut self.dataset;
        match key {
            "image_size" => self.model.image_size = parse(key, v)?,
            "latent_dim" => self.model.latent_dim = parse(key, v)?,
            "base_width" => self.model.base_width = parse(key, v)?,
            "n_blocks" => self.model.n_blocks = parse(key, v)?,
            "precision" => self.model.precision = parse(key, v)?,
            "k" => self.inner.k = parse(key, v)?,
            "n" => self.inner.n = parse(key, v)?,
            "inner_lr" => self.inner.inner_lr = parse(key, v)?,
            "loss" => self.loss.mode = parse::<LossMode>(key, v)?,
            "gp_lambda" => self.loss.gp_lambda = parse(key, v)?,
            "outer_lr" => self.adam.lr = parse(key, v)?,
            "beta1" => self.adam.beta1 = parse(key, v)?,
            "beta2" => self.adam.beta2 = parse(key, v)?,
            "adam_eps" => self.adam.eps = parse(key, v)?,
            "dataset_format" => d.format = parse(key, v)?,
            "dataset_path" => d.path = PathBuf::from(v),
            "labels_path" => d.labels_path = PathBuf::from(v),
            "synth_classes" => d.synth_classes = parse(key, v)?,
            "synth_per_class" => d.synth_per_class = parse(key, v)?,
            "synth_seed" => d.synth_seed = parse(key, v)?,
            "split_seed" => d.split_seed = parse(key, v)?,
            "n_validation" => d.n_validation = parse(key, v)?,
            "validation_classes" => d.validation_classes = parse_list(key, v)?,
            "meta_steps" => self.meta_steps = parse(key, v)?,
            "checkpoint_every" => self.checkpoint_every = parse(key, v)?,
            "sample_every" => self.sample_every = parse(key, v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "seed" => self.seed = parse(key, v)?,
            other => bail!("unknown key `{other}`"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.inner.validate()?;
        self.loss.validate()?;
        self.adam.validate()?;
        let d = &self.dataset;
        match d.format {
            DatasetFormat::Synth if d.synth_classes == 0 || d.synth_per_class == 0 => {
                bail!("synth_classes and synth_per_class must be positive")
            }
            DatasetFormat::Fgr8 if d.path.as_os_str().is_empty() => bail!("dataset_format = fgr8 needs dataset_path"),
            DatasetFormat::Idx if d.path.as_os_str().is_empty() || d.labels_path.as_os_str().is_empty() => {
                bail!("dataset_format = idx needs dataset_path and labels_path")
            }
            _ => {}
        }
        if self.checkpoint_every == 0 {
            bail!("checkpoint_every must be positive");
        }
        Ok(())
    }

    /// Every field that influences the trajectory of a run, one `key = value`
    /// line each in a fixed order. Run length, cadences and the output
    /// directory are excluded so a run can be extended or relocated.
    pub fn canonical_text(&self) -> String {
        let (m, i, l, a, d) = (&self.model, &self.inner, &self.loss, &self.adam, &self.dataset);
        let classes: Vec<String> = d.validation_classes.iter().map(|c| c.to_string()).collect();
        let fields: [(&str, String); 24] = [
            ("image_size", m.image_size.to_string()),
            ("latent_dim", m.latent_dim.to_string()),
            ("base_width", m.base_width.to_string()),
            ("n_blocks", m.n_blocks.to_string()),
            ("precision", m.precision.as_str().to_owned()),
            ("k", i.k.to_string()),
            ("n", i.n.to_string()),
            ("inner_lr", format!("{:?}", i.inner_lr)),
            ("loss", l.mode.as_str().to_owned()),
            ("gp_lambda", format!("{:?}", l.gp_lambda)),
            ("outer_lr", format!("{:?}", a.lr)),
            ("beta1", format!("{:?}", a.beta1)),
            ("beta2", format!("{:?}", a.beta2)),
            ("adam_eps", format!("{:?}", a.eps)),
            ("dataset_format", d.format.as_str().to_owned()),
            ("dataset_path", d.path.display().to_string()),
            ("labels_path", d.labels_path.display().to_string()),
            ("synth_classes", d.synth_classes.to_string()),
            ("synth_per_class", d.synth_per_class.to_string()),
            ("synth_seed", d.synth_seed.to_string()),
            ("split_seed", d.split_seed.to_string()),
            ("n_validation", d.n_validation.to_string()),
            ("validation_classes", classes.join(",")),
            ("seed", self.seed.to_string()),
        ];
        let mut out = String::new();
        for (k, v) in fields {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// The full config as parseable text, canonical fields first.
    pub fn to_text(&self) -> String {
        let mut out = self.canonical_text();
        let _ = writeln!(out, "meta_steps = {}", self.meta_steps);
        let _ = writeln!(out, "checkpoint_every = {}", self.checkpoint_every);
        let _ = writeln!(out, "sample_every = {}", self.sample_every);
        let _ = writeln!(out, "output_dir = {}", self.output_dir.display());
        out
    }

    pub fn fingerprint(&self) -> [u8; 32] {
        fingerprint_of(&self.canonical_text())
    }
}

pub fn fingerprint_of(canonical: &str) -> [u8; 32] {
    Sha256::digest(canonical.as_bytes()).into()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
