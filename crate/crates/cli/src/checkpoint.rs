//! FIGR checkpoint files.
//!
//! Little-endian layout: magic `FIGR`, version u32, 32-byte config
//! fingerprint, u32-prefixed canonical config text, outer step u64, RNG seed
//! u64 and three u128 stream word positions, then `Φ_d` and `Φ_g` (each a u64
//! count followed by f32 values) and for each of them the Adam timestep u64,
//! first moments and second moments as f32.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use figr_core::meta::{AdamConfig, AdamState, MetaState, Networks};
use figr_core::nn::ParameterSet;
use figr_core::rng::TrainRngs;

use crate::config::{fingerprint_of, hex, RunConfig};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"FIGR";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub fingerprint: [u8; 32],
    pub config_text: String,
    pub step: u64,
    pub rng_seed: u64,
    pub rng_positions: [u128; 3],
    pub phi_d: Vec<f32>,
    pub phi_g: Vec<f32>,
    pub adam_d: AdamState<f32>,
    pub adam_g: AdamState<f32>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| anyhow!("bad checkpoint: truncated at byte {}", self.pos))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.array()?))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(n.checked_mul(4).ok_or_else(|| anyhow!("bad checkpoint: length overflow"))?)?;
        Ok(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4"))).collect())
    }
}

fn put_f32s(out: &mut Vec<u8>, values: &[f32]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

impl Checkpoint {
    pub fn capture(cfg: &RunConfig, state: &MetaState<f32>, rngs: &TrainRngs) -> Self {
        Checkpoint {
            fingerprint: cfg.fingerprint(),
            config_text: cfg.canonical_text(),
            step: state.step,
            rng_seed: rngs.seed(),
            rng_positions: rngs.positions(),
            phi_d: state.phi_d.flat().to_vec(),
            phi_g: state.phi_g.flat().to_vec(),
            adam_d: state.adam_d.clone(),
            adam_g: state.adam_g.clone(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.fingerprint);
        out.extend_from_slice(&(self.config_text.len() as u32).to_le_bytes());
        out.extend_from_slice(self.config_text.as_bytes());
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&self.rng_seed.to_le_bytes());
        for p in self.rng_positions {
            out.extend_from_slice(&p.to_le_bytes());
        }
        for phi in [&self.phi_d, &self.phi_g] {
            out.extend_from_slice(&(phi.len() as u64).to_le_bytes());
            put_f32s(&mut out, phi);
        }
        for adam in [&self.adam_d, &self.adam_g] {
            out.extend_from_slice(&adam.t.to_le_bytes());
            put_f32s(&mut out, &adam.m);
            put_f32s(&mut out, &adam.v);
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor { bytes, pos: 0 };
        let magic = r.take(4).map_err(|_| anyhow!("bad checkpoint: missing FIGR magic"))?;
        if magic != CHECKPOINT_MAGIC {
            bail!("bad checkpoint: magic {:?}, expected FIGR", String::from_utf8_lossy(magic));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            bail!("bad checkpoint: unsupported version {version}");
        }
        let fingerprint: [u8; 32] = r.array()?;
        let len = r.u32()? as usize;
        let config_text = std::str::from_utf8(r.take(len)?)
            .map_err(|e| anyhow!("bad checkpoint: config text: {e}"))?
            .to_owned();
        if fingerprint_of(&config_text) != fingerprint {
            bail!("bad checkpoint: config text does not match fingerprint {}", hex(&fingerprint));
        }
        let step = r.u64()?;
        let rng_seed = r.u64()?;
        let rng_positions = [r.u128()?, r.u128()?, r.u128()?];
        let nd = r.u64()? as usize;
        let phi_d = r.f32s(nd)?;
        let ng = r.u64()? as usize;
        let phi_g = r.f32s(ng)?;
        let mut adam = |n: usize| -> Result<AdamState<f32>> {
            let t = r.u64()?;
            Ok(AdamState { t, m: r.f32s(n)?, v: r.f32s(n)? })
        };
        let adam_d = adam(nd)?;
        let adam_g = adam(ng)?;
        if r.pos != bytes.len() {
            bail!("bad checkpoint: {} trailing bytes", bytes.len() - r.pos);
        }
        Ok(Checkpoint { fingerprint, config_text, step, rng_seed, rng_positions, phi_d, phi_g, adam_d, adam_g })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.encode()).with_context(|| format!("writing checkpoint {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
        Self::decode(&bytes).with_context(|| format!("in checkpoint {}", path.display()))
    }

    /// The run configuration recorded in the checkpoint, with default
    /// run length, cadences and output directory.
    pub fn config(&self) -> Result<RunConfig> {
        RunConfig::parse(&self.config_text).context("bad checkpoint: embedded config")
    }

    pub fn params(&self, nets: &Networks) -> Result<(ParameterSet<f32>, ParameterSet<f32>)> {
        let d = ParameterSet::from_flat(nets.discriminator.layout().clone(), self.phi_d.clone())
            .map_err(|e| anyhow!("bad checkpoint: critic parameters: {e}"))?;
        let g = ParameterSet::from_flat(nets.generator.layout().clone(), self.phi_g.clone())
            .map_err(|e| anyhow!("bad checkpoint: generator parameters: {e}"))?;
        Ok((d, g))
    }

    pub fn meta_state(&self, nets: &Networks, adam: AdamConfig) -> Result<MetaState<f32>> {
        let (phi_d, phi_g) = self.params(nets)?;
        Ok(MetaState { phi_d, phi_g, adam_d: self.adam_d.clone(), adam_g: self.adam_g.clone(), adam, step: self.step })
    }

    pub fn rngs(&self) -> TrainRngs {
        TrainRngs::restore(self.rng_seed, self.rng_positions)
    }
}
