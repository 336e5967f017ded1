use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use figr_core::data::{decode_shard, encode_shard, read_class_dirs, RawClass};

/// Packs one class per subdirectory of `input` into an FGR8 shard.
pub fn pack(input: &Path, output: &Path) -> Result<Vec<RawClass>> {
    let classes = read_class_dirs(input).with_context(|| format!("reading classes from {}", input.display()))?;
    std::fs::write(output, encode_shard(&classes)?).with_context(|| format!("writing {}", output.display()))?;
    Ok(classes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShardStats {
    pub classes: usize,
    pub images: usize,
    pub min: usize,
    pub median: f64,
    pub max: usize,
    /// `(class size, fraction of classes with at most that many images)`.
    pub cumulative: Vec<(usize, f64)>,
}

pub fn stats_of(classes: &[RawClass]) -> ShardStats {
    let mut sizes: Vec<usize> = classes.iter().map(|c| c.images.len()).collect();
    sizes.sort_unstable();
    let n = sizes.len();
    let median = match n {
        0 => 0.0,
        _ if n % 2 == 1 => sizes[n / 2] as f64,
        _ => (sizes[n / 2 - 1] + sizes[n / 2]) as f64 / 2.0,
    };
    let mut cumulative = Vec::new();
    for (i, &s) in sizes.iter().enumerate() {
        if sizes.get(i + 1) != Some(&s) {
            cumulative.push((s, (i + 1) as f64 / n as f64));
        }
    }
    ShardStats {
        classes: n,
        images: sizes.iter().sum(),
        min: sizes.first().copied().unwrap_or(0),
        median,
        max: sizes.last().copied().unwrap_or(0),
        cumulative,
    }
}

pub fn stats(shard: &Path) -> Result<ShardStats> {
    let bytes = std::fs::read(shard).with_context(|| format!("reading {}", shard.display()))?;
    let classes = decode_shard(&bytes).with_context(|| format!("in shard {}", shard.display()))?;
    Ok(stats_of(&classes))
}

pub fn stats_text(s: &ShardStats) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "classes: {}", s.classes);
    let _ = writeln!(out, "images: {}", s.images);
    let _ = writeln!(out, "class size min/median/max: {}/{}/{}", s.min, s.median, s.max);
    let _ = writeln!(out, "class_size,cumulative_fraction");
    for (size, frac) in &s.cumulative {
        let _ = writeln!(out, "{size},{frac:.6}");
    }
    out
}
