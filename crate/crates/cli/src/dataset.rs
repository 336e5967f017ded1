use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use figr_core::data::{decode_shard, parse_idx, read_pgm, synth_glyph_dataset, RawClass, TaskDataset};

use crate::config::{DatasetFormat, RunConfig};

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

/// IDX records grouped by label, one class per distinct label named by it.
pub fn idx_classes(images: &[u8], labels: &[u8]) -> Result<Vec<RawClass>> {
    let mut by_label: BTreeMap<u8, Vec<_>> = BTreeMap::new();
    for (img, label) in parse_idx(images, labels)? {
        by_label.entry(label).or_default().push(img);
    }
    Ok(by_label.into_iter().map(|(label, images)| RawClass { name: label.to_string(), images }).collect())
}

/// Builds the configured dataset at the model's image size and applies the
/// validation split.
pub fn load_dataset(cfg: &RunConfig) -> Result<TaskDataset> {
    let d = &cfg.dataset;
    let size = cfg.model.image_size;
    let ds = match d.format {
        DatasetFormat::Synth => synth_glyph_dataset(d.synth_classes, d.synth_per_class, size, d.synth_seed)?,
        DatasetFormat::Fgr8 => {
            let classes = decode_shard(&read(&d.path)?).with_context(|| format!("in shard {}", d.path.display()))?;
            TaskDataset::from_raw(&classes, size)?
        }
        DatasetFormat::Idx => {
            let classes = idx_classes(&read(&d.path)?, &read(&d.labels_path)?)
                .with_context(|| format!("in IDX files {} / {}", d.path.display(), d.labels_path.display()))?;
            TaskDataset::from_raw(&classes, size)?
        }
    };
    let ds = if d.validation_classes.is_empty() {
        ds.split_classes(d.n_validation, d.split_seed)?
    } else {
        ds.with_validation_classes(&d.validation_classes)?
    };
    Ok(ds)
}

/// One class read from a directory of PGM files, sorted by file name.
pub fn pgm_class(dir: &Path) -> Result<RawClass> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
        .collect();
    files.sort();
    let images = files
        .iter()
        .map(|f| read_pgm(&read(f)?).with_context(|| format!("in {}", f.display())))
        .collect::<Result<Vec<_>>>()?;
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(RawClass { name, images })
}
