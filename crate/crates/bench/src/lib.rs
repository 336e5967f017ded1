//! Benchmark fixtures shared by the criterion benches.

use figr_core::data::{synth_glyph_dataset, TaskDataset};
use figr_core::meta::Networks;
use figr_core::nn::ModelConfig;

/// The desk-scale networks: 16×16 images, latent 32, base width 16.
pub fn desk_config() -> ModelConfig {
    ModelConfig { image_size: 16, latent_dim: 32, base_width: 16, n_blocks: 1, ..ModelConfig::default() }
}

pub fn desk_networks() -> Networks {
    Networks::new(&desk_config()).expect("valid desk config")
}

pub fn desk_dataset() -> TaskDataset {
    synth_glyph_dataset(200, 20, 16, 1).and_then(|d| d.split_classes(10, 1)).expect("synthetic dataset")
}
