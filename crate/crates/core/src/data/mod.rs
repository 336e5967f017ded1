//! Dataset ingestion and task sampling.

mod dataset;
mod idx;
mod pgm;
mod resize;
mod shard;
mod synth;

pub use dataset::{ImageClass, Split, TaskDataset};
pub use idx::{parse_idx, write_idx, IMAGE_MAGIC, LABEL_MAGIC};
pub use pgm::{read_pgm, write_pgm};
pub use resize::bilinear_resize;
pub use shard::{decode_shard, encode_shard, read_class_dirs, RawClass, SHARD_MAGIC, SHARD_VERSION};
pub use synth::synth_glyph_dataset;

use crate::error::{Error, Result};

/// 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl RawImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::CountMismatch(format!(
                "{}x{} image with {} pixels",
                width,
                height,
                pixels.len()
            )));
        }
        Ok(RawImage { width, height, pixels })
    }
}

/// Maps an 8-bit value onto [−1, 1].
pub fn normalize(v: u8) -> f64 {
    v as f64 / 127.5 - 1.0
}

/// Inverse of [`normalize`], rounding and clamping to 8 bits.
pub fn denormalize(x: f64) -> u8 {
    (127.5 * (x + 1.0)).round().clamp(0.0, 255.0) as u8
}

/// Bounds-checked cursor over a byte buffer.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8], what: &'static str) -> Self {
        Reader { bytes, pos: 0, what }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::TruncatedFile(format!("{}: need {} bytes at offset {}, have {}", self.what, n, self.pos, self.bytes.len()))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn be_u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn le_u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub(crate) fn le_u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}
