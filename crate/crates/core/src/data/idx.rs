use super::{RawImage, Reader};
use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

fn expect_magic(r: &mut Reader, expected: u32) -> Result<()> {
    let found = r.be_u32()?;
    if found != expected {
        return Err(Error::BadMagic { expected: format!("{expected:#010x}"), found: format!("{found:#010x}") });
    }
    Ok(())
}

/// Parses a big-endian IDX image file and its label file into labelled
/// images.
pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<Vec<(RawImage, u8)>> {
    let mut ri = Reader::new(images, "idx images");
    expect_magic(&mut ri, IMAGE_MAGIC)?;
    let count = ri.be_u32()? as usize;
    let rows = ri.be_u32()? as usize;
    let cols = ri.be_u32()? as usize;

    let mut rl = Reader::new(labels, "idx labels");
    expect_magic(&mut rl, LABEL_MAGIC)?;
    let label_count = rl.be_u32()? as usize;
    if label_count != count {
        return Err(Error::CountMismatch(format!("{count} images but {label_count} labels")));
    }

    let per = rows * cols;
    let body = ri.take(count * per)?;
    let label_bytes = rl.take(count)?;
    Ok(body
        .chunks_exact(per.max(1))
        .take(count)
        .zip(label_bytes)
        .map(|(px, &l)| (RawImage { width: cols, height: rows, pixels: px.to_vec() }, l))
        .collect())
}

/// Encodes images (all the same size) and labels as an IDX pair.
pub fn write_idx(images: &[RawImage], labels: &[u8]) -> Result<(Vec<u8>, Vec<u8>)> {
    if images.len() != labels.len() {
        return Err(Error::CountMismatch(format!("{} images but {} labels", images.len(), labels.len())));
    }
    let (rows, cols) = images.first().map_or((0, 0), |im| (im.height, im.width));
    let mut img = Vec::with_capacity(16 + images.len() * rows * cols);
    img.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    img.extend_from_slice(&(images.len() as u32).to_be_bytes());
    img.extend_from_slice(&(rows as u32).to_be_bytes());
    img.extend_from_slice(&(cols as u32).to_be_bytes());
    for im in images {
        if im.height != rows || im.width != cols {
            return Err(Error::Malformed(format!("IDX images must share one size, got {}x{}", im.height, im.width)));
        }
        img.extend_from_slice(&im.pixels);
    }
    let mut lab = Vec::with_capacity(8 + labels.len());
    lab.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    lab.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    lab.extend_from_slice(labels);
    Ok((img, lab))
}
