use std::path::Path;

use super::{read_pgm, RawImage, Reader};
use crate::error::{Error, Result};

pub const SHARD_MAGIC: &[u8; 4] = b"FGR8";
pub const SHARD_VERSION: u32 = 1;

/// A named class of raw images sharing one geometry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawClass {
    pub name: String,
    pub images: Vec<RawImage>,
}

/// Little-endian FGR8 layout: magic, version u32, class count u32, then per
/// class a u16-prefixed UTF-8 name, image count u32, height u16, width u16
/// and the raw pixels of every image.
pub fn encode_shard(classes: &[RawClass]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(SHARD_MAGIC);
    out.extend_from_slice(&SHARD_VERSION.to_le_bytes());
    out.extend_from_slice(&(classes.len() as u32).to_le_bytes());
    for class in classes {
        let first = class.images.first().ok_or_else(|| Error::Malformed(format!("class `{}` has no images", class.name)))?;
        let (h, w) = (first.height, first.width);
        let name = class.name.as_bytes();
        if name.len() > u16::MAX as usize || h > u16::MAX as usize || w > u16::MAX as usize {
            return Err(Error::Malformed(format!("class `{}` does not fit the shard header", class.name)));
        }
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name);
        out.extend_from_slice(&(class.images.len() as u32).to_le_bytes());
        out.extend_from_slice(&(h as u16).to_le_bytes());
        out.extend_from_slice(&(w as u16).to_le_bytes());
        for im in &class.images {
            if im.height != h || im.width != w {
                return Err(Error::Malformed(format!(
                    "class `{}` mixes {}x{} and {}x{} images",
                    class.name, h, w, im.height, im.width
                )));
            }
            out.extend_from_slice(&im.pixels);
        }
    }
    Ok(out)
}

pub fn decode_shard(bytes: &[u8]) -> Result<Vec<RawClass>> {
    let mut r = Reader::new(bytes, "shard");
    let magic = r.take(4).map_err(|_| Error::BadMagic {
        expected: "FGR8".into(),
        found: String::from_utf8_lossy(bytes).into_owned(),
    })?;
    if magic != SHARD_MAGIC {
        return Err(Error::BadMagic { expected: "FGR8".into(), found: String::from_utf8_lossy(magic).into_owned() });
    }
    let version = r.le_u32()?;
    if version != SHARD_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let n_classes = r.le_u32()? as usize;
    let mut classes = Vec::with_capacity(n_classes.min(1 << 16));
    for _ in 0..n_classes {
        let len = r.le_u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?).map_err(|e| Error::Malformed(format!("class name: {e}")))?.to_owned();
        let count = r.le_u32()? as usize;
        let height = r.le_u16()? as usize;
        let width = r.le_u16()? as usize;
        let mut images = Vec::with_capacity(count.min(1 << 16));
        for _ in 0..count {
            images.push(RawImage { width, height, pixels: r.take(width * height)?.to_vec() });
        }
        classes.push(RawClass { name, images });
    }
    if r.remaining() != 0 {
        return Err(Error::Malformed(format!("{} trailing bytes after last class", r.remaining())));
    }
    Ok(classes)
}

/// Reads one class per subdirectory of `root` (sorted by name), each holding
/// binary PGM files (sorted by file name).
pub fn read_class_dirs(root: &Path) -> Result<Vec<RawClass>> {
    let mut dirs: Vec<_> =
        std::fs::read_dir(root)?.filter_map(|e| e.ok()).map(|e| e.path()).filter(|p| p.is_dir()).collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut classes = Vec::with_capacity(dirs.len());
    for dir in dirs {
        let mut files: Vec<_> = std::fs::read_dir(&dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("pgm")))
            .collect();
        files.sort();
        let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        if files.is_empty() {
            return Err(Error::Malformed(format!("class directory `{name}` has no PGM files")));
        }
        let images = files.iter().map(|f| read_pgm(&std::fs::read(f)?)).collect::<Result<Vec<_>>>()?;
        classes.push(RawClass { name, images });
    }
    Ok(classes)
}
