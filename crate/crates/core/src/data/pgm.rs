use super::RawImage;
use crate::error::{Error, Result};

/// Reads a binary PGM (P5, maxval 255). Header tokens are whitespace
/// separated; `#` starts a comment running to the end of the line.
pub fn read_pgm(bytes: &[u8]) -> Result<RawImage> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        let found = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(Error::BadMagic { expected: "P5".into(), found });
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(Error::TruncatedFile("pgm header".into())),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| b.is_ascii_digit()) {
            pos += 1;
        }
        let text = std::str::from_utf8(&bytes[start..pos]).unwrap_or_default();
        *field = text.parse().map_err(|_| Error::Malformed(format!("pgm header field at byte {start}")))?;
    }
    // Exactly one whitespace byte separates the header from the raster.
    if !bytes.get(pos).is_some_and(|b| b.is_ascii_whitespace()) {
        return Err(Error::Malformed("pgm header not terminated by whitespace".into()));
    }
    pos += 1;
    let [width, height, maxval] = fields;
    if maxval != 255 {
        return Err(Error::Malformed(format!("pgm maxval {maxval}, only 255 is supported")));
    }
    let n = width * height;
    let raster = bytes.get(pos..pos + n).ok_or_else(|| Error::TruncatedFile(format!("pgm raster of {n} bytes")))?;
    RawImage::new(width, height, raster.to_vec())
}

pub fn write_pgm(img: &RawImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}
