//! Single-channel float maps: magic `SCFD`, `u32` width and height, then
//! row-major little-endian `f32` values.

use std::fs;
use std::path::Path;

use caninesynth_core::image::Image;

use crate::error::{format_err, IoContext, Result};
use crate::formats::write_atomic;

pub const MAGIC: &[u8; 4] = b"SCFD";
pub const EXTENSION: &str = "scfd";

pub fn encode(image: &Image<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * image.data().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(image.width() as u32).to_le_bytes());
    out.extend_from_slice(&(image.height() as u32).to_le_bytes());
    for v in image.data() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Image<f64>> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(format_err(path, "not a float map (bad magic)"));
    }
    let w = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if Some(body.len()) != w.checked_mul(h).and_then(|n| n.checked_mul(4)) {
        return Err(format_err(
            path,
            format!("expected {w}x{h} values, body has {} bytes", body.len()),
        ));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok(Image::from_vec(w, h, data)?)
}

pub fn save(image: &Image<f64>, path: &Path) -> Result<()> {
    write_atomic(path, &encode(image))
}

pub fn load(path: &Path) -> Result<Image<f64>> {
    decode(&fs::read(path).at(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_rejects() {
        let img = Image::from_fn(3, 2, |x, y| x as f64 * 0.25 + y as f64);
        let bytes = encode(&img);
        assert_eq!(decode(&bytes, Path::new("a")).unwrap(), img);
        assert!(decode(&bytes[..bytes.len() - 4], Path::new("a")).is_err());
        assert!(decode(b"XXXX\0\0\0\0\0\0\0\0", Path::new("a")).is_err());
    }
}
