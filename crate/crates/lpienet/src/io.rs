//! Raw tensor file format LPT1.
//!
//! Layout: magic bytes `LPT1`, four unsigned 32-bit little-endian dims
//! (n, c, h, w), then n*c*h*w IEEE-754 little-endian 32-bit floats in
//! row-major (n, c, h, w) order. Round trips are bit-exact.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Shape, Tensor};

pub const LPT1_MAGIC: &[u8; 4] = b"LPT1";

pub fn encode_lpt1(t: &Tensor<f32>) -> Vec<u8> {
    let s = t.shape();
    let mut buf = Vec::with_capacity(4 + 16 + 4 * t.len());
    buf.extend_from_slice(LPT1_MAGIC);
    for d in [s.n, s.c, s.h, s.w] {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode_lpt1(bytes: &[u8], origin: &str) -> Result<Tensor<f32>> {
    if bytes.len() < 20 {
        return Err(Error::format(origin, "file shorter than the LPT1 header"));
    }
    if &bytes[0..4] != LPT1_MAGIC {
        return Err(Error::format(origin, "bad magic (expected LPT1)"));
    }
    let dim = |i: usize| {
        u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize
    };
    let shape = Shape::new(dim(0), dim(1), dim(2), dim(3));
    let count = shape
        .checked_len()
        .ok_or_else(|| Error::format(origin, format!("dimension overflow in {shape}")))?;
    let expected = 20 + 4 * count;
    if bytes.len() != expected {
        return Err(Error::format(
            origin,
            format!(
                "payload is {} bytes, shape {} needs {}",
                bytes.len(),
                shape,
                expected
            ),
        ));
    }
    let mut data = Vec::with_capacity(count);
    for i in 0..count {
        let off = 20 + 4 * i;
        data.push(f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()));
    }
    Tensor::from_vec(shape, data)
}

pub fn read_lpt1(path: &Path) -> Result<Tensor<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    decode_lpt1(&bytes, &path.display().to_string())
}

pub fn write_lpt1(path: &Path, t: &Tensor<f32>) -> Result<()> {
    write_atomic(path, &encode_lpt1(t))
}

/// Write via a sibling temp file and rename, so failures never leave a
/// partial output at the destination.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let display = path.display().to_string();
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("out")
    ));
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&display, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&display, e))?;
        f.sync_all().map_err(|e| Error::io(&display, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(&display, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_exact() {
        let t = Tensor::<f32>::from_fn(Shape::new(2, 3, 4, 5), |n, c, y, x| {
            ((n + 1) * (c + 2)) as f32 * 0.1 - (y as f32) * 0.01 + (x as f32) * 1e-6
        });
        let bytes = encode_lpt1(&t);
        let back = decode_lpt1(&bytes, "mem").unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn bad_magic_rejected() {
        let t = Tensor::<f32>::zeros(Shape::new(1, 1, 1, 1));
        let mut bytes = encode_lpt1(&t);
        bytes[0] = b'X';
        assert!(decode_lpt1(&bytes, "mem").is_err());
    }

    #[test]
    fn truncated_rejected() {
        let t = Tensor::<f32>::zeros(Shape::new(1, 1, 2, 2));
        let bytes = encode_lpt1(&t);
        assert!(decode_lpt1(&bytes[..bytes.len() - 1], "mem").is_err());
        assert!(decode_lpt1(&bytes[..10], "mem").is_err());
    }

    #[test]
    fn dimension_overflow_rejected() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(LPT1_MAGIC);
        for _ in 0..4 {
            bytes.extend_from_slice(&u32::MAX.to_le_bytes());
        }
        assert!(decode_lpt1(&bytes, "mem").is_err());
    }
}
