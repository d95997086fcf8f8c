//! Checkpoint file format LPCK.
//!
//! Layout (all integers little-endian): magic `LPCK`, u32 format version,
//! u32 config-blob length followed by UTF-8 `key=value` text, u32 tensor
//! count, then per tensor a u16 name length + UTF-8 name, four u32 dims
//! (n, c, h, w) and the float32 payload. Model parameters are stored under
//! their canonical paths; optimizer moments ride along under `opt.m.` /
//! `opt.v.` prefixes and training counters live in the config blob.

use std::fs;
use std::path::Path;

use crate::config::KvMap;
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::model::{LpienetConfig, Model};
use crate::tensor::{Shape, Tensor};

pub const LPCK_MAGIC: &[u8; 4] = b"LPCK";
pub const LPCK_VERSION: u32 = 1;

/// Raw checkpoint contents: a config/metadata text blob plus named tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointData {
    pub meta: KvMap,
    pub tensors: Vec<(String, Tensor<f32>)>,
}

pub fn encode_lpck(data: &CheckpointData) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    buf.extend_from_slice(LPCK_MAGIC);
    buf.extend_from_slice(&LPCK_VERSION.to_le_bytes());
    let cfg = data.meta.to_text();
    buf.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    buf.extend_from_slice(cfg.as_bytes());
    buf.extend_from_slice(&(data.tensors.len() as u32).to_le_bytes());
    for (name, t) in &data.tensors {
        if name.len() > u16::MAX as usize {
            return Err(Error::Config(format!("tensor name too long: {name}")));
        }
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        let s = t.shape();
        for d in [s.n, s.c, s.h, s.w] {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.as_slice() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(buf)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    origin: &'a str,
}

impl<'a> Cursor<'a> {
    fn need(&self, n: usize) -> Result<()> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format(
                self.origin,
                format!("truncated at byte {} (needed {n} more)", self.pos),
            ));
        }
        Ok(())
    }

    fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        self.need(n)?;
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.bytes(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }
}

pub fn decode_lpck(bytes: &[u8], origin: &str) -> Result<CheckpointData> {
    let mut cur = Cursor {
        bytes,
        pos: 0,
        origin,
    };
    if cur.bytes(4)? != LPCK_MAGIC {
        return Err(Error::format(origin, "bad magic (expected LPCK)"));
    }
    let version = cur.u32()?;
    if version != LPCK_VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: LPCK_VERSION,
        });
    }
    let cfg_len = cur.u32()? as usize;
    let cfg_text = std::str::from_utf8(cur.bytes(cfg_len)?)
        .map_err(|_| Error::format(origin, "config blob is not UTF-8"))?;
    let meta = KvMap::parse(cfg_text)?;
    let count = cur.u32()? as usize;
    let mut tensors = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = cur.u16()? as usize;
        let name = std::str::from_utf8(cur.bytes(name_len)?)
            .map_err(|_| Error::format(origin, "tensor name is not UTF-8"))?
            .to_string();
        let n = cur.u32()? as usize;
        let c = cur.u32()? as usize;
        let h = cur.u32()? as usize;
        let w = cur.u32()? as usize;
        let shape = Shape::new(n, c, h, w);
        let len = shape
            .checked_len()
            .ok_or_else(|| Error::format(origin, format!("dimension overflow in {name}")))?;
        let raw = cur.bytes(4 * len)?;
        let mut data = Vec::with_capacity(len);
        for i in 0..len {
            data.push(f32::from_le_bytes(raw[4 * i..4 * i + 4].try_into().unwrap()));
        }
        tensors.push((name, Tensor::from_vec(shape, data)?));
    }
    if cur.pos != bytes.len() {
        return Err(Error::format(
            origin,
            format!("{} trailing bytes after the last tensor", bytes.len() - cur.pos),
        ));
    }
    Ok(CheckpointData { meta, tensors })
}

pub fn write_lpck(path: &Path, data: &CheckpointData) -> Result<()> {
    write_atomic(path, &encode_lpck(data)?)
}

pub fn read_lpck(path: &Path) -> Result<CheckpointData> {
    let bytes = fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    decode_lpck(&bytes, &path.display().to_string())
}

/// Prefixes of non-parameter tensors a checkpoint may carry.
pub const OPT_M_PREFIX: &str = "opt.m.";
pub const OPT_V_PREFIX: &str = "opt.v.";

impl Model<f32> {
    /// Save just the model (no optimizer state).
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        write_lpck(
            path,
            &CheckpointData {
                meta: self.config.to_kv(),
                tensors: self.param_map(),
            },
        )
    }

    /// Load a model, ignoring any optimizer tensors and metadata the
    /// checkpoint carries beyond the architecture config.
    pub fn load_checkpoint(path: &Path) -> Result<Model<f32>> {
        let data = read_lpck(path)?;
        Model::from_checkpoint_data(&data)
    }

    pub fn from_checkpoint_data(data: &CheckpointData) -> Result<Model<f32>> {
        let mut reader = data.meta.clone().reader();
        let config = LpienetConfig::from_reader(&mut reader)?;
        // Remaining keys are training metadata; callers that care read them.
        let params: Vec<(String, Tensor<f32>)> = data
            .tensors
            .iter()
            .filter(|(n, _)| !n.starts_with(OPT_M_PREFIX) && !n.starts_with(OPT_V_PREFIX))
            .cloned()
            .collect();
        let mut model = Model::build(config, 0)?;
        model.load_param_map(&params)?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LpienetConfig;
    use crate::tensor::Shape;

    #[test]
    fn save_load_forward_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.lpck");
        let model = Model::<f32>::build(LpienetConfig::tiny(), 42).unwrap();
        model.save_checkpoint(&path).unwrap();
        let loaded = Model::<f32>::load_checkpoint(&path).unwrap();

        let x = Tensor::<f32>::from_fn(Shape::new(1, 3, 16, 16), |_, c, y, xx| {
            ((c * 7 + y * 3 + xx) as f32 * 0.017) % 1.0
        });
        let y0 = model.forward(&x).unwrap();
        let y1 = loaded.forward(&x).unwrap();
        assert_eq!(y0, y1);
    }

    #[test]
    fn corrupted_magic_fails_cleanly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.lpck");
        let model = Model::<f32>::build(LpienetConfig::tiny(), 1).unwrap();
        model.save_checkpoint(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'Z';
        std::fs::write(&path, bytes).unwrap();
        assert!(Model::<f32>::load_checkpoint(&path).is_err());
    }

    #[test]
    fn version_mismatch_is_explicit() {
        let model = Model::<f32>::build(LpienetConfig::tiny(), 1).unwrap();
        let mut bytes = encode_lpck(&CheckpointData {
            meta: model.config.to_kv(),
            tensors: model.param_map(),
        })
        .unwrap();
        bytes[4..8].copy_from_slice(&99u32.to_le_bytes());
        match decode_lpck(&bytes, "mem") {
            Err(Error::CheckpointVersion { found: 99, expected: 1 }) => {}
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_checkpoint_rejected() {
        let model = Model::<f32>::build(LpienetConfig::tiny(), 1).unwrap();
        let bytes = encode_lpck(&CheckpointData {
            meta: model.config.to_kv(),
            tensors: model.param_map(),
        })
        .unwrap();
        assert!(decode_lpck(&bytes[..bytes.len() - 7], "mem").is_err());
    }

    #[test]
    fn scalar_count_matches_param_count() {
        let model = Model::<f32>::build(LpienetConfig::tiny(), 3).unwrap();
        let data = CheckpointData {
            meta: model.config.to_kv(),
            tensors: model.param_map(),
        };
        let declared: usize = data.tensors.iter().map(|(_, t)| t.len()).sum();
        assert_eq!(declared, model.param_count());
    }
}
