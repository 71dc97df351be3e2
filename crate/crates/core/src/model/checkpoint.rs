//! Versioned binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "PFCV" | u32 format_version | u32 header_len | header JSON bytes
//! then, repeated until end of file:
//!   u32 key_len | key bytes (UTF-8) | u64 element_count | f32 × count
//! ```
//!
//! The header JSON carries the model config and the training step counter.
//! Loading rebuilds the architecture from the config and fills every named
//! parameter block; a round trip reproduces inference bit-for-bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Model, ModelConfig};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"PFCV";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    step: u64,
}

/// Serializes the model to checkpoint bytes.
pub fn checkpoint_bytes(model: &Model<f32>) -> Result<Vec<u8>> {
    let header = Header { config: model.config().clone(), step: model.step() };
    let header_json = serde_json::to_vec(&header)
        .map_err(|e| Error::structural(format!("cannot encode checkpoint header: {e}")))?;

    let mut buf = Vec::new();
    buf.extend_from_slice(&CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header_json);

    let mut clone = model.clone();
    clone.visit_params(&mut |slot| {
        let key = slot.key.as_bytes();
        buf.extend_from_slice(&(key.len() as u32).to_le_bytes());
        buf.extend_from_slice(key);
        buf.extend_from_slice(&(slot.value.len() as u64).to_le_bytes());
        for v in slot.value.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    });
    Ok(buf)
}

/// Writes the checkpoint atomically (temp file + rename).
pub fn save_checkpoint(model: &Model<f32>, path: impl AsRef<Path>) -> Result<()> {
    let bytes = checkpoint_bytes(model)?;
    crate::io::atomic_write(path.as_ref(), &bytes)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::CorruptCheckpoint(format!(
                "truncated: needed {n} bytes at offset {}, have {}",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

/// Rebuilds a model from checkpoint bytes.
pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<Model<f32>> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::CorruptCheckpoint(format!(
            "bad magic {magic:02x?}, expected {CHECKPOINT_MAGIC:02x?}"
        )));
    }
    let version = cur.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch { found: version, supported: CHECKPOINT_VERSION });
    }
    let header_len = cur.u32()? as usize;
    let header_bytes = cur.take(header_len)?;
    let header: Header = serde_json::from_slice(header_bytes)
        .map_err(|e| Error::CorruptCheckpoint(format!("bad header JSON: {e}")))?;

    let mut params: std::collections::HashMap<String, Vec<f32>> =
        std::collections::HashMap::new();
    while !cur.done() {
        let key_len = cur.u32()? as usize;
        let key = std::str::from_utf8(cur.take(key_len)?)
            .map_err(|_| Error::CorruptCheckpoint("non-UTF-8 parameter key".into()))?
            .to_string();
        let count = cur.u64()? as usize;
        let raw = cur.take(count * 4)?;
        let values = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if params.insert(key.clone(), values).is_some() {
            return Err(Error::CorruptCheckpoint(format!("duplicate parameter key {key}")));
        }
    }

    let mut model = Model::build(header.config)?;
    model.set_step(header.step);
    let mut missing: Option<String> = None;
    let mut mismatch: Option<String> = None;
    model.visit_params(&mut |slot| {
        match params.remove(&slot.key) {
            Some(values) if values.len() == slot.value.len() => {
                slot.value.copy_from_slice(&values);
            }
            Some(values) => {
                mismatch.get_or_insert(format!(
                    "{} holds {} elements, expected {}",
                    slot.key,
                    values.len(),
                    slot.value.len()
                ));
            }
            None => {
                missing.get_or_insert(slot.key.clone());
            }
        }
    });
    if let Some(m) = mismatch {
        return Err(Error::CorruptCheckpoint(m));
    }
    if let Some(k) = missing {
        return Err(Error::MissingKey(k));
    }
    if let Some(extra) = params.into_keys().next() {
        return Err(Error::CorruptCheckpoint(format!("unknown parameter key {extra}")));
    }
    Ok(model)
}

/// Loads a checkpoint from disk.
pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model<f32>> {
    let bytes = std::fs::read(path.as_ref())?;
    checkpoint_from_bytes(&bytes)
}
