//! Model files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic       8 bytes  "ADVSVMMF"
//! header_len  u64
//! header      JSON: format_version, generator_id, kernel, config, eps_prime,
//!             bias, norm_sq, dim
//! count       u64
//! entries     count x (iteration u64, len u64, len x f64)
//! ```

use std::fs;
use std::path::Path;

use advsvm_core::kernel::KernelSpec;
use advsvm_core::trainer::{Model, ModelEntry, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult, Location};

pub const MAGIC: &[u8; 8] = b"ADVSVMMF";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    generator_id: String,
    kernel: KernelSpec,
    config: TrainConfig,
    eps_prime: f64,
    bias: f64,
    norm_sq: f64,
    dim: usize,
}

pub fn encode(model: &Model) -> Vec<u8> {
    let header = Header {
        format_version: FORMAT_VERSION,
        generator_id: model.generator_id.clone(),
        kernel: model.kernel,
        config: model.config,
        eps_prime: model.eps_prime,
        bias: model.bias,
        norm_sq: model.norm_sq,
        dim: model.dim,
    };
    let json = serde_json::to_vec(&header).expect("header serialises");
    let floats: usize = model.entries.iter().map(|e| e.alpha.len()).sum();
    let mut out = Vec::with_capacity(32 + json.len() + 16 * model.entries.len() + 8 * floats);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(model.entries.len() as u64).to_le_bytes());
    for e in &model.entries {
        out.extend_from_slice(&e.iteration.to_le_bytes());
        out.extend_from_slice(&(e.alpha.len() as u64).to_le_bytes());
        for a in &e.alpha {
            out.extend_from_slice(&a.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> AppResult<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            AppError::format(self.path, Location::Byte(self.pos as u64), format!("truncated {what}"))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self, what: &str) -> AppResult<u64> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }
}

pub fn decode(bytes: &[u8], path: &Path) -> AppResult<Model> {
    let mut c = Cursor { bytes, pos: 0, path };
    if c.take(8, "magic")? != MAGIC {
        return Err(AppError::format(path, Location::Byte(0), "not an advsvm model file"));
    }
    let hlen = c.u64("header length")? as usize;
    let hstart = c.pos;
    let header: Header = serde_json::from_slice(c.take(hlen, "header")?)
        .map_err(|e| AppError::format(path, Location::Byte(hstart as u64), format!("bad header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(AppError::format(
            path,
            Location::Byte(hstart as u64),
            format!("unsupported format version {}", header.format_version),
        ));
    }
    let count = c.u64("entry count")?;
    let mut entries = Vec::with_capacity(count.min(1 << 20) as usize);
    for _ in 0..count {
        let iteration = c.u64("entry iteration")?;
        let len = c.u64("entry length")? as usize;
        let raw = c.take(len.saturating_mul(8), "coefficients")?;
        let alpha = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        entries.push(ModelEntry { iteration, alpha });
    }
    if c.pos != bytes.len() {
        return Err(AppError::format(path, Location::Byte(c.pos as u64), "trailing bytes after entries"));
    }
    let model = Model {
        config: header.config,
        kernel: header.kernel,
        eps_prime: header.eps_prime,
        dim: header.dim,
        entries,
        norm_sq: header.norm_sq,
        bias: header.bias,
        generator_id: header.generator_id,
    };
    model.check_generator()?;
    Ok(model)
}

pub fn save_model(path: &Path, model: &Model) -> AppResult<()> {
    fs::write(path, encode(model)).map_err(|e| AppError::io(path, e))
}

pub fn load_model(path: &Path) -> AppResult<Model> {
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    decode(&bytes, path)
}
