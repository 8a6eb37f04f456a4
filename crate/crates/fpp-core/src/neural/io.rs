//! Binary model container.
//!
//! Layout: 8-byte magic `FPPLSTM\0`, u32 format version, u32 JSON header
//! length, JSON header (config + optimizer flag), then every weight tensor
//! as little-endian f64 in canonical order. When optimizer state is
//! present it is appended as step count, hyperparameters, then the first
//! and second moment tensors in the same order.

use super::{AdamState, LstmWeights, ModelConfig};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 8] = b"FPPLSTM\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    has_optimizer: bool,
}

fn push_tensors(buf: &mut Vec<u8>, w: &LstmWeights) {
    for t in w.tensors() {
        for v in t.as_slice() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    off: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.off + n > self.bytes.len() {
            return Err(Error::Format("model file truncated".into()));
        }
        let s = &self.bytes[self.off..self.off + n];
        self.off += n;
        Ok(s)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn tensors(&mut self, config: &ModelConfig) -> Result<LstmWeights> {
        let mut w = LstmWeights::zeros(config);
        for t in w.tensors_mut() {
            for v in t.as_mut_slice() {
                *v = self.f64()?;
            }
        }
        Ok(w)
    }
}

/// Serialize a model (and optionally its optimizer state) to `path`.
pub fn save_model(
    path: &Path,
    config: &ModelConfig,
    weights: &LstmWeights,
    optimizer: Option<&AdamState>,
) -> Result<()> {
    config.validate()?;
    let header = serde_json::to_vec(&Header {
        config: *config,
        has_optimizer: optimizer.is_some(),
    })?;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header);
    push_tensors(&mut buf, weights);
    if let Some(state) = optimizer {
        buf.extend_from_slice(&state.step_count.to_le_bytes());
        for v in [state.lr, state.beta1, state.beta2, state.eps] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let (m, v) = state.moments();
        push_tensors(&mut buf, m);
        push_tensors(&mut buf, v);
    }
    fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

/// Load a model saved by [`save_model`]. Forward outputs of the loaded model
/// are bit-identical to the saved one.
pub fn load_model(path: &Path) -> Result<(ModelConfig, LstmWeights, Option<AdamState>)> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let mut r = Reader {
        bytes: &bytes,
        off: 0,
    };
    if r.take(8)? != MAGIC {
        return Err(Error::Format("bad model magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported model format version {version}"
        )));
    }
    let hlen = r.u32()? as usize;
    let header: Header = serde_json::from_slice(r.take(hlen)?)?;
    header.config.validate()?;
    let weights = r.tensors(&header.config)?;
    let optimizer = if header.has_optimizer {
        let step_count = r.u64()?;
        let lr = r.f64()?;
        let beta1 = r.f64()?;
        let beta2 = r.f64()?;
        let eps = r.f64()?;
        let m = r.tensors(&header.config)?;
        let v = r.tensors(&header.config)?;
        Some(AdamState::from_parts(m, v, step_count, lr, beta1, beta2, eps))
    } else {
        None
    };
    if r.off != bytes.len() {
        return Err(Error::Format("trailing bytes in model file".into()));
    }
    Ok((header.config, weights, optimizer))
}
