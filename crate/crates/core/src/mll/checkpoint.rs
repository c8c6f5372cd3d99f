//! Binary model checkpoints.
//!
//! Layout: the 8-byte magic `CHSRMLL\0`, a little-endian `u32` format
//! version, a `u64` header length, a JSON header, then every parameter as a
//! little-endian `f64`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ElbSpec, Network, SrModel};
use crate::dataset::{NormStats, Scale};
use crate::{Error, Result};

pub const MAGIC: &[u8; 8] = b"CHSRMLL\0";
pub const CHECKPOINT_VERSION: u32 = 1;
const STAGE: &str = "train";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    scale: Scale,
    slots: usize,
    input_dim: usize,
    output_dim: usize,
    spec: ElbSpec,
    residual: bool,
    norm: NormStats,
    seed: u64,
    epoch: usize,
    param_count: usize,
}

pub fn to_bytes(model: &SrModel) -> Vec<u8> {
    let header = Header {
        scale: model.scale,
        slots: model.slots,
        input_dim: model.net.input_dim,
        output_dim: model.net.output_dim,
        spec: model.net.spec,
        residual: model.net.residual,
        norm: model.norm,
        seed: model.seed,
        epoch: model.epoch,
        param_count: model.net.param_count(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::with_capacity(20 + json.len() + 8 * model.net.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for p in &model.net.params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<SrModel> {
    let bad = |message: &str| Error::Parse {
        stage: STAGE,
        path: path.to_path_buf(),
        message: message.to_string(),
    };
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(bad("not a model checkpoint"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(20..).expect("length checked");
    let json = body.get(..header_len).ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(json).map_err(|e| bad(&e.to_string()))?;
    let raw = &body[header_len..];
    if raw.len() != 8 * header.param_count {
        return Err(bad(&format!("expected {} parameters, found {} bytes", header.param_count, raw.len())));
    }
    let mut net = Network::zeros(header.input_dim, header.output_dim, header.spec)?;
    if net.param_count() != header.param_count {
        return Err(bad("parameter count does not match the layer spec"));
    }
    for (p, chunk) in net.params.iter_mut().zip(raw.chunks_exact(8)) {
        *p = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
    }
    net.residual = header.residual;
    Ok(SrModel {
        scale: header.scale,
        slots: header.slots,
        norm: header.norm,
        seed: header.seed,
        epoch: header.epoch,
        net,
    })
}

pub fn save(model: &SrModel, path: &Path) -> Result<()> {
    fs::write(path, to_bytes(model)).map_err(|source| Error::Write {
        stage: STAGE,
        path: path.to_path_buf(),
        source,
    })
}

pub fn load(path: &Path) -> Result<SrModel> {
    let bytes = fs::read(path).map_err(|source| Error::Read {
        stage: STAGE,
        path: path.to_path_buf(),
        source,
    })?;
    from_bytes(&bytes, path)
}
