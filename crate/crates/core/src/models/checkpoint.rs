//! Checkpoint container.
//!
//! ```text
//! magic    8 bytes  "BRTLCKPT"
//! version  u32 LE
//! hlen     u32 LE   length of the JSON header
//! header   hlen bytes, {"model_id", "architecture", "tensors": [[rows, cols], ...]}
//! tensors  row-major f64 LE, in header order
//! ```
//!
//! Encoding is canonical, so save → load → save reproduces the same bytes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ArchitectureSpec, DifferentiableModel, Network};
use crate::error::{Error, Result};
use crate::math::Matrix;

const MAGIC: &[u8; 8] = b"BRTLCKPT";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    model_id: String,
    architecture: ArchitectureSpec,
    tensors: Vec<(usize, usize)>,
}

fn corrupt(message: impl Into<String>) -> Error {
    Error::Checkpoint(message.into())
}

pub fn write_checkpoint(network: &Network) -> Result<Vec<u8>> {
    let params = network.parameters();
    let header = Header {
        model_id: network.id().to_string(),
        architecture: network.spec().clone(),
        tensors: params.iter().map(|p| p.shape()).collect(),
    };
    let header = serde_json::to_vec(&header)?;
    let payload: usize = params.iter().map(|p| p.len() * 8).sum();
    let mut out = Vec::with_capacity(16 + header.len() + payload);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for p in params {
        for v in p.as_slice() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<Network> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(corrupt("not a checkpoint (bad magic)"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(corrupt(format!("unsupported checkpoint version {version}")));
    }
    let hlen = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
    let body = &bytes[16..];
    if body.len() < hlen {
        return Err(corrupt("truncated header"));
    }
    let header: Header =
        serde_json::from_slice(&body[..hlen]).map_err(|e| corrupt(format!("bad header: {e}")))?;
    let mut rest = &body[hlen..];
    let mut params = Vec::with_capacity(header.tensors.len());
    for &(rows, cols) in &header.tensors {
        let n = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| corrupt("tensor size overflow"))?;
        if rest.len() < n {
            return Err(corrupt("truncated tensor data"));
        }
        let values = rest[..n]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        params.push(Matrix::from_vec(rows, cols, values).map_err(|e| corrupt(e.to_string()))?);
        rest = &rest[n..];
    }
    if !rest.is_empty() {
        return Err(corrupt(format!("{} trailing bytes", rest.len())));
    }
    Network::from_parameters(header.model_id, header.architecture, params)
        .map_err(|e| corrupt(e.to_string()))
}

pub fn save_checkpoint(network: &Network, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, write_checkpoint(network)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Network> {
    read_checkpoint(&fs::read(path)?)
}
