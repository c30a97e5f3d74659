//! Binary value-function files.
//!
//! Layout: the magic bytes `GBVF`, a little-endian `u32` format version, a
//! little-endian `u32` header length, a UTF-8 JSON header, then every value
//! as a little-endian `f64` in storage order.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sdp::ValueFunction;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"GBVF";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VfHeader {
    pub soc_grid: Vec<f64>,
    pub lag_grid: Vec<f64>,
    pub order: usize,
    /// Slices `0..=steps` are stored.
    pub steps: usize,
    /// SHA-256 of the calibration artifact the values were computed from.
    pub provenance: String,
}

pub fn write_value_function(path: &Path, vf: &ValueFunction, provenance: &str) -> Result<()> {
    let header = VfHeader {
        soc_grid: vf.soc_grid.clone(),
        lag_grid: vf.lag_grid.clone(),
        order: vf.order,
        steps: vf.steps,
        provenance: provenance.to_string(),
    };
    let json = serde_json::to_vec(&header)?;
    let mut buf = Vec::with_capacity(12 + json.len() + 8 * vf.values.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&json);
    for v in &vf.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

pub fn read_value_function(path: &Path) -> Result<(ValueFunction, VfHeader)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| Error::MissingArtifact(format!("{}: {e}", path.display())))?
        .read_to_end(&mut bytes)?;
    let bad = |m: &str| Error::Artifact(format!("{}: {m}", path.display()));
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(bad("not a value-function file"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = bytes.get(12..12 + hlen).ok_or_else(|| bad("truncated header"))?;
    let header: VfHeader = serde_json::from_slice(body)?;
    let data = &bytes[12 + hlen..];
    if data.len() % 8 != 0 {
        return Err(bad("trailing bytes"));
    }
    let values = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let vf = ValueFunction {
        soc_grid: header.soc_grid.clone(),
        lag_grid: header.lag_grid.clone(),
        order: header.order,
        steps: header.steps,
        values,
    };
    vf.validate().map_err(|_| bad("values do not match the header"))?;
    Ok((vf, header))
}
