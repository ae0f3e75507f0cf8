//! Model checkpoints: a JSON header (config, seed, epoch, scaling constants
//! live inside the config) followed by the flat parameter blob as
//! little-endian f64.
//!
//!   magic "QCKP" | version u32 | header_len u32 | header JSON
//!   | param_count * f64

use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{ModelConfig, ModelParams};

const CKPT_MAGIC: &[u8; 4] = b"QCKP";
const CKPT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub config: ModelConfig,
    pub seed: u64,
    /// Epoch the parameters were taken from (0 = untrained).
    pub epoch: usize,
    pub best_valid_loss: f64,
    pub param_count: usize,
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

pub fn save_checkpoint(path: &Path, header: &CheckpointHeader, params: &ModelParams) -> Result<()> {
    if header.param_count != params.param_count() {
        return Err(Error::LengthMismatch {
            what: "checkpoint parameter count",
            expected: params.param_count(),
            actual: header.param_count,
        });
    }
    let header_json = serde_json::to_vec(header)?;
    let flat = params.to_flat();
    let mut buf = Vec::with_capacity(12 + header_json.len() + flat.len() * 8);
    buf.extend_from_slice(CKPT_MAGIC);
    buf.extend_from_slice(&CKPT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header_json.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header_json);
    for v in flat {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(CheckpointHeader, ModelParams)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let bad = |msg: &str| Error::BadFormat(format!("{}: {}", path.display(), msg));
    if bytes.len() < 12 || &bytes[..4] != CKPT_MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CKPT_VERSION {
        return Err(bad(&format!("unsupported version {}", version)));
    }
    let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if bytes.len() < 12 + header_len {
        return Err(bad("truncated header"));
    }
    let header: CheckpointHeader = serde_json::from_slice(&bytes[12..12 + header_len])?;
    let blob = &bytes[12 + header_len..];
    if blob.len() != header.param_count * 8 {
        return Err(bad(&format!(
            "parameter blob has {} bytes, expected {}",
            blob.len(),
            header.param_count * 8
        )));
    }
    let flat: Vec<f64> = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let params = ModelParams::from_flat(&header.config, &flat)?;
    Ok((header, params))
}
