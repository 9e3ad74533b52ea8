//! Model checkpoint, magic `BAEM`: JSON header (architecture, preprocessing
//! constants, training record) followed by the little-endian f32 parameter
//! blob and a CRC32.

use beamcred_core::model::{ModelConfig, ModelState, TrainingMeta};
use serde::{Deserialize, Serialize};
use std::path::Path;

use super::{data_err, frame, unframe, Reader};
use crate::CliError;

pub const MAGIC: &[u8; 4] = b"BAEM";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub config: ModelConfig,
    pub input_shift: f64,
    pub input_scale: f64,
    pub meta: TrainingMeta,
    pub param_count: usize,
    #[serde(default)]
    pub config_hash: Option<String>,
}

pub fn encode_checkpoint(
    model: &ModelState,
    config_hash: Option<String>,
) -> Result<Vec<u8>, CliError> {
    let header = CheckpointHeader {
        version: VERSION,
        config: model.config.clone(),
        input_shift: model.input_shift,
        input_scale: model.input_scale,
        meta: model.meta.clone(),
        param_count: model.params.len(),
        config_hash,
    };
    let mut payload = Vec::with_capacity(model.params.len() * 4);
    for &p in &model.params {
        payload.extend_from_slice(&(p as f32).to_le_bytes());
    }
    Ok(frame(MAGIC, &header, &payload))
}

pub fn write_checkpoint(
    path: &Path,
    model: &ModelState,
    config_hash: Option<String>,
) -> Result<(), CliError> {
    std::fs::write(path, encode_checkpoint(model, config_hash)?)?;
    Ok(())
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(ModelState, CheckpointHeader), CliError> {
    let (header, payload) = unframe::<CheckpointHeader>(MAGIC, bytes, "checkpoint")?;
    if header.version != VERSION {
        return Err(data_err(format!(
            "checkpoint version mismatch: file has {}, reader supports {VERSION}",
            header.version
        )));
    }
    let expected = header
        .config
        .param_count()
        .map_err(|e| data_err(format!("checkpoint config invalid: {e}")))?;
    if expected != header.param_count || payload.len() != 4 * expected {
        return Err(data_err("checkpoint parameter blob does not match config"));
    }
    let mut r = Reader::new(payload);
    let mut params = Vec::with_capacity(expected);
    for _ in 0..expected {
        params.push(r.f32("parameter")? as f64);
    }
    let model = ModelState {
        config: header.config.clone(),
        params,
        input_shift: header.input_shift,
        input_scale: header.input_scale,
        meta: header.meta.clone(),
    };
    Ok((model, header))
}

pub fn read_checkpoint(path: &Path) -> Result<(ModelState, CheckpointHeader), CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| data_err(format!("cannot read checkpoint {}: {e}", path.display())))?;
    decode_checkpoint(&bytes)
}
