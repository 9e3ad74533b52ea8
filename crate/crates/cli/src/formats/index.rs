//! Neighbor-index container (magic `BAEK`) and calibration-score JSON.
//!
//! The index stores per-layer f32 representation blobs plus u16 labels; LSH
//! tables are not persisted, they are rebuilt deterministically from the
//! seeded config on load.

use beamcred_core::dknn::{CalibrationScores, DknnConfig, NeighborIndex};
use serde::{Deserialize, Serialize};
use std::path::Path;

use super::{data_err, frame, unframe, Reader};
use crate::CliError;

pub const MAGIC: &[u8; 4] = b"BAEK";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IndexHeader {
    pub version: u32,
    pub config: DknnConfig,
    pub layer_ids: Vec<usize>,
    pub layer_dims: Vec<usize>,
    pub count: usize,
    #[serde(default)]
    pub config_hash: Option<String>,
}

pub fn encode_index(index: &NeighborIndex, config_hash: Option<String>) -> Vec<u8> {
    let header = IndexHeader {
        version: VERSION,
        config: index.config().clone(),
        layer_ids: index.layer_ids().to_vec(),
        layer_dims: (0..index.n_layers()).map(|l| index.layer_dim(l)).collect(),
        count: index.len(),
        config_hash,
    };
    let mut payload = Vec::new();
    for &label in index.labels() {
        payload.extend_from_slice(&(label as u16).to_le_bytes());
    }
    for layer in 0..index.n_layers() {
        for &v in index.layer_vectors(layer) {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    frame(MAGIC, &header, &payload)
}

pub fn write_index(
    path: &Path,
    index: &NeighborIndex,
    config_hash: Option<String>,
) -> Result<(), CliError> {
    std::fs::write(path, encode_index(index, config_hash))?;
    Ok(())
}

pub fn decode_index(bytes: &[u8]) -> Result<(NeighborIndex, IndexHeader), CliError> {
    let (header, payload) = unframe::<IndexHeader>(MAGIC, bytes, "index")?;
    if header.version != VERSION {
        return Err(data_err(format!(
            "index version mismatch: file has {}, reader supports {VERSION}",
            header.version
        )));
    }
    let expected: usize =
        2 * header.count + 4 * header.count * header.layer_dims.iter().sum::<usize>();
    if payload.len() != expected {
        return Err(data_err("index truncated: blob size mismatch"));
    }
    let mut r = Reader::new(payload);
    let mut labels = Vec::with_capacity(header.count);
    for _ in 0..header.count {
        labels.push(r.u16("label")? as usize);
    }
    let mut layers = Vec::with_capacity(header.layer_dims.len());
    for &dim in &header.layer_dims {
        let mut blob = Vec::with_capacity(dim * header.count);
        for _ in 0..dim * header.count {
            blob.push(r.f32("representation")?);
        }
        layers.push((dim, blob));
    }
    let index = NeighborIndex::from_parts(
        header.config.clone(),
        header.layer_ids.clone(),
        labels,
        layers,
    )?;
    Ok((index, header))
}

pub fn read_index(path: &Path) -> Result<(NeighborIndex, IndexHeader), CliError> {
    let bytes = std::fs::read(path)
        .map_err(|e| data_err(format!("cannot read index {}: {e}", path.display())))?;
    decode_index(&bytes)
}

/// Calibration scores travel as plain JSON next to the index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub version: u32,
    pub max_score: u32,
    pub scores: Vec<u32>,
    #[serde(default)]
    pub config_hash: Option<String>,
}

pub fn write_calibration(
    path: &Path,
    scores: &CalibrationScores,
    config_hash: Option<String>,
) -> Result<(), CliError> {
    let file = CalibrationFile {
        version: VERSION,
        max_score: scores.max_score(),
        scores: scores.scores().to_vec(),
        config_hash,
    };
    std::fs::write(path, serde_json::to_vec_pretty(&file).expect("serializes"))?;
    Ok(())
}

pub fn read_calibration(path: &Path) -> Result<(CalibrationScores, CalibrationFile), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| data_err(format!("cannot read calibration {}: {e}", path.display())))?;
    let file: CalibrationFile = serde_json::from_str(&text)
        .map_err(|e| data_err(format!("calibration parse error: {e}")))?;
    if file.version != VERSION {
        return Err(data_err("calibration version mismatch"));
    }
    let scores = CalibrationScores::from_scores(file.scores.clone(), file.max_score)?;
    Ok((scores, file))
}
