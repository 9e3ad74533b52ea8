//! Raw complex exports: interleaved little-endian f64 (re, im) rows.
//! Codebooks get a JSON sidecar describing their provenance.

use beamcred_core::channel::ChannelVector;
use beamcred_core::codebook::{Codebook, CodebookKind};
use beamcred_core::C64;
use serde::{Deserialize, Serialize};
use std::path::Path;

use super::data_err;
use crate::CliError;

fn write_rows(path: &Path, rows: impl Iterator<Item = Vec<C64>>) -> Result<(), CliError> {
    let mut out = Vec::new();
    for row in rows {
        for v in row {
            out.extend_from_slice(&v.re.to_le_bytes());
            out.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_channels(path: &Path, channels: &[ChannelVector]) -> Result<(), CliError> {
    write_rows(path, channels.iter().map(|c| c.h.clone()))
}

pub fn read_rows(path: &Path, row_len: usize) -> Result<Vec<Vec<C64>>, CliError> {
    let bytes = std::fs::read(path)?;
    let stride = 16 * row_len;
    if row_len == 0 || bytes.len() % stride != 0 {
        return Err(data_err("complex file does not tile into rows"));
    }
    Ok(bytes
        .chunks_exact(stride)
        .map(|row| {
            row.chunks_exact(16)
                .map(|c| {
                    C64::new(
                        f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                        f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
                    )
                })
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CodebookSidecar {
    pub n_bs: usize,
    pub os: usize,
    pub kind: CodebookKind,
}

/// Writes `<path>` (beams as rows) and `<path>.json` (sidecar).
pub fn write_codebook(path: &Path, book: &Codebook) -> Result<(), CliError> {
    write_rows(path, book.beams.iter().map(|b| b.w.clone()))?;
    let sidecar = CodebookSidecar {
        n_bs: book.n_bs(),
        os: book.oversampling,
        kind: book.kind,
    };
    let mut sidecar_path = path.as_os_str().to_owned();
    sidecar_path.push(".json");
    std::fs::write(
        sidecar_path,
        serde_json::to_vec_pretty(&sidecar).expect("serializes"),
    )?;
    Ok(())
}
