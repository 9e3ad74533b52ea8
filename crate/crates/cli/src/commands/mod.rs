//! Subcommand implementations. Each command reads its inputs, checks
//! artifact lineage against the active config hash, does its work through
//! the core crate, and writes artifacts into the workspace.

mod attack;
mod calibrate;
mod eval;
mod explain;
mod generate;
mod train;

pub use attack::{attack, AttackArgs};
pub use calibrate::calibrate;
pub use eval::{eval, EvalArgs};
pub use explain::{explain, ExplainArgs};
pub use generate::{generate, GenerateArgs};
pub use train::{train, TrainArgs};

use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::CliError;

/// Resolved invocation environment shared by every subcommand.
pub struct CommandCtx {
    pub config: RunConfig,
    pub workspace: PathBuf,
    /// Downgrade lineage mismatches from errors to warnings.
    pub allow_mismatch: bool,
}

impl CommandCtx {
    pub fn new(config: RunConfig, workspace: PathBuf, allow_mismatch: bool) -> Self {
        CommandCtx {
            config,
            workspace,
            allow_mismatch,
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.workspace.join(name)
    }

    pub fn dataset_path(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .unwrap_or_else(|| self.path("dataset.bae"))
    }

    pub fn checkpoint_path(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .unwrap_or_else(|| self.path("model.ckpt"))
    }

    pub fn index_path(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .unwrap_or_else(|| self.path("index.dknn"))
    }

    pub fn calibration_path(&self, flag: Option<&Path>) -> PathBuf {
        flag.map(Path::to_path_buf)
            .unwrap_or_else(|| self.path("calibration.json"))
    }

    pub fn ensure_workspace(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.workspace)?;
        Ok(())
    }

    /// Compare an artifact's embedded config hash with the active one.
    pub fn check_lineage(&self, found: Option<&str>, what: &str) -> Result<(), CliError> {
        let expected = self.config.config_hash();
        match found {
            Some(h) if h == expected => Ok(()),
            Some(h) => {
                let msg = format!(
                    "{what} was produced under config {h}, current config is {expected}"
                );
                if self.allow_mismatch {
                    eprintln!("warning: {msg}");
                    Ok(())
                } else {
                    Err(CliError::Data(format!("{msg} (pass --allow-mismatch to override)")))
                }
            }
            None => {
                eprintln!("warning: {what} carries no config hash");
                Ok(())
            }
        }
    }
}

/// Content fingerprint of one sample, for split-overlap detection.
pub(crate) fn sample_fingerprint(sample: &beamcred_core::sweep::Sample) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100_0000_01b3);
        }
    };
    for &v in &sample.rssi {
        eat(&(v as f32).to_le_bytes());
    }
    eat(&(sample.label as u64).to_le_bytes());
    h
}
