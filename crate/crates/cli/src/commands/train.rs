//! `train`: fit the classifier on a dataset artifact and write the
//! checkpoint plus a per-epoch loss history CSV.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::CommandCtx;
use crate::formats::{checkpoint, dataset};
use crate::CliError;

#[derive(Debug, Default)]
pub struct TrainArgs {
    pub dataset: Option<PathBuf>,
    /// Overwrite an existing checkpoint.
    pub force: bool,
}

pub fn train(ctx: &CommandCtx, args: &TrainArgs) -> Result<PathBuf, CliError> {
    ctx.ensure_workspace()?;
    let ckpt_path = ctx.path("model.ckpt");
    if ckpt_path.exists() && !args.force {
        return Err(CliError::Data(format!(
            "checkpoint {} already exists; pass --force to retrain",
            ckpt_path.display()
        )));
    }

    let data_path = ctx.dataset_path(args.dataset.as_deref());
    let (data, header) = dataset::read_dataset(&data_path)?;
    ctx.check_lineage(header.config_hash.as_deref(), "dataset")?;

    let mut mc = ctx.config.model_config();
    if mc.input_len != data.meta.m_w || mc.n_classes != data.meta.q {
        return Err(CliError::Config(format!(
            "model shape ({}, {}) does not match dataset ({}, {})",
            mc.input_len, mc.n_classes, data.meta.m_w, data.meta.q
        )));
    }
    // The dataset's recorded feature scale is authoritative for the model.
    mc.feature_scale = data.meta.feature_scale;
    let tc = ctx.config.training_config();

    let model = beamcred_core::model::train(&data, &mc, &tc)?;

    checkpoint::write_checkpoint(&ckpt_path, &model, Some(ctx.config.config_hash()))?;
    write_loss_history(&ctx.path("loss_history.csv"), &model.meta.history)?;

    println!(
        "trained {} epochs (final train loss {:.6}{}), wrote {}",
        model.meta.epochs_run,
        model.meta.final_train_loss,
        model
            .meta
            .final_validation_loss
            .map(|v| format!(", validation {v:.6}"))
            .unwrap_or_default(),
        ckpt_path.display()
    );
    Ok(ckpt_path)
}

fn write_loss_history(
    path: &Path,
    history: &[beamcred_core::model::EpochStats],
) -> Result<(), CliError> {
    let mut out = String::from("epoch,train_loss,validation_loss\n");
    for e in history {
        let val = e
            .validation_loss
            .map(|v| v.to_string())
            .unwrap_or_default();
        let _ = writeln!(out, "{},{},{val}", e.epoch, e.train_loss);
    }
    std::fs::write(path, out)?;
    Ok(())
}
