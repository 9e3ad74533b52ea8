//! `calibrate`: index the training representations and score the
//! calibration split, persisting both engine artifacts.

use std::collections::HashSet;
use std::path::PathBuf;

use super::{sample_fingerprint, CommandCtx};
use crate::formats::{checkpoint, dataset, index};
use crate::CliError;

pub fn calibrate(
    ctx: &CommandCtx,
    dataset_flag: Option<PathBuf>,
    checkpoint_flag: Option<PathBuf>,
) -> Result<(PathBuf, PathBuf), CliError> {
    ctx.ensure_workspace()?;
    let (data, d_header) = dataset::read_dataset(&ctx.dataset_path(dataset_flag.as_deref()))?;
    ctx.check_lineage(d_header.config_hash.as_deref(), "dataset")?;
    let (model, c_header) =
        checkpoint::read_checkpoint(&ctx.checkpoint_path(checkpoint_flag.as_deref()))?;
    ctx.check_lineage(c_header.config_hash.as_deref(), "checkpoint")?;

    if data.calibration.is_empty() {
        return Err(CliError::Data("dataset has no calibration split".into()));
    }
    // Conformal validity requires calibration data unseen during training;
    // refuse any content overlap.
    let train_prints: HashSet<u64> = data.train.iter().map(sample_fingerprint).collect();
    let overlap = data
        .calibration
        .iter()
        .filter(|s| train_prints.contains(&sample_fingerprint(s)))
        .count();
    if overlap > 0 {
        return Err(CliError::Data(format!(
            "{overlap} calibration samples also appear in the training split"
        )));
    }

    let cfg = ctx.config.dknn_config();
    let neighbor_index = beamcred_core::dknn::build_index(&model, &data.train, &cfg)?;
    let scores = beamcred_core::dknn::calibrate(&neighbor_index, &model, &data.calibration)?;

    let index_path = ctx.path("index.dknn");
    let cal_path = ctx.path("calibration.json");
    index::write_index(&index_path, &neighbor_index, Some(ctx.config.config_hash()))?;
    index::write_calibration(&cal_path, &scores, Some(ctx.config.config_hash()))?;

    println!(
        "indexed {} training points over {} layers (k={}), {} calibration scores; wrote {} and {}",
        neighbor_index.len(),
        neighbor_index.n_layers(),
        neighbor_index.k(),
        scores.len(),
        index_path.display(),
        cal_path.display()
    );
    Ok((index_path, cal_path))
}
