//! `explain`: print the conformal verdict and per-layer neighbor listing for
//! one test sample as a JSON record.

use std::path::PathBuf;

use beamcred_core::dknn::DknnVerdict;
use beamcred_core::sweep::Sample;
use serde::Serialize;

use super::eval::load_engine_and_model;
use super::CommandCtx;
use crate::CliError;

#[derive(Debug, Default)]
pub struct ExplainArgs {
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub calibration: Option<PathBuf>,
    pub sample_id: usize,
}

#[derive(Serialize)]
struct ExplainRecord<'a> {
    sample_id: usize,
    true_label: usize,
    snr_db: f64,
    prediction: usize,
    confidence: f64,
    credibility: f64,
    p_values: &'a [f64],
    neighbor_report: &'a [Vec<beamcred_core::dknn::Neighbor>],
}

pub(super) fn verdict_json(sample_id: usize, sample: &Sample, verdict: &DknnVerdict) -> String {
    serde_json::to_string_pretty(&ExplainRecord {
        sample_id,
        true_label: sample.label,
        snr_db: sample.snr_db,
        prediction: verdict.prediction,
        confidence: verdict.confidence,
        credibility: verdict.credibility,
        p_values: &verdict.p_values,
        neighbor_report: &verdict.neighbor_report,
    })
    .expect("record serializes")
}

pub fn explain(ctx: &CommandCtx, args: &ExplainArgs) -> Result<(), CliError> {
    let (data, model, engine) = load_engine_and_model(
        ctx,
        args.dataset.as_deref(),
        args.checkpoint.as_deref(),
        args.index.as_deref(),
        args.calibration.as_deref(),
    )?;
    let sample = data.test.get(args.sample_id).ok_or_else(|| {
        CliError::Config(format!(
            "sample id {} out of range: test split has {} samples",
            args.sample_id,
            data.test.len()
        ))
    })?;
    let verdict = engine.predict(&sample.rssi, &model)?;
    println!("{}", verdict_json(args.sample_id, sample, &verdict));
    Ok(())
}
