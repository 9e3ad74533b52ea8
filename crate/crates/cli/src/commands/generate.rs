//! `generate`: synthesize channels, sweep, label, split, and write the
//! dataset artifact.

use beamcred_core::channel::{normalize_channel_set, synth_channel_set};
use beamcred_core::sweep::build_dataset;

use super::CommandCtx;
use crate::formats::{complexbin, dataset};
use crate::CliError;

#[derive(Debug, Default)]
pub struct GenerateArgs {
    /// Re-derive every label with an independent exhaustive search and fail
    /// on any disagreement.
    pub verify_labels: bool,
    /// Also dump the normalized channel set as interleaved f64 rows.
    pub export_channels: bool,
    /// Also dump both codebooks with JSON sidecars.
    pub export_codebooks: bool,
}

pub fn generate(ctx: &CommandCtx, args: &GenerateArgs) -> Result<std::path::PathBuf, CliError> {
    ctx.ensure_workspace()?;
    let scenario = ctx.config.scenario_config();
    let sensing = ctx.config.sensing_codebook()?;
    let narrow = ctx.config.narrow_codebook()?;
    let sweep = ctx.config.sweep_config();
    let data = build_dataset(&scenario, &sensing, &narrow, &sweep)?;

    if args.verify_labels {
        let channels = normalize_channel_set(&synth_channel_set(&scenario)?)?;
        let mut checked = 0usize;
        for (_, split) in data.splits() {
            for s in split {
                let expect = exhaustive_label(&channels[s.ue_id as usize].h, &narrow);
                if expect != s.label {
                    return Err(CliError::Numeric(format!(
                        "label verification failed for ue {}: dataset {} vs exhaustive {}",
                        s.ue_id, s.label, expect
                    )));
                }
                checked += 1;
            }
        }
        println!("verified {checked} labels against exhaustive search");
    }

    let path = ctx.path("dataset.bae");
    dataset::write_dataset(
        &path,
        &data,
        &dataset::WriteOptions {
            config_hash: Some(ctx.config.config_hash()),
            ..Default::default()
        },
    )?;

    if args.export_channels {
        let channels = normalize_channel_set(&synth_channel_set(&scenario)?)?;
        complexbin::write_channels(&ctx.path("channels.c64"), &channels)?;
    }
    if args.export_codebooks {
        complexbin::write_codebook(&ctx.path("sensing.c64"), &sensing)?;
        complexbin::write_codebook(&ctx.path("narrow.c64"), &narrow)?;
    }

    println!(
        "wrote {} ({} samples: {}/{}/{}/{} train/val/cal/test, m_w={}, q={})",
        path.display(),
        data.total_len(),
        data.train.len(),
        data.validation.len(),
        data.calibration.len(),
        data.test.len(),
        data.meta.m_w,
        data.meta.q,
    );
    Ok(path)
}

/// Independent oracle: exhaustive argmax of |h^H w|^2 using raw scalar
/// arithmetic only.
fn exhaustive_label(h: &[beamcred_core::C64], narrow: &beamcred_core::codebook::Codebook) -> usize {
    let mut best = 0usize;
    let mut best_gain = f64::NEG_INFINITY;
    for (q, beam) in narrow.beams.iter().enumerate() {
        let mut re = 0.0f64;
        let mut im = 0.0f64;
        for (a, b) in h.iter().zip(&beam.w) {
            re += a.re * b.re + a.im * b.im;
            im += a.re * b.im - a.im * b.re;
        }
        let gain = re * re + im * im;
        if gain > best_gain {
            best_gain = gain;
            best = q;
        }
    }
    best
}
