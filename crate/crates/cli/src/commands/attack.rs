//! `attack`: perturb the test split with the gradient-sign method and write
//! adversarial dataset artifacts.

use std::path::PathBuf;

use beamcred_core::attack::{fgsm, rms, AttackConfig};
use beamcred_core::sweep::{Dataset, Sample};

use super::CommandCtx;
use crate::formats::{checkpoint, dataset};
use crate::CliError;

#[derive(Debug, Default)]
pub struct AttackArgs {
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Absolute epsilon override.
    pub epsilon: Option<f64>,
    /// Emit one artifact per epsilon.
    pub epsilon_sweep: Vec<f64>,
}

pub fn attack(ctx: &CommandCtx, args: &AttackArgs) -> Result<Vec<PathBuf>, CliError> {
    ctx.ensure_workspace()?;
    let (data, d_header) = dataset::read_dataset(&ctx.dataset_path(args.dataset.as_deref()))?;
    ctx.check_lineage(d_header.config_hash.as_deref(), "dataset")?;
    let (model, c_header) =
        checkpoint::read_checkpoint(&ctx.checkpoint_path(args.checkpoint.as_deref()))?;
    ctx.check_lineage(c_header.config_hash.as_deref(), "checkpoint")?;
    if data.test.is_empty() {
        return Err(CliError::Data("dataset has no test split to attack".into()));
    }

    let epsilons: Vec<f64> = if !args.epsilon_sweep.is_empty() {
        args.epsilon_sweep.clone()
    } else if let Some(e) = args.epsilon {
        vec![e]
    } else if let Some(e) = ctx.config.attack.epsilon {
        vec![e]
    } else {
        // Relative budget: fraction of the mean per-sample RMS RSSI.
        let mean_rms =
            data.test.iter().map(|s| rms(&s.rssi)).sum::<f64>() / data.test.len() as f64;
        vec![ctx.config.attack.relative_epsilon * mean_rms]
    };

    let sweep_mode = epsilons.len() > 1;
    let mut written = Vec::with_capacity(epsilons.len());
    for (i, &epsilon) in epsilons.iter().enumerate() {
        let cfg = AttackConfig {
            epsilon,
            clamp_nonnegative: ctx.config.attack_clamp(),
            relative_power_budget: ctx.config.attack.relative_power_budget,
        };
        let adversarial_test: Vec<Sample> = data
            .test
            .iter()
            .map(|s| {
                Ok(Sample {
                    rssi: fgsm(&s.rssi, s.label, &model, &cfg)?,
                    ..s.clone()
                })
            })
            .collect::<Result<_, CliError>>()?;
        let adv = Dataset {
            train: Vec::new(),
            validation: Vec::new(),
            calibration: Vec::new(),
            test: adversarial_test,
            meta: data.meta.clone(),
        };
        let name = if sweep_mode {
            format!("adversarial_eps{i}.bae")
        } else {
            "adversarial.bae".to_string()
        };
        let path = ctx.path(&name);
        dataset::write_dataset(
            &path,
            &adv,
            &dataset::WriteOptions {
                config_hash: Some(ctx.config.config_hash()),
                adversarial: true,
                attack: Some(cfg),
            },
        )?;
        println!(
            "wrote {} ({} adversarial samples, epsilon {epsilon:.6e})",
            path.display(),
            adv.test.len()
        );
        written.push(path);
    }
    Ok(written)
}
