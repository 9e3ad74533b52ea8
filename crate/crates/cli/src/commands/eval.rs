//! `eval`: run every method over the test split, sweep the configured noise
//! grid, and export the report JSON plus the figure CSVs.

use std::path::PathBuf;

use beamcred_core::channel::{normalize_channel_set, synth_channel_set, ChannelVector};
use beamcred_core::dknn::DknnEngine;
use beamcred_core::eval::{
    evaluate_all, reliability_diagram, EvalContext, MetricsReport, ScoreSource,
};
use beamcred_core::model::ModelState;
use beamcred_core::rng::{domain, RngStream};
use beamcred_core::sweep::{dbm_to_linear, measure_rssi, NoiseModel, Sample};

use super::{CommandCtx, explain::verdict_json};
use crate::config::derive_seed;
use crate::formats::{checkpoint, dataset, index};
use crate::report::{accuracy_csv, efficiency_csv, reliability_csv, write_report, ReportFile};
use crate::CliError;

#[derive(Debug, Default)]
pub struct EvalArgs {
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub calibration: Option<PathBuf>,
    pub adversarial: Option<PathBuf>,
    /// Print the neighbor report of one test sample after evaluating.
    pub explain: Option<usize>,
}

pub fn eval(ctx: &CommandCtx, args: &EvalArgs) -> Result<PathBuf, CliError> {
    ctx.ensure_workspace()?;
    let (data, d_header) = dataset::read_dataset(&ctx.dataset_path(args.dataset.as_deref()))?;
    ctx.check_lineage(d_header.config_hash.as_deref(), "dataset")?;
    if d_header.adversarial {
        return Err(CliError::Data(
            "eval expects the clean dataset; pass the adversarial file via --adversarial".into(),
        ));
    }
    let (model, c_header) =
        checkpoint::read_checkpoint(&ctx.checkpoint_path(args.checkpoint.as_deref()))?;
    ctx.check_lineage(c_header.config_hash.as_deref(), "checkpoint")?;
    let (neighbor_index, i_header) = index::read_index(&ctx.index_path(args.index.as_deref()))?;
    ctx.check_lineage(i_header.config_hash.as_deref(), "index")?;
    let (scores, cal_file) =
        index::read_calibration(&ctx.calibration_path(args.calibration.as_deref()))?;
    ctx.check_lineage(cal_file.config_hash.as_deref(), "calibration")?;
    let engine = DknnEngine {
        index: neighbor_index,
        calibration: scores,
    };

    let adversarial = match &args.adversarial {
        None => None,
        Some(path) => {
            let (adv, a_header) = dataset::read_dataset(path)?;
            ctx.check_lineage(a_header.config_hash.as_deref(), "adversarial dataset")?;
            if !a_header.adversarial {
                return Err(CliError::Data(format!(
                    "{} is not marked adversarial",
                    path.display()
                )));
            }
            if adv.test.len() != data.test.len() {
                return Err(CliError::Data(
                    "adversarial set does not match the test split".into(),
                ));
            }
            Some(adv.test)
        }
    };

    // Channels regenerate deterministically from the config seed; test
    // samples reference them by provenance id.
    let scenario = ctx.config.scenario_config();
    let channels = normalize_channel_set(&synth_channel_set(&scenario)?)?;
    let test_channels: Vec<ChannelVector> = data
        .test
        .iter()
        .map(|s| channels[s.ue_id as usize].clone())
        .collect();

    let sensing = ctx.config.sensing_codebook()?;
    let narrow = ctx.config.narrow_codebook()?;
    let p_bs = dbm_to_linear(data.meta.p_bs_dbm);
    let eval_cfg = &ctx.config.eval;

    // Headline report at the configured operating point.
    let headline = evaluate_all(&EvalContext {
        model: &model,
        engine: &engine,
        test: &data.test,
        channels: &test_channels,
        sensing: &sensing,
        narrow: &narrow,
        adversarial: adversarial.as_deref(),
        p_bs,
        se_sigma2: dbm_to_linear(eval_cfg.se_noise_dbm),
        selection_noise: NoiseModel::Fixed {
            power_dbm: eval_cfg.se_noise_dbm,
        },
        mrt_phase_bits: ctx.config.codebook.mrt_phase_bits,
        ks: &eval_cfg.ks,
        refine_k: eval_cfg.refine_k,
        seed: derive_seed(ctx.config.seed, &[domain::EVAL, 0]),
    })?;

    // Noise sweep: re-measure test features at each grid point.
    let mut noise_sweep: Vec<MetricsReport> = Vec::with_capacity(eval_cfg.noise_grid_dbm.len());
    for (lvl, &noise_dbm) in eval_cfg.noise_grid_dbm.iter().enumerate() {
        let noise = NoiseModel::Fixed {
            power_dbm: noise_dbm,
        };
        let level_seed = derive_seed(ctx.config.seed, &[domain::EVAL, 1 + lvl as u64]);
        let remeasured: Vec<Sample> = data
            .test
            .iter()
            .zip(&test_channels)
            .map(|(s, h)| {
                let mut stream = RngStream::keyed(level_seed, &[domain::NOISE, s.ue_id as u64]);
                Ok(Sample {
                    rssi: measure_rssi(h, &sensing, p_bs, &noise, &mut stream)?,
                    ..s.clone()
                })
            })
            .collect::<Result<_, CliError>>()?;
        noise_sweep.push(evaluate_all(&EvalContext {
            model: &model,
            engine: &engine,
            test: &remeasured,
            channels: &test_channels,
            sensing: &sensing,
            narrow: &narrow,
            adversarial: None,
            p_bs,
            se_sigma2: dbm_to_linear(noise_dbm),
            selection_noise: noise,
            mrt_phase_bits: ctx.config.codebook.mrt_phase_bits,
            ks: &eval_cfg.ks,
            refine_k: eval_cfg.refine_k,
            seed: level_seed,
        })?);
    }

    // Reliability diagrams for both heads on clean and adversarial inputs.
    let score_sets = |samples: &[Sample]| -> Result<_, CliError> {
        let mut cred = Vec::with_capacity(samples.len());
        let mut cred_ok = Vec::with_capacity(samples.len());
        let mut conf = Vec::with_capacity(samples.len());
        let mut conf_ok = Vec::with_capacity(samples.len());
        for s in samples {
            let verdict = engine.predict(&s.rssi, &model)?;
            cred.push(verdict.credibility);
            cred_ok.push(verdict.prediction == s.label);
            let (logits, _) = model.forward(&s.rssi)?;
            let probs = beamcred_core::model::softmax(&logits);
            let top = model.predict_topk(&s.rssi, 1)?[0];
            conf.push(probs[top]);
            conf_ok.push(top == s.label);
        }
        Ok(((cred, cred_ok), (conf, conf_ok)))
    };
    let ((cred, cred_ok), (conf, conf_ok)) = score_sets(&data.test)?;
    let bins = eval_cfg.bins;
    let reliability_dknn_clean =
        reliability_diagram(&cred, &cred_ok, bins)?.with_source(ScoreSource::DknnCredibility);
    let reliability_softmax_clean =
        reliability_diagram(&conf, &conf_ok, bins)?.with_source(ScoreSource::SoftmaxConfidence);
    let (reliability_dknn_adversarial, reliability_softmax_adversarial) = match &adversarial {
        None => (None, None),
        Some(adv) => {
            let ((ac, ak), (sc, sk)) = score_sets(adv)?;
            (
                Some(
                    reliability_diagram(&ac, &ak, bins)?
                        .with_source(ScoreSource::DknnCredibility),
                ),
                Some(
                    reliability_diagram(&sc, &sk, bins)?
                        .with_source(ScoreSource::SoftmaxConfidence),
                ),
            )
        }
    };

    let file = ReportFile {
        version: 1,
        config_hash: ctx.config.config_hash(),
        report: headline,
        noise_sweep,
        reliability_dknn_clean,
        reliability_softmax_clean,
        reliability_dknn_adversarial,
        reliability_softmax_adversarial,
    };
    let report_path = ctx.path("report.json");
    write_report(&report_path, &file)?;
    std::fs::write(ctx.path("fig2.csv"), accuracy_csv(&file.noise_sweep))?;
    std::fs::write(ctx.path("fig3.csv"), efficiency_csv(&file.noise_sweep))?;
    std::fs::write(
        ctx.path("fig4a.csv"),
        reliability_csv(
            &file.reliability_dknn_clean,
            file.reliability_dknn_adversarial.as_ref(),
        ),
    )?;
    std::fs::write(
        ctx.path("fig4b.csv"),
        reliability_csv(
            &file.reliability_softmax_clean,
            file.reliability_softmax_adversarial.as_ref(),
        ),
    )?;
    println!(
        "wrote {} and fig2/fig3/fig4a/fig4b CSVs ({} test samples, {} noise points)",
        report_path.display(),
        data.test.len(),
        file.noise_sweep.len()
    );

    if let Some(sample_id) = args.explain {
        let sample = data.test.get(sample_id).ok_or_else(|| {
            CliError::Config(format!(
                "--explain {sample_id}: test split has {} samples",
                data.test.len()
            ))
        })?;
        let verdict = engine.predict(&sample.rssi, &model)?;
        println!("{}", verdict_json(sample_id, sample, &verdict));
    }
    Ok(report_path)
}

pub(super) fn load_engine_and_model(
    ctx: &CommandCtx,
    dataset_flag: Option<&std::path::Path>,
    checkpoint_flag: Option<&std::path::Path>,
    index_flag: Option<&std::path::Path>,
    calibration_flag: Option<&std::path::Path>,
) -> Result<(beamcred_core::sweep::Dataset, ModelState, DknnEngine), CliError> {
    let (data, d_header) = dataset::read_dataset(&ctx.dataset_path(dataset_flag))?;
    ctx.check_lineage(d_header.config_hash.as_deref(), "dataset")?;
    let (model, c_header) = checkpoint::read_checkpoint(&ctx.checkpoint_path(checkpoint_flag))?;
    ctx.check_lineage(c_header.config_hash.as_deref(), "checkpoint")?;
    let (neighbor_index, i_header) = index::read_index(&ctx.index_path(index_flag))?;
    ctx.check_lineage(i_header.config_hash.as_deref(), "index")?;
    let (scores, cal_file) = index::read_calibration(&ctx.calibration_path(calibration_flag))?;
    ctx.check_lineage(cal_file.config_hash.as_deref(), "calibration")?;
    Ok((
        data,
        model,
        DknnEngine {
            index: neighbor_index,
            calibration: scores,
        },
    ))
}
