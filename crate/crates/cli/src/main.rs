//! Command-line entry point for the beam-alignment toolkit.

use std::path::PathBuf;
use std::process::ExitCode;

use beamcred::commands::{self, CommandCtx};
use beamcred::config::RunConfig;
use beamcred::CliError;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "beamcred",
    version,
    about = "Simulate, train, calibrate, attack, and evaluate a conformal beam-alignment pipeline",
    long_about = "Pipeline stages write their artifacts into the workspace directory:\n\
                  generate -> dataset.bae, train -> model.ckpt + loss_history.csv,\n\
                  calibrate -> index.dknn + calibration.json, attack -> adversarial.bae,\n\
                  eval -> report.json + fig2/fig3/fig4a/fig4b CSVs.\n\
                  One --seed fixes every artifact bit-for-bit."
)]
struct Cli {
    /// JSON run configuration; built-in defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Artifact directory (falls back to BEAMCRED_WORKSPACE, then the
    /// config's paths.workspace, then the current directory).
    #[arg(long, global = true)]
    workspace: Option<PathBuf>,

    /// Override the config's global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override a config field, e.g. --set scenario.n_ue=5000
    /// or --set sweep.noise='{"mode":"none"}'.
    #[arg(long = "set", global = true, value_parser = parse_set, value_name = "KEY=VALUE")]
    set: Vec<(String, String)>,

    /// Accept artifacts produced under a different config hash.
    #[arg(long, global = true)]
    allow_mismatch: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize channels, sweep RSSI, label, split, and write dataset.bae.
    Generate {
        /// Re-derive every label with an independent exhaustive search.
        #[arg(long)]
        verify_labels: bool,
        /// Export the normalized channel set (interleaved f64 re,im rows).
        #[arg(long)]
        export_channels: bool,
        /// Export both codebooks with JSON sidecars.
        #[arg(long)]
        export_codebooks: bool,
    },
    /// Train the classifier and write model.ckpt plus loss_history.csv.
    Train {
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Overwrite an existing checkpoint.
        #[arg(long)]
        force: bool,
    },
    /// Build the neighbor index and calibration scores.
    Calibrate {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Write gradient-sign adversarial variants of the test split.
    Attack {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Absolute perturbation magnitude (overrides the config).
        #[arg(long)]
        epsilon: Option<f64>,
        /// Comma-separated magnitudes; one artifact per value.
        #[arg(long, value_delimiter = ',')]
        epsilon_sweep: Vec<f64>,
    },
    /// Evaluate all methods; write report.json and the figure CSVs.
    Eval {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        calibration: Option<PathBuf>,
        /// Adversarial dataset to score alongside the clean test set.
        #[arg(long)]
        adversarial: Option<PathBuf>,
        /// Also print the neighbor report for one test sample.
        #[arg(long, value_name = "SAMPLE_ID")]
        explain: Option<usize>,
    },
    /// Print the conformal verdict and per-layer neighbors for one sample.
    Explain {
        #[arg(long)]
        sample_id: usize,
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        index: Option<PathBuf>,
        #[arg(long)]
        calibration: Option<PathBuf>,
    },
}

fn parse_set(raw: &str) -> Result<(String, String), String> {
    match raw.split_once('=') {
        Some((k, v)) if !k.is_empty() => Ok((k.to_string(), v.to_string())),
        _ => Err(format!("expected KEY=VALUE, got `{raw}`")),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = RunConfig::load(cli.config.as_deref(), &cli.set, cli.seed)?;
    let workspace = config.workspace(cli.workspace.as_deref());
    let ctx = CommandCtx::new(config, workspace, cli.allow_mismatch);
    match cli.command {
        Command::Generate {
            verify_labels,
            export_channels,
            export_codebooks,
        } => {
            commands::generate(
                &ctx,
                &commands::GenerateArgs {
                    verify_labels,
                    export_channels,
                    export_codebooks,
                },
            )?;
        }
        Command::Train { dataset, force } => {
            commands::train(&ctx, &commands::TrainArgs { dataset, force })?;
        }
        Command::Calibrate {
            dataset,
            checkpoint,
        } => {
            commands::calibrate(&ctx, dataset, checkpoint)?;
        }
        Command::Attack {
            dataset,
            checkpoint,
            epsilon,
            epsilon_sweep,
        } => {
            commands::attack(
                &ctx,
                &commands::AttackArgs {
                    dataset,
                    checkpoint,
                    epsilon,
                    epsilon_sweep,
                },
            )?;
        }
        Command::Eval {
            dataset,
            checkpoint,
            index,
            calibration,
            adversarial,
            explain,
        } => {
            commands::eval(
                &ctx,
                &commands::EvalArgs {
                    dataset,
                    checkpoint,
                    index,
                    calibration,
                    adversarial,
                    explain,
                },
            )?;
        }
        Command::Explain {
            sample_id,
            dataset,
            checkpoint,
            index,
            calibration,
        } => {
            commands::explain(
                &ctx,
                &commands::ExplainArgs {
                    dataset,
                    checkpoint,
                    index,
                    calibration,
                    sample_id,
                },
            )?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
