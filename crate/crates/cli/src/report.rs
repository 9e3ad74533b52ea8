//! Report and figure exports: `report.json` plus per-figure CSV files
//! (`fig2.csv` accuracy versus noise, `fig3.csv` spectral efficiency versus
//! noise, `fig4a.csv`/`fig4b.csv` reliability diagrams) for plotting by any
//! external tool.

use beamcred_core::eval::{MetricsReport, ReliabilityDiagram};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use crate::CliError;

/// Top-level document written to `report.json`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ReportFile {
    pub version: u32,
    pub config_hash: String,
    /// Headline metrics at the configured operating point.
    pub report: MetricsReport,
    /// One report per swept noise power, feeding the figure CSVs.
    pub noise_sweep: Vec<MetricsReport>,
    pub reliability_dknn_clean: ReliabilityDiagram,
    pub reliability_softmax_clean: ReliabilityDiagram,
    pub reliability_dknn_adversarial: Option<ReliabilityDiagram>,
    pub reliability_softmax_adversarial: Option<ReliabilityDiagram>,
}

pub fn write_report(path: &Path, file: &ReportFile) -> Result<(), CliError> {
    std::fs::write(path, serde_json::to_vec_pretty(file).expect("serializes"))?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<ReportFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read report {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("report parse error: {e}")))
}

/// `fig2.csv`: noise_dbm,method,k,accuracy.
pub fn accuracy_csv(sweep: &[MetricsReport]) -> String {
    let mut out = String::from("noise_dbm,method,k,accuracy\n");
    for report in sweep {
        for m in &report.methods {
            for &(k, acc) in &m.topk_accuracy {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    report.meta.se_noise_dbm, m.method, k, acc
                );
            }
        }
    }
    out
}

/// `fig3.csv`: noise_dbm,method,mean_spectral_efficiency.
pub fn efficiency_csv(sweep: &[MetricsReport]) -> String {
    let mut out = String::from("noise_dbm,method,mean_spectral_efficiency\n");
    for report in sweep {
        for m in &report.methods {
            let _ = writeln!(
                out,
                "{},{},{}",
                report.meta.se_noise_dbm, m.method, m.mean_spectral_efficiency
            );
        }
    }
    out
}

/// `fig4a.csv` / `fig4b.csv`: set,bin_low,bin_high,count,accuracy (accuracy
/// empty for bins with no samples).
pub fn reliability_csv(
    clean: &ReliabilityDiagram,
    adversarial: Option<&ReliabilityDiagram>,
) -> String {
    let mut out = String::from("set,bin_low,bin_high,count,accuracy\n");
    let mut emit = |name: &str, d: &ReliabilityDiagram| {
        for b in &d.bins {
            let acc = b.accuracy.map(|a| a.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{name},{},{},{},{acc}", b.low, b.high, b.count);
        }
    };
    emit("clean", clean);
    if let Some(adv) = adversarial {
        emit("adversarial", adv);
    }
    out
}
