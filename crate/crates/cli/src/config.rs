//! Run configuration: one JSON file drives the whole pipeline.
//!
//! Sections resolve into the core crate's config types; the global `seed`
//! feeds every derived stream (channels, noise, init, shuffles, hashing, and
//! evaluation re-measurement), so a config file pins every artifact
//! bit-for-bit. A stable hash of the resolved config is embedded in every
//! artifact file and checked at evaluation time.

use beamcred_core::channel::{AngleSampling, GainModel, ScenarioConfig};
use beamcred_core::codebook::{dft_codebook, odft_codebook, Codebook};
use beamcred_core::dknn::{Backend, DknnConfig, LshConfig};
use beamcred_core::model::{LayerSpec, ModelConfig, TrainMode, TrainingConfig};
use beamcred_core::rng::RngStream;
use beamcred_core::sweep::{FeatureScale, NoiseModel, SplitFractions, SweepConfig};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ScenarioSection {
    pub n_bs: usize,
    pub n_paths: usize,
    pub d_over_lambda: f64,
    pub n_ue: usize,
    pub angle_range: (f64, f64),
    pub angle_sampling: AngleSampling,
    pub gain_model: GainModel,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            n_bs: 32,
            n_paths: 5,
            d_over_lambda: 0.5,
            n_ue: 5000,
            angle_range: (-1.5, 1.5),
            angle_sampling: AngleSampling::Uniform,
            gain_model: GainModel::los_default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct CodebookSection {
    /// Narrow-codebook oversampling factor (Q = n_bs * oversampling).
    pub oversampling: usize,
    /// Sensing beams swept for features; defaults to n_bs.
    pub m_w: Option<usize>,
    /// Phase resolution of the matched-filter ceiling.
    pub mrt_phase_bits: u32,
}

impl Default for CodebookSection {
    fn default() -> Self {
        CodebookSection {
            oversampling: 4,
            m_w: None,
            mrt_phase_bits: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(default)]
pub struct ModelSection {
    /// Interpret the RSSI vector as 1-D (`null`) or reshape to rows x cols.
    pub reshape_2d: Option<(usize, usize)>,
    /// Explicit layer stack; `null` selects the built-in architecture.
    pub layers: Option<Vec<LayerSpec>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TrainingSection {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: Option<usize>,
    pub mode: TrainMode,
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection {
            learning_rate: 1e-3,
            epochs: 100,
            batch_size: 128,
            patience: None,
            mode: TrainMode::Minibatch,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct DknnSection {
    pub k: usize,
    #[serde(flatten)]
    pub backend: Backend,
    pub layer_mask: Option<Vec<usize>>,
}

impl Default for DknnSection {
    fn default() -> Self {
        DknnSection {
            k: 10,
            backend: Backend::Exact,
            layer_mask: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct AttackSection {
    /// Absolute perturbation in linear feature units.
    pub epsilon: Option<f64>,
    /// Perturbation as a fraction of the mean per-sample RMS RSSI; used when
    /// `epsilon` is absent.
    pub relative_epsilon: f64,
    /// Defaults to clamping for linear features, no clamping for log ones.
    pub clamp_nonnegative: Option<bool>,
    pub relative_power_budget: Option<f64>,
}

impl Default for AttackSection {
    fn default() -> Self {
        AttackSection {
            epsilon: None,
            relative_epsilon: 0.1,
            clamp_nonnegative: None,
            relative_power_budget: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct EvalSection {
    /// Top-k accuracy levels.
    pub ks: Vec<usize>,
    /// Reliability-diagram bins.
    pub bins: usize,
    /// Verification-sweep size for the refined rows.
    pub refine_k: usize,
    /// Noise power for the headline report's SE column and baseline
    /// selections.
    pub se_noise_dbm: f64,
    /// Noise powers swept for the accuracy/SE-versus-SNR exports.
    pub noise_grid_dbm: Vec<f64>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            ks: vec![1, 3, 5],
            bins: 10,
            refine_k: 5,
            se_noise_dbm: -60.0,
            noise_grid_dbm: vec![-90.0, -80.0, -70.0, -60.0, -50.0, -40.0, -28.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
#[serde(default)]
pub struct PathsSection {
    /// Output directory for every artifact; overridable by `--workspace` or
    /// the BEAMCRED_WORKSPACE environment variable.
    pub workspace: Option<PathBuf>,
}

/// The whole experiment description.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub scenario: ScenarioSection,
    pub codebook: CodebookSection,
    pub sweep: SweepSection,
    pub model: ModelSection,
    pub training: TrainingSection,
    pub dknn: DknnSection,
    pub attack: AttackSection,
    pub eval: EvalSection,
    pub paths: PathsSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SweepSection {
    pub p_bs_dbm: f64,
    pub splits: SplitFractions,
    pub noise: NoiseModel,
    pub feature_scale: FeatureScale,
}

impl Default for SweepSection {
    fn default() -> Self {
        let d = SweepConfig::default();
        SweepSection {
            p_bs_dbm: d.p_bs_dbm,
            splits: d.splits,
            noise: d.noise,
            feature_scale: d.feature_scale,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            scenario: ScenarioSection::default(),
            codebook: CodebookSection::default(),
            sweep: SweepSection::default(),
            model: ModelSection::default(),
            training: TrainingSection::default(),
            dknn: DknnSection::default(),
            attack: AttackSection::default(),
            eval: EvalSection::default(),
            paths: PathsSection::default(),
        }
    }
}

impl RunConfig {
    /// Load a config file, apply `--set key=value` overrides, then the
    /// `--seed` override.
    pub fn load(
        path: Option<&Path>,
        sets: &[(String, String)],
        seed: Option<u64>,
    ) -> Result<Self, CliError> {
        let mut value: serde_json::Value = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Config(format!("cannot read config {}: {e}", p.display()))
                })?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("config parse error: {e}")))?
            }
            None => serde_json::to_value(RunConfig::default()).expect("default serializes"),
        };
        for (key, raw) in sets {
            apply_override(&mut value, key, raw)?;
        }
        let mut config: RunConfig = serde_json::from_value(value)
            .map_err(|e| CliError::Config(format!("config error: {e}")))?;
        if let Some(s) = seed {
            config.seed = s;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.scenario_config().validate()?;
        self.sweep_config().splits.validate()?;
        self.sweep_config().noise.validate()?;
        self.model_config().validate()?;
        self.training_config().validate()?;
        if self.codebook.oversampling < 1 {
            return Err(CliError::Config("oversampling must be >= 1".into()));
        }
        if let Some(m_w) = self.codebook.m_w {
            if m_w < 1 || m_w > self.scenario.n_bs {
                return Err(CliError::Config("m_w must be in 1..=n_bs".into()));
            }
        }
        if let Some((rows, cols)) = self.model.reshape_2d {
            if rows * cols != self.m_w() {
                return Err(CliError::Config(format!(
                    "reshape {rows}x{cols} does not tile the {} sensing features",
                    self.m_w()
                )));
            }
        }
        if self.eval.bins < 1 {
            return Err(CliError::Config("eval.bins must be >= 1".into()));
        }
        let q = self.scenario.n_bs * self.codebook.oversampling;
        if self.eval.ks.is_empty() || self.eval.ks.iter().any(|&k| k == 0 || k > q) {
            return Err(CliError::Config("eval.ks must lie in 1..=Q".into()));
        }
        Ok(())
    }

    pub fn scenario_config(&self) -> ScenarioConfig {
        let s = &self.scenario;
        ScenarioConfig {
            n_bs: s.n_bs,
            n_paths: s.n_paths,
            d_over_lambda: s.d_over_lambda,
            n_ue: s.n_ue,
            angle_range: s.angle_range,
            angle_sampling: s.angle_sampling,
            gain_model: s.gain_model,
            seed: self.seed,
        }
    }

    pub fn m_w(&self) -> usize {
        self.codebook.m_w.unwrap_or(self.scenario.n_bs)
    }

    pub fn q(&self) -> usize {
        self.scenario.n_bs * self.codebook.oversampling
    }

    pub fn sensing_codebook(&self) -> Result<Codebook, CliError> {
        let full = dft_codebook(self.scenario.n_bs)?;
        Ok(full.strided_subset(self.m_w())?)
    }

    pub fn narrow_codebook(&self) -> Result<Codebook, CliError> {
        Ok(odft_codebook(self.scenario.n_bs, self.codebook.oversampling)?)
    }

    pub fn sweep_config(&self) -> SweepConfig {
        SweepConfig {
            p_bs_dbm: self.sweep.p_bs_dbm,
            splits: self.sweep.splits,
            noise: self.sweep.noise,
            feature_scale: self.sweep.feature_scale,
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        let m_w = self.m_w();
        let q = self.q();
        let mut mc = match self.model.reshape_2d {
            None => ModelConfig::baseline_1d(m_w, q),
            Some((rows, cols)) => ModelConfig::baseline_2d(rows, cols, q),
        };
        if let Some(layers) = &self.model.layers {
            mc.layers = layers.clone();
        }
        mc.feature_scale = self.sweep.feature_scale;
        mc
    }

    pub fn training_config(&self) -> TrainingConfig {
        TrainingConfig {
            learning_rate: self.training.learning_rate,
            epochs: self.training.epochs,
            batch_size: self.training.batch_size,
            seed: self.seed,
            patience: self.training.patience,
            mode: self.training.mode,
            ..TrainingConfig::default()
        }
    }

    pub fn dknn_config(&self) -> DknnConfig {
        let backend = match &self.dknn.backend {
            Backend::Exact => Backend::Exact,
            Backend::Lsh(lsh) => Backend::Lsh(LshConfig {
                // Hash projections follow the global seed.
                seed: derive_seed(self.seed, &[0x15, 0]),
                ..lsh.clone()
            }),
        };
        DknnConfig {
            k: self.dknn.k,
            backend,
            layer_mask: self.dknn.layer_mask.clone(),
        }
    }

    /// Clamp default: linear-power features stay nonnegative, log features
    /// are unconstrained.
    pub fn attack_clamp(&self) -> bool {
        self.attack
            .clamp_nonnegative
            .unwrap_or(matches!(self.sweep.feature_scale, FeatureScale::Linear))
    }

    /// Stable content hash of the resolved config, embedded in every
    /// artifact and checked by `eval`.
    pub fn config_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100_0000_01b3);
        }
        format!("{h:016x}")
    }

    /// Workspace resolution order: flag, environment, config, current dir.
    pub fn workspace(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Ok(env) = std::env::var("BEAMCRED_WORKSPACE") {
            if !env.is_empty() {
                return PathBuf::from(env);
            }
        }
        self.paths
            .workspace
            .clone()
            .unwrap_or_else(|| PathBuf::from("."))
    }
}

/// Derive an independent seed from the global one.
pub fn derive_seed(seed: u64, words: &[u64]) -> u64 {
    RngStream::keyed(seed, words).next_u64()
}

/// Apply one `key.path=value` override onto the raw JSON tree.
fn apply_override(root: &mut serde_json::Value, key: &str, raw: &str) -> Result<(), CliError> {
    let parsed: serde_json::Value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if !node.is_object() {
            return Err(CliError::Config(format!(
                "--set {key}: `{}` is not an object",
                parts[..i].join(".")
            )));
        }
        let map = node.as_object_mut().expect("checked above");
        if i + 1 == parts.len() {
            map.insert(part.to_string(), parsed);
            return Ok(());
        }
        node = map
            .entry(part.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    Err(CliError::Config(format!("--set {key}: empty key")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let cfg = RunConfig::default();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn default_sizes_follow_headline_setup() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.scenario.n_bs, 32);
        assert_eq!(cfg.q(), 128);
        assert_eq!(cfg.m_w(), 32);
        assert_eq!(cfg.dknn.k, 10);
        assert_eq!(cfg.training.epochs, 100);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = RunConfig::default();
        let mut b = RunConfig::default();
        assert_eq!(a.config_hash(), b.config_hash());
        b.seed = 2;
        assert_ne!(a.config_hash(), b.config_hash());
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let mut v = serde_json::to_value(RunConfig::default()).unwrap();
        apply_override(&mut v, "scenario.n_ue", "777").unwrap();
        apply_override(&mut v, "sweep.noise", r#"{"mode":"none"}"#).unwrap();
        let cfg: RunConfig = serde_json::from_value(v).unwrap();
        assert_eq!(cfg.scenario.n_ue, 777);
        assert_eq!(cfg.sweep.noise, NoiseModel::None);
    }

    #[test]
    fn reshape_selects_the_2d_stack() {
        let mut cfg = RunConfig::default();
        cfg.codebook.m_w = Some(32);
        cfg.model.reshape_2d = Some((8, 4));
        let mc = cfg.model_config();
        assert_eq!((mc.input_rows, mc.input_cols), (8, 4));
        assert!(mc.validate().is_ok());
        // A reshape that does not tile the feature vector fails validation.
        cfg.model.reshape_2d = Some((5, 5));
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn seed_flag_wins() {
        let cfg = RunConfig::load(None, &[], Some(99)).unwrap();
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.scenario_config().seed, 99);
        assert_eq!(cfg.training_config().seed, 99);
    }

    #[test]
    fn invalid_sections_rejected() {
        let out = RunConfig::load(
            None,
            &[("codebook.oversampling".to_string(), "0".to_string())],
            None,
        );
        assert!(matches!(out, Err(CliError::Config(_))));
    }

    #[test]
    fn lsh_seed_derives_from_global() {
        let sets = vec![("dknn.backend".to_string(), "\"lsh\"".to_string())];
        let a = RunConfig::load(None, &sets, Some(5)).unwrap();
        let b = RunConfig::load(None, &sets, Some(6)).unwrap();
        match (a.dknn_config().backend, b.dknn_config().backend) {
            (Backend::Lsh(x), Backend::Lsh(y)) => assert_ne!(x.seed, y.seed),
            _ => panic!("expected lsh backends"),
        }
    }
}
