//! Fast gradient-sign adversarial inputs for robustness evaluation.
//!
//! The perturbation moves each feature by `epsilon` in the direction that
//! increases the classification loss against the true label: `x_adv = x +
//! epsilon * sign(dL/dx)`. Entries with exactly zero gradient stay put.
//! Features are received powers, so an optional nonnegativity clamp is
//! applied last.

use alloc::vec::Vec;

use crate::model::ModelState;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AttackConfig {
    /// Perturbation magnitude in feature units.
    pub epsilon: f64,
    /// Clamp adversarial features at zero (on for linear-power features,
    /// off for log-scale ones).
    pub clamp_nonnegative: bool,
    /// Optional cap on the perturbation-to-signal ratio `||delta||/||x||`;
    /// the perturbation is scaled down if it exceeds the budget.
    pub relative_power_budget: Option<f64>,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            epsilon: 0.0,
            clamp_nonnegative: true,
            relative_power_budget: None,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(Error::invalid("epsilon must be >= 0"));
        }
        if let Some(b) = self.relative_power_budget {
            if b.is_nan() || b < 0.0 {
                return Err(Error::invalid("relative power budget must be >= 0"));
            }
        }
        Ok(())
    }
}

/// Root-mean-square of a feature vector.
pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    libm::sqrt(x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64)
}

/// Translate a relative budget (fraction of the per-sample RMS RSSI) into an
/// absolute epsilon for one sample.
pub fn epsilon_from_relative(x: &[f64], fraction: f64) -> f64 {
    fraction * rms(x)
}

/// Generate one adversarial feature vector.
pub fn fgsm(
    x: &[f64],
    true_label: usize,
    model: &ModelState,
    cfg: &AttackConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let pass = model.backward(x, true_label)?;
    let mut delta: Vec<f64> = pass
        .input_grad
        .iter()
        .map(|&g| {
            if g > 0.0 {
                cfg.epsilon
            } else if g < 0.0 {
                -cfg.epsilon
            } else {
                0.0
            }
        })
        .collect();
    if let Some(budget) = cfg.relative_power_budget {
        let num = libm::sqrt(delta.iter().map(|d| d * d).sum::<f64>());
        let den = libm::sqrt(x.iter().map(|v| v * v).sum::<f64>());
        if den > 0.0 && num > budget * den {
            let scale = budget * den / num;
            delta.iter_mut().for_each(|d| *d *= scale);
        }
    }
    Ok(x.iter()
        .zip(&delta)
        .map(|(&xi, &di)| {
            let v = xi + di;
            if cfg.clamp_nonnegative {
                v.max(0.0)
            } else {
                v
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{softmax_cross_entropy, LayerSpec, ModelConfig, ModelState};
    use crate::sweep::FeatureScale;
    use alloc::vec;

    fn model(seed: u64) -> ModelState {
        let cfg = ModelConfig {
            input_len: 6,
            n_classes: 3,
            input_rows: 1,
            input_cols: 6,
            layers: vec![LayerSpec::conv1d(4, 3, 1, 1), LayerSpec::dense(8)],
            feature_scale: FeatureScale::Linear,
        };
        ModelState::init(cfg, seed).unwrap()
    }

    #[test]
    fn zero_epsilon_is_identity() {
        let m = model(1);
        let x = [0.4, 0.9, 0.1, 0.7, 0.2, 0.5];
        let adv = fgsm(&x, 1, &m, &AttackConfig::default()).unwrap();
        assert_eq!(adv, x.to_vec());
    }

    #[test]
    fn entries_move_by_exactly_epsilon_or_zero() {
        let m = model(2);
        let x = [0.4, 0.9, 0.1, 0.7, 0.2, 0.5];
        let eps = 0.05;
        let cfg = AttackConfig {
            epsilon: eps,
            clamp_nonnegative: false,
            relative_power_budget: None,
        };
        let adv = fgsm(&x, 0, &m, &cfg).unwrap();
        for (a, b) in adv.iter().zip(&x) {
            let d = (a - b).abs();
            assert!(d < 1e-15 || (d - eps).abs() < 1e-15, "delta {d}");
        }
        let linf = adv
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(linf <= eps + 1e-15);
    }

    #[test]
    fn clamp_keeps_features_nonnegative() {
        let m = model(3);
        let x = [0.01, 0.9, 0.0, 0.7, 0.02, 0.5];
        let cfg = AttackConfig {
            epsilon: 0.1,
            clamp_nonnegative: true,
            relative_power_budget: None,
        };
        let adv = fgsm(&x, 2, &m, &cfg).unwrap();
        assert!(adv.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn relative_budget_caps_perturbation_norm() {
        let m = model(4);
        let x = [0.4, 0.9, 0.1, 0.7, 0.2, 0.5];
        let cfg = AttackConfig {
            epsilon: 10.0,
            clamp_nonnegative: false,
            relative_power_budget: Some(0.2),
        };
        let adv = fgsm(&x, 1, &m, &cfg).unwrap();
        let dn = adv
            .iter()
            .zip(&x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(dn <= 0.2 * xn + 1e-12);
    }

    #[test]
    fn attack_is_deterministic() {
        let m = model(5);
        let x = [0.4, 0.9, 0.1, 0.7, 0.2, 0.5];
        let cfg = AttackConfig {
            epsilon: 0.03,
            ..AttackConfig::default()
        };
        assert_eq!(fgsm(&x, 1, &m, &cfg).unwrap(), fgsm(&x, 1, &m, &cfg).unwrap());
    }

    #[test]
    fn small_steps_do_not_decrease_loss() {
        // First-order ascent check over an epsilon sweep.
        let m = model(6);
        let x = [0.4, 0.9, 0.1, 0.7, 0.2, 0.5];
        let label = 1;
        let base = softmax_cross_entropy(&m.forward(&x).unwrap().0, label).unwrap();
        let mut last = base;
        for eps in [1e-4, 1e-3, 1e-2] {
            let cfg = AttackConfig {
                epsilon: eps,
                clamp_nonnegative: false,
                relative_power_budget: None,
            };
            let adv = fgsm(&x, label, &m, &cfg).unwrap();
            let loss = softmax_cross_entropy(&m.forward(&adv).unwrap().0, label).unwrap();
            assert!(loss >= base - 1e-6, "eps {eps}: {loss} < base {base}");
            last = loss;
        }
        assert!(last >= base);
    }

    #[test]
    fn negative_epsilon_rejected() {
        let m = model(7);
        let cfg = AttackConfig {
            epsilon: -0.1,
            ..AttackConfig::default()
        };
        assert!(fgsm(&[0.0; 6], 0, &m, &cfg).is_err());
    }
}
