//! Seeded deterministic training: mini-batch adaptive-moment descent by
//! default, plus a full-batch mode with backtracking steps whose train loss
//! is non-increasing by construction.

use alloc::vec;
use alloc::vec::Vec;

use super::{softmax_cross_entropy, ModelConfig, ModelState};
use crate::rng::{domain, RngStream};
use crate::sweep::{Dataset, FeatureScale, Sample};
use crate::{Error, Result};

/// Optimization regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TrainMode {
    /// Shuffled mini-batches with adaptive-moment updates.
    #[default]
    Minibatch,
    /// Full-batch gradient descent; each step is halved until the loss does
    /// not increase, so the per-epoch train loss is monotone.
    FullBatchMonotone,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Stop after this many epochs without validation-loss improvement.
    pub patience: Option<usize>,
    pub mode: TrainMode,
    /// First/second moment decay rates.
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 1e-3,
            epochs: 100,
            batch_size: 128,
            seed: 0,
            patience: None,
            mode: TrainMode::Minibatch,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        if self.batch_size < 1 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::invalid("learning_rate must be > 0"));
        }
        Ok(())
    }
}

/// Per-epoch loss record.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: usize,
}

impl Adam {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64], tc: &TrainingConfig) {
        self.step += 1;
        let bc1 = 1.0 - libm::pow(tc.beta1, self.step as f64);
        let bc2 = 1.0 - libm::pow(tc.beta2, self.step as f64);
        for i in 0..params.len() {
            self.m[i] = tc.beta1 * self.m[i] + (1.0 - tc.beta1) * grad[i];
            self.v[i] = tc.beta2 * self.v[i] + (1.0 - tc.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= tc.learning_rate * m_hat / (libm::sqrt(v_hat) + tc.epsilon);
        }
    }
}

/// Fit the input standardization on the training split (scalar mean and
/// standard deviation over all transformed feature entries).
fn fit_input_stats(train: &[Sample], scale: FeatureScale) -> (f64, f64) {
    let mut count = 0usize;
    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    for s in train {
        for &v in &s.rssi {
            let t = match scale {
                FeatureScale::Linear => v,
                FeatureScale::Log => libm::log(v + super::LOG_FLOOR),
            };
            count += 1;
            let delta = t - mean;
            mean += delta / count as f64;
            m2 += delta * (t - mean);
        }
    }
    if count == 0 {
        return (0.0, 1.0);
    }
    let std = libm::sqrt(m2 / count as f64);
    if std > 1e-12 {
        (mean, 1.0 / std)
    } else {
        (mean, 1.0)
    }
}

fn mean_loss(model: &ModelState, samples: &[Sample]) -> Result<f64> {
    let mut total = 0.0;
    for s in samples {
        let (logits, _) = model.forward(&s.rssi)?;
        total += softmax_cross_entropy(&logits, s.label)?;
    }
    Ok(total / samples.len() as f64)
}

/// Train a fresh model on the dataset's train split.
///
/// Deterministic for a fixed `(dataset, mc, tc)`: initialization and epoch
/// shuffles are keyed off `tc.seed`, and batch gradients accumulate in sample
/// order. Validation loss is tracked when the validation split is nonempty.
pub fn train(dataset: &Dataset, mc: &ModelConfig, tc: &TrainingConfig) -> Result<ModelState> {
    tc.validate()?;
    mc.validate()?;
    if dataset.train.is_empty() {
        return Err(Error::degenerate("empty training split"));
    }
    if mc.input_len != dataset.meta.m_w {
        return Err(Error::invalid("model input_len does not match dataset m_w"));
    }
    if mc.n_classes != dataset.meta.q {
        return Err(Error::invalid("model n_classes does not match dataset q"));
    }

    let mut model = ModelState::init(mc.clone(), tc.seed)?;
    let (shift, scale) = fit_input_stats(&dataset.train, mc.feature_scale);
    model.input_shift = shift;
    model.input_scale = scale;

    match tc.mode {
        TrainMode::Minibatch => train_minibatch(&mut model, dataset, tc)?,
        TrainMode::FullBatchMonotone => train_monotone(&mut model, dataset, tc)?,
    }
    model.meta.seed = tc.seed;
    model.meta.learning_rate = tc.learning_rate;
    model.meta.beta1 = tc.beta1;
    model.meta.beta2 = tc.beta2;
    model.meta.epsilon = tc.epsilon;
    model.meta.batch_size = tc.batch_size;
    model.meta.mode = tc.mode;
    Ok(model)
}

fn train_minibatch(model: &mut ModelState, dataset: &Dataset, tc: &TrainingConfig) -> Result<()> {
    let train = &dataset.train;
    let mut adam = Adam::new(model.params.len());
    let mut grad = vec![0.0; model.params.len()];
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(tc.epochs);
    let mut best_val = f64::INFINITY;
    let mut stale = 0usize;

    for epoch in 0..tc.epochs {
        let mut shuffle = RngStream::keyed(tc.seed, &[domain::SHUFFLE, epoch as u64]);
        shuffle.shuffle(&mut order);

        let mut epoch_loss = 0.0;
        for batch in order.chunks(tc.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_loss = 0.0;
            for &idx in batch {
                let s = &train[idx];
                let (loss, _) = model.accumulate_gradients(&s.rssi, s.label, &mut grad)?;
                batch_loss += loss;
            }
            if !batch_loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            let inv = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= inv);
            adam.update(&mut model.params, &grad, tc);
            epoch_loss += batch_loss;
        }
        let train_loss = epoch_loss / train.len() as f64;
        if !train_loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }

        let validation_loss = if dataset.validation.is_empty() {
            None
        } else {
            Some(mean_loss(model, &dataset.validation)?)
        };
        history.push(EpochStats {
            epoch,
            train_loss,
            validation_loss,
        });

        if let (Some(patience), Some(val)) = (tc.patience, validation_loss) {
            if val + 1e-12 < best_val {
                best_val = val;
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    break;
                }
            }
        }
    }

    finish_meta(model, history);
    Ok(())
}

fn train_monotone(model: &mut ModelState, dataset: &Dataset, tc: &TrainingConfig) -> Result<()> {
    let train = &dataset.train;
    let mut history = Vec::with_capacity(tc.epochs);
    let mut current_loss = mean_loss(model, train)?;
    let mut grad = vec![0.0; model.params.len()];

    for epoch in 0..tc.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for s in train {
            model.accumulate_gradients(&s.rssi, s.label, &mut grad)?;
        }
        let inv = 1.0 / train.len() as f64;
        grad.iter_mut().for_each(|g| *g *= inv);

        // Backtracking: halve the step until the loss stops increasing.
        let saved = model.params.clone();
        let mut step = tc.learning_rate;
        let mut accepted = current_loss;
        for _ in 0..40 {
            for (p, (&s0, &g)) in model.params.iter_mut().zip(saved.iter().zip(grad.iter())) {
                *p = s0 - step * g;
            }
            let candidate = mean_loss(model, train)?;
            if !candidate.is_finite() {
                return Err(Error::TrainingDiverged { epoch });
            }
            if candidate <= current_loss {
                accepted = candidate;
                break;
            }
            step *= 0.5;
        }
        if accepted > current_loss {
            // No acceptable step; keep the old parameters.
            model.params.copy_from_slice(&saved);
            accepted = current_loss;
        }
        current_loss = accepted;

        let validation_loss = if dataset.validation.is_empty() {
            None
        } else {
            Some(mean_loss(model, &dataset.validation)?)
        };
        history.push(EpochStats {
            epoch,
            train_loss: current_loss,
            validation_loss,
        });
    }

    finish_meta(model, history);
    Ok(())
}

fn finish_meta(model: &mut ModelState, history: Vec<EpochStats>) {
    model.meta.epochs_run = history.len();
    if let Some(last) = history.last() {
        model.meta.final_train_loss = last.train_loss;
        model.meta.final_validation_loss = last.validation_loss;
    }
    model.meta.history = history;
}
