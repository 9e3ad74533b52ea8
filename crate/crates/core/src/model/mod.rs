//! A small layered classifier with exact gradients.
//!
//! The network is a stack of convolutional layers (1-D by default, 2-D with
//! an input reshape) followed by a fully connected layer; an output head of
//! `n_classes` logits is always appended. Forward passes capture every
//! layer's post-activation output, which is what the conformal engine indexes.
//! Parameters live in one flat `Vec<f64>` so gradients can be checked against
//! finite differences entry by entry.
//!
//! Feature preprocessing (optional log transform plus an affine
//! standardization fitted on the training split) happens inside the model, so
//! input gradients are taken with respect to the raw RSSI vector.

mod train;

pub use train::{train, EpochStats, TrainMode, TrainingConfig};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::rng::{domain, RngStream};
use crate::sweep::FeatureScale;
use crate::{Error, Result};

/// Floor added before taking logs of linear RSSI.
pub const LOG_FLOOR: f64 = 1e-12;

/// Nonlinearity applied after a layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Activation {
    Linear,
    Relu,
}

/// Layer geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum LayerKind {
    /// Cross-correlation over a (rows, cols) grid with zero padding.
    Conv {
        filters: usize,
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
    },
    /// Fully connected layer over the flattened input.
    Dense { units: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub activation: Activation,
}

impl LayerSpec {
    /// Width-`k` 1-D convolution, rectified.
    pub fn conv1d(filters: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        LayerSpec {
            kind: LayerKind::Conv {
                filters,
                kernel: (1, kernel),
                stride: (1, stride),
                padding: (0, padding),
            },
            activation: Activation::Relu,
        }
    }

    /// Square 2-D convolution, rectified.
    pub fn conv2d(filters: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        LayerSpec {
            kind: LayerKind::Conv {
                filters,
                kernel: (kernel, kernel),
                stride: (stride, stride),
                padding: (padding, padding),
            },
            activation: Activation::Relu,
        }
    }

    /// Linear fully connected layer.
    pub fn dense(units: usize) -> Self {
        LayerSpec {
            kind: LayerKind::Dense { units },
            activation: Activation::Linear,
        }
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }
}

/// Network architecture plus input handling.
///
/// `layers` lists the representation layers; a linear `Dense(n_classes)`
/// output head is appended implicitly, so per-layer activations and logits
/// stay distinct.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelConfig {
    pub input_len: usize,
    pub n_classes: usize,
    /// Spatial arrangement of the input vector; (1, input_len) runs the conv
    /// stack in 1-D, anything else reshapes (rows * cols must equal
    /// input_len).
    pub input_rows: usize,
    pub input_cols: usize,
    pub layers: Vec<LayerSpec>,
    pub feature_scale: FeatureScale,
}

impl ModelConfig {
    /// Default architecture: conv 32 (k3 s1 p1), conv 64 (k3 s1 p1),
    /// conv 128 (k1 s1 p0), each rectified, then a linear 128-unit layer,
    /// operating on the input as a 1-D sequence.
    pub fn baseline_1d(input_len: usize, n_classes: usize) -> Self {
        ModelConfig {
            input_len,
            n_classes,
            input_rows: 1,
            input_cols: input_len,
            layers: vec![
                LayerSpec::conv1d(32, 3, 1, 1),
                LayerSpec::conv1d(64, 3, 1, 1),
                LayerSpec::conv1d(128, 1, 1, 0),
                LayerSpec::dense(128),
            ],
            feature_scale: FeatureScale::Log,
        }
    }

    /// Same stack with 3x3 kernels over a (rows, cols) reshape of the input.
    pub fn baseline_2d(rows: usize, cols: usize, n_classes: usize) -> Self {
        ModelConfig {
            input_len: rows * cols,
            n_classes,
            input_rows: rows,
            input_cols: cols,
            layers: vec![
                LayerSpec::conv2d(32, 3, 1, 1),
                LayerSpec::conv2d(64, 3, 1, 1),
                LayerSpec::conv2d(128, 1, 1, 0),
                LayerSpec::dense(128),
            ],
            feature_scale: FeatureScale::Log,
        }
    }

    /// Number of representation layers L (the output head not included).
    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.plan().map(|_| ())
    }

    /// Resolve shapes and flat parameter offsets for every layer plus the
    /// output head.
    pub(crate) fn plan(&self) -> Result<Vec<LayerPlan>> {
        if self.input_len == 0 || self.n_classes == 0 {
            return Err(Error::invalid("input_len and n_classes must be nonzero"));
        }
        if self.input_rows * self.input_cols != self.input_len {
            return Err(Error::invalid(format!(
                "input reshape {}x{} does not cover input_len {}",
                self.input_rows, self.input_cols, self.input_len
            )));
        }
        let mut plans = Vec::with_capacity(self.layers.len() + 1);
        let mut shape = Shape {
            c: 1,
            h: self.input_rows,
            w: self.input_cols,
        };
        let mut offset = 0usize;
        let head = LayerSpec::dense(self.n_classes);
        for (idx, spec) in self.layers.iter().chain(core::iter::once(&head)).enumerate() {
            let (out_shape, w_len, b_len) = match spec.kind {
                LayerKind::Conv {
                    filters,
                    kernel,
                    stride,
                    padding,
                } => {
                    if filters == 0 || kernel.0 == 0 || kernel.1 == 0 {
                        return Err(Error::invalid("conv filters and kernel must be nonzero"));
                    }
                    if stride.0 == 0 || stride.1 == 0 {
                        return Err(Error::invalid("conv stride must be nonzero"));
                    }
                    let oh = conv_extent(shape.h, kernel.0, stride.0, padding.0)
                        .ok_or_else(|| {
                            Error::invalid(format!("layer {idx}: kernel does not tile rows"))
                        })?;
                    let ow = conv_extent(shape.w, kernel.1, stride.1, padding.1)
                        .ok_or_else(|| {
                            Error::invalid(format!("layer {idx}: kernel does not tile cols"))
                        })?;
                    (
                        Shape {
                            c: filters,
                            h: oh,
                            w: ow,
                        },
                        filters * shape.c * kernel.0 * kernel.1,
                        filters,
                    )
                }
                LayerKind::Dense { units } => {
                    if units == 0 {
                        return Err(Error::invalid("dense units must be nonzero"));
                    }
                    (
                        Shape {
                            c: units,
                            h: 1,
                            w: 1,
                        },
                        units * shape.len(),
                        units,
                    )
                }
            };
            let plan = LayerPlan {
                spec: *spec,
                in_shape: shape,
                out_shape,
                w_off: offset,
                b_off: offset + w_len,
            };
            offset += w_len + b_len;
            shape = out_shape;
            plans.push(plan);
        }
        Ok(plans)
    }

    /// Total trainable parameter count.
    pub fn param_count(&self) -> Result<usize> {
        let plans = self.plan()?;
        let last = plans.last().expect("plan is never empty");
        Ok(last.b_off + last.out_shape.c)
    }
}

fn conv_extent(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = input + 2 * padding;
    if padded < kernel {
        return None;
    }
    let span = padded - kernel;
    if !span.is_multiple_of(stride) {
        return None;
    }
    Some(span / stride + 1)
}

/// (channels, rows, cols) extent of a layer input or output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Shape {
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn len(&self) -> usize {
        self.c * self.h * self.w
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LayerPlan {
    pub spec: LayerSpec,
    pub in_shape: Shape,
    pub out_shape: Shape,
    pub w_off: usize,
    pub b_off: usize,
}

/// Post-activation outputs of each representation layer (channel-major
/// flattening) plus the head logits.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerActivations {
    pub layers: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
}

/// Bookkeeping recorded by [`train`], including the optimizer settings the
/// run actually used.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainingMeta {
    pub epochs_run: usize,
    pub final_train_loss: f64,
    pub final_validation_loss: Option<f64>,
    pub seed: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub mode: TrainMode,
    pub history: Vec<EpochStats>,
}

/// Trained (or freshly initialized) parameters with their architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub config: ModelConfig,
    /// All weights and biases, flat; layout is fixed by `config`.
    pub params: Vec<f64>,
    /// Affine standardization applied after the feature-scale transform.
    pub input_shift: f64,
    pub input_scale: f64,
    pub meta: TrainingMeta,
}

impl ModelState {
    /// Fresh state with fan-in-scaled uniform weights and biases. Nonzero
    /// bias init keeps pre-activations off the rectifier kink, where
    /// central-difference gradient checks are ill-defined.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        let plans = config.plan()?;
        let count = config.param_count()?;
        let mut params = vec![0.0; count];
        let mut stream = RngStream::keyed(seed, &[domain::WEIGHT_INIT]);
        for plan in &plans {
            let fan_in = match plan.spec.kind {
                LayerKind::Conv { kernel, .. } => plan.in_shape.c * kernel.0 * kernel.1,
                LayerKind::Dense { .. } => plan.in_shape.len(),
            };
            let bound = libm::sqrt(1.0 / fan_in as f64);
            let b_end = plan.b_off + plan.out_shape.c;
            for p in params[plan.w_off..b_end].iter_mut() {
                *p = stream.uniform_in(-bound, bound);
            }
        }
        Ok(ModelState {
            config,
            params,
            input_shift: 0.0,
            input_scale: 1.0,
            meta: TrainingMeta::default(),
        })
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Apply feature scaling and standardization.
    pub(crate) fn preprocess(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .map(|&v| {
                let t = match self.config.feature_scale {
                    FeatureScale::Linear => v,
                    FeatureScale::Log => libm::log(v + LOG_FLOOR),
                };
                (t - self.input_shift) * self.input_scale
            })
            .collect()
    }

    /// d(preprocessed)/d(raw input) per entry.
    fn preprocess_jacobian(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .map(|&v| match self.config.feature_scale {
                FeatureScale::Linear => self.input_scale,
                FeatureScale::Log => self.input_scale / (v + LOG_FLOOR),
            })
            .collect()
    }

    /// Deterministic forward pass capturing every layer's output.
    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, LayerActivations)> {
        let cache = self.forward_cache(x)?;
        let n_layers = self.config.n_layers();
        let logits = cache.posts[n_layers].clone();
        Ok((
            logits.clone(),
            LayerActivations {
                layers: cache.posts[..n_layers].to_vec(),
                logits,
            },
        ))
    }

    fn forward_cache(&self, x: &[f64]) -> Result<ForwardCache> {
        if x.len() != self.config.input_len {
            return Err(Error::invalid(format!(
                "input length {} does not match model input_len {}",
                x.len(),
                self.config.input_len
            )));
        }
        let plans = self.config.plan()?;
        let mut pres = Vec::with_capacity(plans.len());
        let mut posts: Vec<Vec<f64>> = Vec::with_capacity(plans.len());
        let preprocessed = self.preprocess(x);
        {
            let mut input: &[f64] = &preprocessed;
            for plan in &plans {
                let pre = layer_forward(plan, &self.params, input);
                let post = match plan.spec.activation {
                    Activation::Linear => pre.clone(),
                    Activation::Relu => pre.iter().map(|&z| if z > 0.0 { z } else { 0.0 }).collect(),
                };
                pres.push(pre);
                posts.push(post);
                input = posts.last().expect("just pushed");
            }
        }
        Ok(ForwardCache {
            preprocessed,
            pres,
            posts,
        })
    }

    /// Exact gradients of `softmax_cross_entropy(forward(x), label)` with
    /// respect to every parameter and to the raw input.
    pub fn backward(&self, x: &[f64], label: usize) -> Result<BackwardPass> {
        let mut grad = vec![0.0; self.params.len()];
        let (loss, input_grad) = self.accumulate_gradients(x, label, &mut grad)?;
        Ok(BackwardPass {
            param_grad: grad,
            input_grad,
            loss,
        })
    }

    /// Adds this sample's parameter gradient into `grad_out` and returns the
    /// loss and raw-input gradient.
    pub(crate) fn accumulate_gradients(
        &self,
        x: &[f64],
        label: usize,
        grad_out: &mut [f64],
    ) -> Result<(f64, Vec<f64>)> {
        let cache = self.forward_cache(x)?;
        let plans = self.config.plan()?;
        let logits = &cache.posts[plans.len() - 1];
        let loss = softmax_cross_entropy(logits, label)?;

        // dL/dlogits = softmax - onehot.
        let mut delta = softmax(logits);
        delta[label] -= 1.0;

        for (idx, plan) in plans.iter().enumerate().rev() {
            // delta currently holds dL/d(post-activation of layer idx).
            if plan.spec.activation == Activation::Relu {
                for (d, &z) in delta.iter_mut().zip(&cache.pres[idx]) {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let input: &[f64] = if idx == 0 {
                &cache.preprocessed
            } else {
                &cache.posts[idx - 1]
            };
            delta = layer_backward(plan, &self.params, input, &delta, grad_out);
        }

        // delta is now dL/d(preprocessed input); map back to raw features.
        let jac = self.preprocess_jacobian(x);
        let input_grad = delta.iter().zip(&jac).map(|(d, j)| d * j).collect();
        Ok((loss, input_grad))
    }

    /// Indices of the k largest logits, descending, ties to the lower index.
    pub fn predict_topk(&self, x: &[f64], k: usize) -> Result<Vec<usize>> {
        if k == 0 || k > self.config.n_classes {
            return Err(Error::invalid("k must be in 1..=n_classes"));
        }
        let (logits, _) = self.forward(x)?;
        Ok(rank_desc(&logits, k))
    }
}

/// Indices of the k largest values, descending; equal values keep index order.
pub fn rank_desc(values: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(k);
    order
}

pub(crate) struct ForwardCache {
    pub preprocessed: Vec<f64>,
    pub pres: Vec<Vec<f64>>,
    pub posts: Vec<Vec<f64>>,
}

/// Result of one backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct BackwardPass {
    /// dLoss/dParameter, laid out like `ModelState::params`.
    pub param_grad: Vec<f64>,
    /// dLoss/dRawInput.
    pub input_grad: Vec<f64>,
    pub loss: f64,
}

fn layer_forward(plan: &LayerPlan, params: &[f64], input: &[f64]) -> Vec<f64> {
    match plan.spec.kind {
        LayerKind::Dense { units } => {
            let n_in = plan.in_shape.len();
            let w = &params[plan.w_off..plan.w_off + units * n_in];
            let b = &params[plan.b_off..plan.b_off + units];
            (0..units)
                .map(|u| {
                    let row = &w[u * n_in..(u + 1) * n_in];
                    b[u] + row.iter().zip(input).map(|(wi, xi)| wi * xi).sum::<f64>()
                })
                .collect()
        }
        LayerKind::Conv {
            filters,
            kernel,
            stride,
            padding,
        } => {
            let (ic, ih, iw) = (plan.in_shape.c, plan.in_shape.h, plan.in_shape.w);
            let (oh, ow) = (plan.out_shape.h, plan.out_shape.w);
            let (kh, kw) = kernel;
            let mut out = vec![0.0; filters * oh * ow];
            for co in 0..filters {
                let bias = params[plan.b_off + co];
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = bias;
                        for ci in 0..ic {
                            for ky in 0..kh {
                                let iy = (oy * stride.0 + ky) as isize - padding.0 as isize;
                                if iy < 0 || iy >= ih as isize {
                                    continue;
                                }
                                let w_row = plan.w_off + ((co * ic + ci) * kh + ky) * kw;
                                let in_row = (ci * ih + iy as usize) * iw;
                                for kx in 0..kw {
                                    let ix = (ox * stride.1 + kx) as isize - padding.1 as isize;
                                    if ix < 0 || ix >= iw as isize {
                                        continue;
                                    }
                                    acc += params[w_row + kx] * input[in_row + ix as usize];
                                }
                            }
                        }
                        out[(co * oh + oy) * ow + ox] = acc;
                    }
                }
            }
            out
        }
    }
}

/// Propagates `delta` (dL/d pre-activation of this layer) into parameter
/// gradients and returns dL/d(layer input).
fn layer_backward(
    plan: &LayerPlan,
    params: &[f64],
    input: &[f64],
    delta: &[f64],
    grad_out: &mut [f64],
) -> Vec<f64> {
    match plan.spec.kind {
        LayerKind::Dense { units } => {
            let n_in = plan.in_shape.len();
            let mut din = vec![0.0; n_in];
            for u in 0..units {
                let d = delta[u];
                grad_out[plan.b_off + u] += d;
                let w_row = plan.w_off + u * n_in;
                for i in 0..n_in {
                    grad_out[w_row + i] += d * input[i];
                    din[i] += d * params[w_row + i];
                }
            }
            din
        }
        LayerKind::Conv {
            filters,
            kernel,
            stride,
            padding,
        } => {
            let (ic, ih, iw) = (plan.in_shape.c, plan.in_shape.h, plan.in_shape.w);
            let (oh, ow) = (plan.out_shape.h, plan.out_shape.w);
            let (kh, kw) = kernel;
            let mut din = vec![0.0; ic * ih * iw];
            for co in 0..filters {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let d = delta[(co * oh + oy) * ow + ox];
                        if d == 0.0 {
                            continue;
                        }
                        grad_out[plan.b_off + co] += d;
                        for ci in 0..ic {
                            for ky in 0..kh {
                                let iy = (oy * stride.0 + ky) as isize - padding.0 as isize;
                                if iy < 0 || iy >= ih as isize {
                                    continue;
                                }
                                let w_row = plan.w_off + ((co * ic + ci) * kh + ky) * kw;
                                let in_row = (ci * ih + iy as usize) * iw;
                                for kx in 0..kw {
                                    let ix = (ox * stride.1 + kx) as isize - padding.1 as isize;
                                    if ix < 0 || ix >= iw as isize {
                                        continue;
                                    }
                                    grad_out[w_row + kx] += d * input[in_row + ix as usize];
                                    din[in_row + ix as usize] += d * params[w_row + kx];
                                }
                            }
                        }
                    }
                }
            }
            din
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| libm::exp(l - max)).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// `-log(softmax(logits)[label])` with max-subtraction.
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<f64> {
    if label >= logits.len() {
        return Err(Error::invalid("label out of range"));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = libm::log(logits.iter().map(|&l| libm::exp(l - max)).sum::<f64>());
    Ok(-(logits[label] - max - log_sum))
}
