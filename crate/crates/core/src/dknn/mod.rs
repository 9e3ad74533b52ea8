//! Conformal credibility engine over per-layer network representations.
//!
//! After training, every training sample's layer activations are stored, one
//! nearest-neighbor structure per layer. A test input's nonconformity toward
//! a candidate label is the number of per-layer neighbors carrying a
//! different label; comparing that score against a held-out calibration set
//! yields an empirical p-value per label. The predicted beam is the label
//! with the highest p-value, credibility is that p-value, and confidence is
//! one minus the runner-up p-value.
//!
//! Two neighbor backends are provided: an exact cosine scan (the ground
//! truth, used by every oracle test) and cross-polytope LSH with multi-probe
//! bucket search.

mod lsh;

pub use lsh::LshConfig;
use lsh::LshTables;

use alloc::vec;
use alloc::vec::Vec;

use crate::model::{rank_desc, ModelState};
use crate::sweep::Sample;
use crate::{Error, Result};

/// Neighbor-search backend selection.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "backend", rename_all = "snake_case"))]
pub enum Backend {
    #[default]
    Exact,
    Lsh(LshConfig),
}

/// Engine configuration.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DknnConfig {
    /// Neighbors per layer (k-tilde).
    pub k: usize,
    pub backend: Backend,
    /// Model layers whose representations are indexed; `None` uses all L
    /// layers (the raw input and the logits are never indexed).
    pub layer_mask: Option<Vec<usize>>,
}

impl Default for DknnConfig {
    fn default() -> Self {
        DknnConfig {
            k: 10,
            backend: Backend::Exact,
            layer_mask: None,
        }
    }
}

/// One retrieved training neighbor (explainability payload entry).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Neighbor {
    pub train_index: u32,
    pub label: usize,
    /// Cosine distance `1 - cos(query, stored)`.
    pub distance: f64,
    /// Set when either vector was all-zero and the similarity was forced to 0.
    pub degenerate: bool,
}

/// Per-layer stored representations.
#[derive(Debug, Clone)]
struct LayerStore {
    dim: usize,
    /// `n x dim`, row-major, f32 to halve memory; dot products accumulate in
    /// f64.
    vectors: Vec<f32>,
    norms: Vec<f64>,
    lsh: Option<LshTables>,
}

impl LayerStore {
    fn new(dim: usize, vectors: Vec<f32>) -> Self {
        let n = vectors.len().checked_div(dim).unwrap_or(0);
        let norms = (0..n)
            .map(|i| {
                libm::sqrt(
                    vectors[i * dim..(i + 1) * dim]
                        .iter()
                        .map(|&v| v as f64 * v as f64)
                        .sum::<f64>(),
                )
            })
            .collect();
        LayerStore {
            dim,
            vectors,
            norms,
            lsh: None,
        }
    }

    fn len(&self) -> usize {
        self.norms.len()
    }

    fn cosine(&self, i: usize, query: &[f64], query_norm: f64) -> (f64, bool) {
        if query_norm == 0.0 || self.norms[i] == 0.0 {
            return (0.0, true);
        }
        let row = &self.vectors[i * self.dim..(i + 1) * self.dim];
        let dot: f64 = row.iter().zip(query).map(|(&a, &b)| a as f64 * b).sum();
        (dot / (query_norm * self.norms[i]), false)
    }
}

/// Per-layer k-nearest index over training representations.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    config: DknnConfig,
    /// Model layer ids backing each store, ascending.
    layer_ids: Vec<usize>,
    labels: Vec<usize>,
    stores: Vec<LayerStore>,
}

impl NeighborIndex {
    pub fn k(&self) -> usize {
        self.config.k
    }

    /// Stored vector count (identical across layers).
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_layers(&self) -> usize {
        self.stores.len()
    }

    pub fn layer_ids(&self) -> &[usize] {
        &self.layer_ids
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn config(&self) -> &DknnConfig {
        &self.config
    }

    pub fn layer_dim(&self, layer: usize) -> usize {
        self.stores[layer].dim
    }

    /// Raw stored vectors of one layer (for persistence).
    pub fn layer_vectors(&self, layer: usize) -> &[f32] {
        &self.stores[layer].vectors
    }

    /// Rebuild an index from persisted parts. LSH tables are reconstructed
    /// deterministically from the config seed.
    pub fn from_parts(
        config: DknnConfig,
        layer_ids: Vec<usize>,
        labels: Vec<usize>,
        layers: Vec<(usize, Vec<f32>)>,
    ) -> Result<Self> {
        if layers.len() != layer_ids.len() {
            return Err(Error::invalid("layer count mismatch"));
        }
        let mut stores = Vec::with_capacity(layers.len());
        for (dim, vectors) in layers {
            if dim == 0 || vectors.len() != dim * labels.len() {
                return Err(Error::invalid("layer blob does not match label count"));
            }
            stores.push(LayerStore::new(dim, vectors));
        }
        let mut idx = NeighborIndex {
            config,
            layer_ids,
            labels,
            stores,
        };
        idx.build_lsh();
        Ok(idx)
    }

    fn build_lsh(&mut self) {
        if let Backend::Lsh(cfg) = &self.config.backend {
            for (pos, store) in self.stores.iter_mut().enumerate() {
                store.lsh = Some(LshTables::build(
                    cfg,
                    self.layer_ids[pos],
                    store.dim,
                    &store.vectors,
                ));
            }
        }
    }

    /// k nearest stored vectors in one layer, by cosine similarity,
    /// descending; distance ties break on the lower stored index.
    pub fn query_layer(&self, layer: usize, query: &[f64]) -> Vec<Neighbor> {
        let store = &self.stores[layer];
        let query_norm = libm::sqrt(query.iter().map(|v| v * v).sum::<f64>());
        let k = self.config.k.min(store.len());

        let mut scored: Vec<(f64, bool, u32)> = match &store.lsh {
            None => (0..store.len())
                .map(|i| {
                    let (sim, degenerate) = store.cosine(i, query, query_norm);
                    (sim, degenerate, i as u32)
                })
                .collect(),
            Some(tables) => {
                let (order, hits) = tables.candidates(query);
                let mut cands = order;
                if cands.len() < k {
                    // Bucket probing came up short; widen to the full set so
                    // the contract of exactly k neighbors holds.
                    let mut seen = vec![false; store.len()];
                    for &c in &cands {
                        seen[c as usize] = true;
                    }
                    for (i, taken) in seen.iter().enumerate() {
                        if !taken {
                            cands.push(i as u32);
                        }
                    }
                }
                if lsh_rerank(&self.config.backend) {
                    cands
                        .iter()
                        .map(|&i| {
                            let (sim, degenerate) = store.cosine(i as usize, query, query_norm);
                            (sim, degenerate, i)
                        })
                        .collect()
                } else {
                    // Rank by probe-collision count only.
                    cands
                        .iter()
                        .map(|&i| (*hits.get(&i).unwrap_or(&0) as f64, false, i))
                        .collect()
                }
            }
        };
        scored.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.2.cmp(&b.2))
        });
        scored.truncate(k);
        scored
            .into_iter()
            .map(|(sim, degenerate, i)| Neighbor {
                train_index: i,
                label: self.labels[i as usize],
                distance: if lsh_rerank(&self.config.backend) || matches!(self.config.backend, Backend::Exact) {
                    1.0 - sim
                } else {
                    // Collision counts are not distances; report a recomputed
                    // cosine so the explainability payload stays meaningful.
                    let (s, _) = store.cosine(i as usize, query, query_norm);
                    1.0 - s
                },
                degenerate,
            })
            .collect()
    }
}

fn lsh_rerank(backend: &Backend) -> bool {
    match backend {
        Backend::Exact => false,
        Backend::Lsh(cfg) => cfg.rerank,
    }
}

/// Record every training sample's masked layer activations.
pub fn build_index(
    model: &ModelState,
    train: &[Sample],
    config: &DknnConfig,
) -> Result<NeighborIndex> {
    if config.k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    if train.is_empty() {
        return Err(Error::invalid("cannot index an empty training set"));
    }
    if config.k > train.len() {
        return Err(Error::invalid("k exceeds training-set size"));
    }
    let n_layers = model.config.n_layers();
    let layer_ids: Vec<usize> = match &config.layer_mask {
        None => (0..n_layers).collect(),
        Some(mask) => {
            let mut ids = mask.clone();
            ids.sort_unstable();
            ids.dedup();
            if ids.is_empty() || ids.iter().any(|&i| i >= n_layers) {
                return Err(Error::invalid("layer mask out of range"));
            }
            ids
        }
    };

    let mut dims: Vec<usize> = vec![0; layer_ids.len()];
    let mut blobs: Vec<Vec<f32>> = vec![Vec::new(); layer_ids.len()];
    let mut labels = Vec::with_capacity(train.len());
    for sample in train {
        let (_, acts) = model.forward(&sample.rssi)?;
        for (pos, &lid) in layer_ids.iter().enumerate() {
            let v = &acts.layers[lid];
            if dims[pos] == 0 {
                dims[pos] = v.len();
                blobs[pos].reserve(v.len() * train.len());
            }
            blobs[pos].extend(v.iter().map(|&x| x as f32));
        }
        labels.push(sample.label);
    }

    let mut idx = NeighborIndex {
        config: config.clone(),
        layer_ids,
        labels,
        stores: dims
            .into_iter()
            .zip(blobs)
            .map(|(dim, vectors)| LayerStore::new(dim, vectors))
            .collect(),
    };
    idx.build_lsh();
    Ok(idx)
}

/// Per-layer multisets of the k nearest training labels for an input.
pub fn nearest_labels(
    x: &[f64],
    index: &NeighborIndex,
    model: &ModelState,
) -> Result<Vec<Vec<usize>>> {
    Ok(neighbor_report(x, index, model)?
        .into_iter()
        .map(|layer| layer.into_iter().map(|n| n.label).collect())
        .collect())
}

/// Full per-layer neighbor listing (labels, distances, provenance).
pub fn neighbor_report(
    x: &[f64],
    index: &NeighborIndex,
    model: &ModelState,
) -> Result<Vec<Vec<Neighbor>>> {
    let (_, acts) = model.forward(x)?;
    Ok(index
        .layer_ids()
        .iter()
        .enumerate()
        .map(|(pos, &lid)| index.query_layer(pos, &acts.layers[lid]))
        .collect())
}

/// Count of per-layer neighbors whose label differs from candidate `j`.
pub fn nonconformity(omega: &[Vec<usize>], j: usize) -> usize {
    omega
        .iter()
        .map(|layer| layer.iter().filter(|&&l| l != j).count())
        .sum()
}

/// Sorted nonconformity scores of the calibration split.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CalibrationScores {
    /// Ascending.
    scores: Vec<u32>,
    /// Upper bound `k * L` every score respects.
    max_score: u32,
}

impl CalibrationScores {
    pub fn from_scores(mut scores: Vec<u32>, max_score: u32) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::invalid("empty calibration scores"));
        }
        if scores.iter().any(|&s| s > max_score) {
            return Err(Error::invalid("calibration score exceeds k*L"));
        }
        scores.sort_unstable();
        Ok(CalibrationScores { scores, max_score })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn scores(&self) -> &[u32] {
        &self.scores
    }

    pub fn max_score(&self) -> u32 {
        self.max_score
    }
}

/// Score the calibration split against the index using each sample's true
/// label.
pub fn calibrate(
    index: &NeighborIndex,
    model: &ModelState,
    calibration: &[Sample],
) -> Result<CalibrationScores> {
    if calibration.is_empty() {
        return Err(Error::invalid("empty calibration split"));
    }
    let mut scores = Vec::with_capacity(calibration.len());
    for sample in calibration {
        let omega = nearest_labels(&sample.rssi, index, model)?;
        scores.push(nonconformity(&omega, sample.label) as u32);
    }
    let max_score = (index.k() * index.n_layers()) as u32;
    CalibrationScores::from_scores(scores, max_score)
}

/// Fraction of calibration scores greater than or equal to `score`
/// (inclusive comparison, so a score of 0 always yields 1.0).
pub fn p_value(score: usize, calibration: &CalibrationScores) -> f64 {
    let below = calibration.scores.partition_point(|&s| (s as usize) < score);
    (calibration.len() - below) as f64 / calibration.len() as f64
}

/// Conformal verdict for one input.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DknnVerdict {
    /// Label with the highest p-value (lowest index on ties).
    pub prediction: usize,
    /// One minus the second-highest p-value.
    pub confidence: f64,
    /// The highest p-value: how well the input conforms to training data.
    pub credibility: f64,
    pub p_values: Vec<f64>,
    /// Per-layer neighbor listing backing the verdict.
    pub neighbor_report: Vec<Vec<Neighbor>>,
}

/// Index plus calibration scores: everything needed to judge inputs.
#[derive(Debug, Clone)]
pub struct DknnEngine {
    pub index: NeighborIndex,
    pub calibration: CalibrationScores,
}

impl DknnEngine {
    pub fn predict(&self, x: &[f64], model: &ModelState) -> Result<DknnVerdict> {
        dknn_predict(x, &self.index, &self.calibration, model)
    }
}

/// Run the full conformal prediction for one input: one neighbor query per
/// layer, then a nonconformity score and p-value per candidate label.
pub fn dknn_predict(
    x: &[f64],
    index: &NeighborIndex,
    calibration: &CalibrationScores,
    model: &ModelState,
) -> Result<DknnVerdict> {
    if calibration.is_empty() {
        return Err(Error::invalid("engine is not calibrated"));
    }
    let report = neighbor_report(x, index, model)?;
    let q = model.config.n_classes;

    // rho(x, j) = k*L - (neighbors labeled j across layers).
    let mut label_hits = vec![0usize; q];
    let mut total = 0usize;
    for layer in &report {
        for n in layer {
            if n.label < q {
                label_hits[n.label] += 1;
            }
            total += 1;
        }
    }
    let p_values: Vec<f64> = (0..q)
        .map(|j| p_value(total - label_hits[j], calibration))
        .collect();

    let ranked = rank_desc(&p_values, q.min(2));
    let prediction = ranked[0];
    let credibility = p_values[prediction];
    let second = if q > 1 { p_values[ranked[1]] } else { 0.0 };
    Ok(DknnVerdict {
        prediction,
        confidence: 1.0 - second,
        credibility,
        p_values,
        neighbor_report: report,
    })
}
