//! Evaluation metrics for all prediction heads and baselines.
//!
//! Accuracy columns compare each method's beam choice against the dataset
//! label (the noiseless optimal narrow beam). Codebook baselines select beams
//! from noisy RSSI re-measurements, mirroring what a sweep-based system
//! could actually do; their spectral-efficiency columns instead use the
//! exhaustive noiseless optimum within their codebook, making them true
//! upper envelopes per family. The quantized matched-filter row is the
//! perfect-CSI ceiling and sweeps nothing.
//!
//! SNR sweeps (accuracy or efficiency versus noise) are produced by calling
//! [`evaluate_all`] once per configured noise power; reports are binned by
//! configured noise power, not by per-sample realized SNR.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::channel::ChannelVector;
use crate::codebook::{dft_codebook, mrt_beam, quantize_phases, BeamVector, Codebook};
use crate::dknn::DknnEngine;
use crate::model::{rank_desc, softmax, ModelState};
use crate::rng::{domain, RngStream};
use crate::sweep::{linear_to_dbm, measure_rssi, snr, NoiseModel, Sample};
use crate::{Error, Result};

/// Fraction of samples whose label appears in the first `k` ranked entries.
pub fn topk_accuracy(ranked: &[Vec<usize>], labels: &[usize], k: usize) -> Result<f64> {
    if ranked.len() != labels.len() {
        return Err(Error::invalid("predictions and labels differ in length"));
    }
    if ranked.is_empty() {
        return Err(Error::invalid("nothing to score"));
    }
    let hits = ranked
        .iter()
        .zip(labels)
        .filter(|(r, l)| r.iter().take(k).any(|p| p == *l))
        .count();
    Ok(hits as f64 / ranked.len() as f64)
}

/// `log2(1 + SNR)` for the chosen beam.
pub fn spectral_efficiency(
    h: &ChannelVector,
    w: &BeamVector,
    p_bs: f64,
    sigma2: f64,
) -> Result<f64> {
    Ok(libm::log2(1.0 + snr(h, w, p_bs, sigma2)?))
}

/// Beam-sweeping strategies whose training overhead is compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "method", rename_all = "snake_case"))]
pub enum SweepMethod {
    /// Exhaustive scan of the plain DFT codebook.
    ExhaustiveDft { n_bs: usize },
    /// Exhaustive scan of the oversampled codebook.
    ExhaustiveOdft { n_bs: usize, os: usize },
    /// Sensing sweep feeding the classifier, plus an optional verification
    /// sweep of the top-k predicted narrow beams.
    Proposed { m_w: usize, refine_k: usize },
}

/// Number of beams physically swept by a strategy.
pub fn sweep_overhead(method: &SweepMethod) -> usize {
    match *method {
        SweepMethod::ExhaustiveDft { n_bs } => n_bs,
        SweepMethod::ExhaustiveOdft { n_bs, os } => n_bs * os,
        SweepMethod::Proposed { m_w, refine_k } => m_w + refine_k,
    }
}

/// One credibility/confidence interval of a reliability diagram.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReliabilityBin {
    pub low: f64,
    pub high: f64,
    pub count: usize,
    /// Fraction of in-bin samples classified correctly; `None` when empty
    /// (never reported as zero).
    pub accuracy: Option<f64>,
}

/// Which head's score a reliability diagram was binned over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ScoreSource {
    DknnCredibility,
    SoftmaxConfidence,
}

/// Accuracy as a function of binned credibility/confidence.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReliabilityDiagram {
    pub bins: Vec<ReliabilityBin>,
    /// Set when the diagram is tied to a specific prediction head.
    pub source: Option<ScoreSource>,
}

impl ReliabilityDiagram {
    pub fn with_source(mut self, source: ScoreSource) -> Self {
        self.source = Some(source);
        self
    }
}

/// Bin `[0, 1]` scores into `s` equal intervals (the last closed above) and
/// compute within-bin accuracy.
pub fn reliability_diagram(
    scores: &[f64],
    correct: &[bool],
    s: usize,
) -> Result<ReliabilityDiagram> {
    if s < 1 {
        return Err(Error::invalid("bin count must be >= 1"));
    }
    if scores.len() != correct.len() {
        return Err(Error::invalid("scores and flags differ in length"));
    }
    if scores.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::invalid("scores must lie in [0, 1]"));
    }
    let mut counts = vec![0usize; s];
    let mut hits = vec![0usize; s];
    for (&score, &ok) in scores.iter().zip(correct) {
        let mut bin = (score * s as f64) as usize;
        if bin >= s {
            bin = s - 1; // score == 1.0 falls in the closed last bin
        }
        counts[bin] += 1;
        if ok {
            hits[bin] += 1;
        }
    }
    let bins = (0..s)
        .map(|b| ReliabilityBin {
            low: b as f64 / s as f64,
            high: (b + 1) as f64 / s as f64,
            count: counts[b],
            accuracy: if counts[b] > 0 {
                Some(hits[b] as f64 / counts[b] as f64)
            } else {
                None
            },
        })
        .collect();
    Ok(ReliabilityDiagram { bins, source: None })
}

/// Per-method results.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MethodMetrics {
    pub method: String,
    /// `(k, accuracy)` pairs; `None` accuracy columns are omitted entirely
    /// for methods that do not predict a narrow-beam index.
    pub topk_accuracy: Vec<(usize, f64)>,
    pub mean_spectral_efficiency: f64,
    pub swept_beams: usize,
    /// Mean credibility (deep k-NN head) or softmax confidence on the clean
    /// test set; absent for codebook baselines.
    pub mean_score_clean: Option<f64>,
    /// Same score on the adversarial set, when one was supplied.
    pub mean_score_adversarial: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReportMeta {
    pub n_test: usize,
    pub m_w: usize,
    pub q: usize,
    pub ks: Vec<usize>,
    pub refine_k: usize,
    pub p_bs_dbm: f64,
    pub se_noise_dbm: f64,
    pub selection_noise: NoiseModel,
    pub mrt_phase_bits: u32,
    pub seed: u64,
    /// Aggregation convention for SNR sweeps.
    pub snr_convention: String,
}

/// Everything the evaluation produces for one noise point.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    pub methods: Vec<MethodMetrics>,
    pub meta: ReportMeta,
}

impl MetricsReport {
    pub fn method(&self, name: &str) -> Option<&MethodMetrics> {
        self.methods.iter().find(|m| m.method == name)
    }
}

/// Inputs to [`evaluate_all`]. `test` and `channels` are aligned by position;
/// `adversarial`, when present, holds perturbed features for the same
/// positions.
pub struct EvalContext<'a> {
    pub model: &'a ModelState,
    pub engine: &'a DknnEngine,
    pub test: &'a [Sample],
    pub channels: &'a [ChannelVector],
    pub sensing: &'a Codebook,
    pub narrow: &'a Codebook,
    pub adversarial: Option<&'a [Sample]>,
    /// Transmit power, linear.
    pub p_bs: f64,
    /// Noise power (linear) used in the spectral-efficiency column.
    pub se_sigma2: f64,
    /// Noise applied when baselines re-measure RSSI to pick their beam.
    pub selection_noise: NoiseModel,
    /// Phase-shifter resolution of the matched-filter ceiling.
    pub mrt_phase_bits: u32,
    pub ks: &'a [usize],
    /// Verification-sweep size for the refined rows.
    pub refine_k: usize,
    pub seed: u64,
}

struct Accumulator {
    hits: Vec<usize>,
    se_sum: f64,
}

impl Accumulator {
    fn new(n_ks: usize) -> Self {
        Accumulator {
            hits: vec![0; n_ks],
            se_sum: 0.0,
        }
    }

    fn record(&mut self, ranked: &[usize], label: usize, ks: &[usize], se: f64) {
        for (slot, &k) in ks.iter().enumerate() {
            if ranked.iter().take(k).any(|&p| p == label) {
                self.hits[slot] += 1;
            }
        }
        self.se_sum += se;
    }

    fn into_metrics(
        self,
        method: &str,
        n: usize,
        ks: &[usize],
        swept: usize,
        clean: Option<f64>,
        adv: Option<f64>,
    ) -> MethodMetrics {
        MethodMetrics {
            method: String::from(method),
            topk_accuracy: ks
                .iter()
                .zip(&self.hits)
                .map(|(&k, &h)| (k, h as f64 / n as f64))
                .collect(),
            mean_spectral_efficiency: self.se_sum / n as f64,
            swept_beams: swept,
            mean_score_clean: clean,
            mean_score_adversarial: adv,
        }
    }
}

/// Evaluate the conformal head, the softmax head, their refined variants,
/// and the three non-learned baselines on one test set.
pub fn evaluate_all(ctx: &EvalContext) -> Result<MetricsReport> {
    let n = ctx.test.len();
    if n == 0 {
        return Err(Error::invalid("empty test set"));
    }
    if ctx.channels.len() != n {
        return Err(Error::invalid("channels and test samples differ in length"));
    }
    if let Some(adv) = ctx.adversarial {
        if adv.len() != n {
            return Err(Error::invalid("adversarial set does not match test set"));
        }
    }
    if ctx.ks.is_empty() || ctx.ks.iter().any(|&k| k == 0 || k > ctx.narrow.len()) {
        return Err(Error::invalid("each k must be in 1..=Q"));
    }
    if ctx.engine.calibration.is_empty() {
        return Err(Error::invalid("engine is not calibrated"));
    }
    let q = ctx.narrow.len();
    let os = ctx.narrow.oversampling;
    let n_bs = ctx.narrow.n_bs();
    let dft = dft_codebook(n_bs)?;
    let rank_width = ctx
        .ks
        .iter()
        .copied()
        .max()
        .unwrap_or(1)
        .max(ctx.refine_k)
        .max(1);

    let mut dknn_acc = Accumulator::new(ctx.ks.len());
    let mut softmax_acc = Accumulator::new(ctx.ks.len());
    let mut dknn_ref = Accumulator::new(ctx.ks.len());
    let mut softmax_ref = Accumulator::new(ctx.ks.len());
    let mut odft_acc = Accumulator::new(ctx.ks.len());
    let mut dft_acc = Accumulator::new(ctx.ks.len());
    let mut qmrt_acc = Accumulator::new(ctx.ks.len());

    let mut cred_clean_sum = 0.0;
    let mut conf_clean_sum = 0.0;

    for (i, sample) in ctx.test.iter().enumerate() {
        let h = &ctx.channels[i];
        let gains: Vec<f64> = ctx
            .narrow
            .beams
            .iter()
            .map(|w| crate::sweep::beamform_gain(h, w))
            .collect::<Result<_>>()?;
        let se_of = |gain: f64| libm::log2(1.0 + ctx.p_bs * gain / ctx.se_sigma2);

        // Learned heads.
        let (logits, _) = ctx.model.forward(&sample.rssi)?;
        let soft_ranked = rank_desc(&logits, rank_width);
        let verdict = ctx.engine.predict(&sample.rssi, ctx.model)?;
        let dknn_ranked = rank_desc(&verdict.p_values, rank_width);
        cred_clean_sum += verdict.credibility;
        conf_clean_sum += softmax(&logits)[soft_ranked[0]];

        softmax_acc.record(&soft_ranked, sample.label, ctx.ks, se_of(gains[soft_ranked[0]]));
        dknn_acc.record(&dknn_ranked, sample.label, ctx.ks, se_of(gains[dknn_ranked[0]]));

        // Refined rows sweep the top-k candidates and keep the best one.
        let best_of = |ranked: &[usize]| {
            ranked
                .iter()
                .take(ctx.refine_k.max(1))
                .map(|&b| gains[b])
                .fold(0.0, f64::max)
        };
        softmax_ref.record(&soft_ranked, sample.label, ctx.ks, se_of(best_of(&soft_ranked)));
        dknn_ref.record(&dknn_ranked, sample.label, ctx.ks, se_of(best_of(&dknn_ranked)));

        // Noisy exhaustive selections for the codebook baselines.
        let mut stream = RngStream::keyed(ctx.seed, &[domain::EVAL, sample.ue_id as u64]);
        let odft_rssi = measure_rssi(h, ctx.narrow, ctx.p_bs, &ctx.selection_noise, &mut stream)?;
        let odft_ranked = rank_desc(&odft_rssi, rank_width);
        let odft_best_gain = gains.iter().copied().fold(0.0, f64::max);
        odft_acc.record(&odft_ranked, sample.label, ctx.ks, se_of(odft_best_gain));

        let dft_rssi = measure_rssi(h, &dft, ctx.p_bs, &ctx.selection_noise, &mut stream)?;
        let dft_ranked: Vec<usize> = rank_desc(&dft_rssi, rank_width)
            .into_iter()
            .map(|d| (d * os) % q)
            .collect();
        let dft_best_gain = dft
            .beams
            .iter()
            .map(|w| crate::sweep::beamform_gain(h, w))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        dft_acc.record(&dft_ranked, sample.label, ctx.ks, se_of(dft_best_gain));

        // Perfect-CSI ceiling under quantized phase control.
        let qmrt = quantize_phases(&mrt_beam(h)?, ctx.mrt_phase_bits)?;
        let qmrt_gain = crate::sweep::beamform_gain(h, &qmrt)?;
        qmrt_acc.se_sum += se_of(qmrt_gain);
    }

    // Adversarial scores, when a perturbed set is provided.
    let (mut cred_adv, mut conf_adv) = (None, None);
    if let Some(adv) = ctx.adversarial {
        let mut cred_sum = 0.0;
        let mut conf_sum = 0.0;
        for sample in adv {
            let verdict = ctx.engine.predict(&sample.rssi, ctx.model)?;
            cred_sum += verdict.credibility;
            let (logits, _) = ctx.model.forward(&sample.rssi)?;
            let probs = softmax(&logits);
            conf_sum += probs
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
        }
        cred_adv = Some(cred_sum / adv.len() as f64);
        conf_adv = Some(conf_sum / adv.len() as f64);
    }

    let m_w = ctx.sensing.len();
    let methods = vec![
        dknn_acc.into_metrics(
            "dknn",
            n,
            ctx.ks,
            sweep_overhead(&SweepMethod::Proposed { m_w, refine_k: 0 }),
            Some(cred_clean_sum / n as f64),
            cred_adv,
        ),
        softmax_acc.into_metrics(
            "softmax",
            n,
            ctx.ks,
            sweep_overhead(&SweepMethod::Proposed { m_w, refine_k: 0 }),
            Some(conf_clean_sum / n as f64),
            conf_adv,
        ),
        dknn_ref.into_metrics(
            "dknn_refined",
            n,
            ctx.ks,
            sweep_overhead(&SweepMethod::Proposed {
                m_w,
                refine_k: ctx.refine_k,
            }),
            None,
            None,
        ),
        softmax_ref.into_metrics(
            "softmax_refined",
            n,
            ctx.ks,
            sweep_overhead(&SweepMethod::Proposed {
                m_w,
                refine_k: ctx.refine_k,
            }),
            None,
            None,
        ),
        odft_acc.into_metrics(
            "exhaustive_odft",
            n,
            ctx.ks,
            sweep_overhead(&SweepMethod::ExhaustiveOdft { n_bs, os }),
            None,
            None,
        ),
        dft_acc.into_metrics(
            "exhaustive_dft",
            n,
            ctx.ks,
            sweep_overhead(&SweepMethod::ExhaustiveDft { n_bs }),
            None,
            None,
        ),
        {
            let mut m = qmrt_acc.into_metrics("quantized_mrt", n, ctx.ks, 0, None, None);
            m.topk_accuracy.clear(); // no narrow-beam prediction to score
            m
        },
    ];

    Ok(MetricsReport {
        methods,
        meta: ReportMeta {
            n_test: n,
            m_w,
            q,
            ks: ctx.ks.to_vec(),
            refine_k: ctx.refine_k,
            p_bs_dbm: linear_to_dbm(ctx.p_bs),
            se_noise_dbm: linear_to_dbm(ctx.se_sigma2),
            selection_noise: ctx.selection_noise,
            mrt_phase_bits: ctx.mrt_phase_bits,
            seed: ctx.seed,
            snr_convention: String::from("binned by configured noise power"),
        },
    })
}
