//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers (run with `--nocapture` to see them).
//!
//! Structural claims are exact; learned-behavior claims are directional and
//! evaluated at fixed seeds over multi-seed medians, so every run is
//! bit-reproducible.

use beamcred_core::attack::{fgsm, rms, AttackConfig};
use beamcred_core::channel::{
    normalize_channel_set, synth_channel_set, ChannelVector, ScenarioConfig,
};
use beamcred_core::codebook::{dft_codebook, mrt_beam, odft_codebook, quantize_phases, Codebook};
use beamcred_core::dknn::{
    build_index, calibrate, dknn_predict, neighbor_report, Backend, DknnConfig, DknnEngine,
    LshConfig,
};
use beamcred_core::eval::{reliability_diagram, spectral_efficiency, sweep_overhead, SweepMethod};
use beamcred_core::model::{
    softmax, softmax_cross_entropy, train, LayerSpec, ModelConfig, ModelState, TrainingConfig,
};
use beamcred_core::rng::{domain, RngStream};
use beamcred_core::sweep::{
    build_dataset, dbm_to_linear, measure_rssi, Dataset, FeatureScale, NoiseModel, SweepConfig,
};
use beamcred_core::C64;

// ---------------------------------------------------------------- helpers --

struct Pipeline {
    dataset: Dataset,
    channels: Vec<ChannelVector>,
    sensing: Codebook,
    narrow: Codebook,
}

fn scenario(n_bs: usize, n_ue: usize, seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        n_bs,
        ..ScenarioConfig::default_with(n_ue, seed)
    }
}

fn build(
    n_bs: usize,
    os: usize,
    n_ue: usize,
    seed: u64,
    noise: NoiseModel,
    p_bs_dbm: f64,
) -> Pipeline {
    let scen = scenario(n_bs, n_ue, seed);
    let sensing = dft_codebook(n_bs).unwrap();
    let narrow = odft_codebook(n_bs, os).unwrap();
    let sweep = SweepConfig {
        p_bs_dbm,
        noise,
        ..SweepConfig::default()
    };
    let dataset = build_dataset(&scen, &sensing, &narrow, &sweep).unwrap();
    let channels = normalize_channel_set(&synth_channel_set(&scen).unwrap()).unwrap();
    Pipeline {
        dataset,
        channels,
        sensing,
        narrow,
    }
}

/// Compact stack used by the statistical criteria.
fn small_model(m_w: usize, q: usize) -> ModelConfig {
    ModelConfig {
        layers: vec![
            LayerSpec::conv1d(8, 3, 1, 1),
            LayerSpec::conv1d(16, 3, 1, 1),
            LayerSpec::conv1d(16, 1, 1, 0),
            LayerSpec::dense(32),
        ],
        ..ModelConfig::baseline_1d(m_w, q)
    }
}

/// Wider stack for the 128-beam spectral-efficiency criterion.
fn mid_model(m_w: usize, q: usize) -> ModelConfig {
    ModelConfig {
        layers: vec![
            LayerSpec::conv1d(16, 3, 1, 1),
            LayerSpec::conv1d(32, 3, 1, 1),
            LayerSpec::conv1d(64, 1, 1, 0),
            LayerSpec::dense(128),
        ],
        ..ModelConfig::baseline_1d(m_w, q)
    }
}

fn fit(dataset: &Dataset, mc: &ModelConfig, epochs: usize, seed: u64) -> ModelState {
    let tc = TrainingConfig {
        epochs,
        batch_size: 128,
        seed,
        ..TrainingConfig::default()
    };
    train(dataset, mc, &tc).unwrap()
}

fn engine_for(model: &ModelState, dataset: &Dataset, config: &DknnConfig) -> DknnEngine {
    let index = build_index(model, &dataset.train, config).unwrap();
    let calibration = calibrate(&index, model, &dataset.calibration).unwrap();
    DknnEngine { index, calibration }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values[values.len() / 2]
}

// -------------------------------------------------------------- criteria --

#[test]
fn criterion_01_sweep_overhead_arithmetic() {
    let odft = sweep_overhead(&SweepMethod::ExhaustiveOdft { n_bs: 32, os: 4 });
    let proposed = sweep_overhead(&SweepMethod::Proposed {
        m_w: 32,
        refine_k: 0,
    });
    assert_eq!(odft, 128);
    assert_eq!(proposed, 32);
    let reduction = 1.0 - proposed as f64 / odft as f64;
    assert_eq!(reduction, 0.75);
    assert_eq!(
        sweep_overhead(&SweepMethod::Proposed {
            m_w: 32,
            refine_k: 3
        }),
        35
    );
    println!("criterion 01 PASS - overhead 128 exhaustive vs {proposed} proposed ({:.0}% reduction)", reduction * 100.0);
}

#[test]
fn criterion_02_codebook_correctness() {
    let dft = dft_codebook(32).unwrap();
    let mut worst = 0.0f64;
    for (i, a) in dft.beams.iter().enumerate() {
        for (j, b) in dft.beams.iter().enumerate() {
            let inner: C64 = a.w.iter().zip(&b.w).map(|(x, y)| x.conj() * y).sum();
            let expect = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((inner.norm() - expect).abs());
        }
    }
    assert!(worst < 1e-10, "gram deviation {worst}");

    let odft = odft_codebook(32, 4).unwrap();
    assert_eq!(odft.len(), 128);
    for q in 0..32 {
        for (a, b) in dft.beams[q].w.iter().zip(&odft.beams[q * 4].w) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
    }
    println!("criterion 02 PASS - 32-DFT gram deviation {worst:.2e}, 128-beam codebook embeds the 32-DFT at stride 4 bit-exactly");
}

#[test]
fn criterion_03_gradient_oracle() {
    // Miniature setup: 8 features, 8 classes, filters 4/8/8, 16-unit dense.
    let mc = ModelConfig {
        input_len: 8,
        n_classes: 8,
        input_rows: 1,
        input_cols: 8,
        layers: vec![
            LayerSpec::conv1d(4, 3, 1, 1),
            LayerSpec::conv1d(8, 3, 1, 1),
            LayerSpec::conv1d(8, 1, 1, 0),
            LayerSpec::dense(16),
        ],
        feature_scale: FeatureScale::Linear,
    };
    let model = ModelState::init(mc, 31).unwrap();
    let mut s = RngStream::new(17, 1);
    let x: Vec<f64> = (0..8).map(|_| s.uniform_in(0.2, 2.0)).collect();
    let label = 3;

    let pass = model.backward(&x, label).unwrap();
    let step = 1e-5;
    let mut worst = 0.0f64;
    let mut probe = model.clone();
    for i in 0..model.params.len() {
        let orig = model.params[i];
        probe.params[i] = orig + step;
        let up = softmax_cross_entropy(&probe.forward(&x).unwrap().0, label).unwrap();
        probe.params[i] = orig - step;
        let down = softmax_cross_entropy(&probe.forward(&x).unwrap().0, label).unwrap();
        probe.params[i] = orig;
        let fd = (up - down) / (2.0 * step);
        let rel = (pass.param_grad[i] - fd).abs() / (pass.param_grad[i].abs() + 1e-8);
        assert!(rel < 1e-4, "param {i}: analytic {} fd {fd}", pass.param_grad[i]);
        worst = worst.max(rel);
    }
    let mut xp = x.clone();
    for i in 0..x.len() {
        let orig = xp[i];
        xp[i] = orig + step;
        let up = softmax_cross_entropy(&model.forward(&xp).unwrap().0, label).unwrap();
        xp[i] = orig - step;
        let down = softmax_cross_entropy(&model.forward(&xp).unwrap().0, label).unwrap();
        xp[i] = orig;
        let fd = (up - down) / (2.0 * step);
        let rel = (pass.input_grad[i] - fd).abs() / (pass.input_grad[i].abs() + 1e-8);
        assert!(rel < 1e-4, "input {i}");
        worst = worst.max(rel);
    }
    println!(
        "criterion 03 PASS - {} parameter + 8 input gradients within 1e-4 of central differences (worst {worst:.2e})",
        model.params.len()
    );
}

#[test]
fn criterion_04_label_oracle() {
    let p = build(32, 4, 1000, 404, NoiseModel::None, 0.0);
    let mut checked = 0usize;
    for (_, split) in p.dataset.splits() {
        for s in split {
            let h = &p.channels[s.ue_id as usize];
            // Independent exhaustive search with raw scalar arithmetic.
            let mut best = (0usize, f64::NEG_INFINITY);
            for (q, beam) in p.narrow.beams.iter().enumerate() {
                let mut re = 0.0f64;
                let mut im = 0.0f64;
                for (a, b) in h.h.iter().zip(&beam.w) {
                    re += a.re * b.re + a.im * b.im;
                    im += a.re * b.im - a.im * b.re;
                }
                let g = re * re + im * im;
                if g > best.1 {
                    best = (q, g);
                }
            }
            assert_eq!(s.label, best.0, "ue {}", s.ue_id);
            checked += 1;
        }
    }
    assert_eq!(checked, 1000);
    println!("criterion 04 PASS - 1000/1000 labels match the independent exhaustive search");
}

#[test]
fn criterion_05_conformal_validity() {
    let noise = NoiseModel::Ranged {
        low_dbm: -90.0,
        high_dbm: -28.0,
        per_sample_draw: true,
    };
    let p = build(16, 4, 5000, 505, noise, 0.0);
    assert_eq!(p.dataset.train.len(), 3500);
    assert_eq!(p.dataset.validation.len(), 500);
    assert_eq!(p.dataset.test.len(), 750);
    assert_eq!(p.dataset.calibration.len(), 250);

    let model = fit(&p.dataset, &small_model(16, 64), 12, 505);
    let engine = engine_for(&model, &p.dataset, &DknnConfig::default());

    let n = p.dataset.test.len();
    let mut p_true = Vec::with_capacity(n);
    for s in &p.dataset.test {
        let v = engine.predict(&s.rssi, &model).unwrap();
        p_true.push(v.p_values[s.label]);
    }
    let slack = 2.0 / (n as f64).sqrt();
    let mut summary = String::new();
    for alpha in [0.05, 0.1, 0.2] {
        let frac = p_true.iter().filter(|&&pv| pv <= alpha).count() as f64 / n as f64;
        assert!(
            frac <= alpha + slack,
            "P(p <= {alpha}) = {frac:.4} exceeds {alpha} + {slack:.4}"
        );
        summary.push_str(&format!("P(p<={alpha})={frac:.3} "));
    }
    println!("criterion 05 PASS - conformal validity on 750 held-out samples (slack {slack:.3}): {summary}");
}

#[test]
fn criterion_06_noise_robust_training_trend() {
    let ranged = NoiseModel::Ranged {
        low_dbm: -90.0,
        high_dbm: -28.0,
        per_sample_draw: true,
    };
    let worst_case = NoiseModel::Fixed { power_dbm: -28.0 };
    // Transmit power chosen so the pinned noise range actually spans the
    // informative regime: the strongest beam sits near 7 dB SNR at the
    // worst level and near 70 dB at the mildest.
    let p_bs_dbm = -22.0;
    let p_bs = dbm_to_linear(p_bs_dbm);
    let mut gaps = Vec::new();
    for seed in [601u64, 602, 603] {
        let noisy = build(16, 4, 5000, seed, ranged, p_bs_dbm);
        let clean = build(16, 4, 5000, seed, NoiseModel::None, p_bs_dbm);
        let model_noisy = fit(&noisy.dataset, &small_model(16, 64), 12, seed);
        let model_clean = fit(&clean.dataset, &small_model(16, 64), 12, seed);

        // Shared worst-noise test features for both models.
        let mut hits_noisy = 0usize;
        let mut hits_clean = 0usize;
        let n = noisy.dataset.test.len();
        for s in &noisy.dataset.test {
            let h = &noisy.channels[s.ue_id as usize];
            let mut stream = RngStream::keyed(seed, &[domain::EVAL, s.ue_id as u64]);
            let rssi = measure_rssi(h, &noisy.sensing, p_bs, &worst_case, &mut stream).unwrap();
            let top_noisy = model_noisy.predict_topk(&rssi, 3).unwrap();
            let top_clean = model_clean.predict_topk(&rssi, 3).unwrap();
            hits_noisy += top_noisy.contains(&s.label) as usize;
            hits_clean += top_clean.contains(&s.label) as usize;
        }
        let gap = hits_noisy as f64 / n as f64 - hits_clean as f64 / n as f64;
        gaps.push(gap);
    }
    let med = median(&mut gaps);
    assert!(
        med >= 0.05,
        "median top-3 gap {med:.4} below 5 percentage points ({gaps:?})"
    );
    println!(
        "criterion 06 PASS - noise-trained model beats noise-free training by {:.1} points top-3 accuracy at -28 dBm (3-seed median)",
        med * 100.0
    );
}

#[test]
fn criterion_07_spectral_efficiency_ordering() {
    let p = build(32, 4, 4000, 42, NoiseModel::None, 0.0);
    let model = fit(&p.dataset, &mid_model(32, 128), 20, 42);
    let p_bs = dbm_to_linear(0.0);
    let sigma2 = dbm_to_linear(-60.0);

    let mut violations = 0usize;
    let mut se_refined_sum = 0.0;
    let mut se_odft_sum = 0.0;
    for s in &p.dataset.test {
        let h = &p.channels[s.ue_id as usize];
        let gains: Vec<f64> = p
            .narrow
            .beams
            .iter()
            .map(|w| beamcred_core::sweep::beamform_gain(h, w).unwrap())
            .collect();
        let qmrt = quantize_phases(&mrt_beam(h).unwrap(), 4).unwrap();
        let se_qmrt = spectral_efficiency(h, &qmrt, p_bs, sigma2).unwrap();
        let se_odft = spectral_efficiency(h, &p.narrow.beams[s.label], p_bs, sigma2).unwrap();
        let ranked = model.predict_topk(&s.rssi, 5).unwrap();
        let se_dl = spectral_efficiency(h, &p.narrow.beams[ranked[0]], p_bs, sigma2).unwrap();
        if !(se_qmrt >= se_odft && se_odft >= se_dl && se_dl >= 0.0) {
            violations += 1;
        }
        let refined_gain = ranked.iter().map(|&b| gains[b]).fold(0.0, f64::max);
        se_refined_sum += (1.0 + p_bs * refined_gain / sigma2).log2();
        se_odft_sum += se_odft;
    }
    assert_eq!(violations, 0, "ordering violations over the full test set");
    let ratio = se_refined_sum / se_odft_sum;
    assert!(
        ratio >= 0.95,
        "top-5-refined mean SE is only {:.2}% of the exhaustive optimum",
        ratio * 100.0
    );
    println!(
        "criterion 07 PASS - 0 ordering violations over {} test samples; top-5 refinement reaches {:.1}% of exhaustive O-DFT mean SE",
        p.dataset.test.len(),
        ratio * 100.0
    );
}

#[test]
fn criterion_08_robustness_separation() {
    let ranged = NoiseModel::Ranged {
        low_dbm: -90.0,
        high_dbm: -28.0,
        per_sample_draw: true,
    };
    let mut dknn_fracs = Vec::new();
    let mut soft_fracs = Vec::new();
    let mut cred_drops = Vec::new();
    for seed in [801u64, 802, 803] {
        let p = build(16, 4, 3000, seed, ranged, 0.0);
        let model = fit(&p.dataset, &small_model(16, 64), 15, seed);
        let engine = engine_for(&model, &p.dataset, &DknnConfig::default());

        let mean_rms = p.dataset.test.iter().map(|s| rms(&s.rssi)).sum::<f64>()
            / p.dataset.test.len() as f64;
        let atk = AttackConfig {
            epsilon: 0.1 * mean_rms,
            clamp_nonnegative: true,
            relative_power_budget: None,
        };

        let threshold = 0.2;
        let n = p.dataset.test.len() as f64;
        let mut dknn_low = 0usize;
        let mut soft_low = 0usize;
        let mut cred_clean = 0.0;
        let mut cred_adv = 0.0;
        for s in &p.dataset.test {
            let adv = fgsm(&s.rssi, s.label, &model, &atk).unwrap();
            let vc = engine.predict(&s.rssi, &model).unwrap();
            let va = engine.predict(&adv, &model).unwrap();
            cred_clean += vc.credibility;
            cred_adv += va.credibility;
            dknn_low += (va.credibility < threshold) as usize;
            let (logits, _) = model.forward(&adv).unwrap();
            let conf = softmax(&logits)
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            soft_low += (conf < threshold) as usize;
        }
        dknn_fracs.push(dknn_low as f64 / n);
        soft_fracs.push(soft_low as f64 / n);
        cred_drops.push(cred_clean / n - cred_adv / n);
    }
    let med_dknn = median(&mut dknn_fracs);
    let med_soft = median(&mut soft_fracs);
    let med_drop = median(&mut cred_drops);
    assert!(
        med_dknn >= 2.0 * med_soft && med_dknn > 0.0,
        "dknn low-credibility fraction {med_dknn:.3} not 2x softmax {med_soft:.3}"
    );
    assert!(med_drop > 0.0, "credibility did not drop under attack");
    let ratio = if med_soft > 0.0 {
        format!("{:.1}x", med_dknn / med_soft)
    } else {
        "inf".into()
    };
    println!(
        "criterion 08 PASS - {:.0}% of adversarial inputs get credibility < 0.2 vs {:.0}% for softmax confidence ({ratio}); mean credibility drops by {med_drop:.3}",
        med_dknn * 100.0,
        med_soft * 100.0
    );
}

#[test]
fn criterion_09_lsh_fidelity() {
    let ranged = NoiseModel::Ranged {
        low_dbm: -90.0,
        high_dbm: -28.0,
        per_sample_draw: true,
    };
    let p = build(16, 4, 1600, 909, ranged, 0.0);
    assert!(p.dataset.train.len() >= 1000);
    let model = fit(&p.dataset, &small_model(16, 64), 5, 909);

    let exact_cfg = DknnConfig::default();
    let lsh_cfg = DknnConfig {
        backend: Backend::Lsh(LshConfig {
            seed: 909,
            ..LshConfig::default()
        }),
        ..DknnConfig::default()
    };
    let exact = engine_for(&model, &p.dataset, &exact_cfg);
    let lsh = engine_for(&model, &p.dataset, &lsh_cfg);

    let mut hit = 0usize;
    let mut total = 0usize;
    let mut agree = 0usize;
    for s in &p.dataset.test {
        let re = neighbor_report(&s.rssi, &exact.index, &model).unwrap();
        let rl = neighbor_report(&s.rssi, &lsh.index, &model).unwrap();
        for (le, ll) in re.iter().zip(&rl) {
            let truth: std::collections::HashSet<u32> =
                le.iter().map(|n| n.train_index).collect();
            hit += ll.iter().filter(|n| truth.contains(&n.train_index)).count();
            total += le.len();
        }
        let ve = dknn_predict(&s.rssi, &exact.index, &exact.calibration, &model).unwrap();
        let vl = dknn_predict(&s.rssi, &lsh.index, &lsh.calibration, &model).unwrap();
        agree += (ve.prediction == vl.prediction) as usize;
    }
    let recall = hit as f64 / total as f64;
    let agreement = agree as f64 / p.dataset.test.len() as f64;
    assert!(recall >= 0.9, "lsh recall {recall:.3}");
    assert!(agreement >= 0.95, "prediction agreement {agreement:.3}");
    println!(
        "criterion 09 PASS - lsh recall {recall:.3} vs exact over {} stored points (k=10); prediction agreement {agreement:.3}",
        p.dataset.train.len()
    );
}

#[test]
fn criterion_10_reliability_bookkeeping() {
    // 50-sample fixture with hand-enumerated bins (S = 10).
    let mut scores = Vec::new();
    let mut correct = Vec::new();
    // 20 samples at 0.05 -> bin 0, 12 correct.
    for i in 0..20 {
        scores.push(0.05);
        correct.push(i < 12);
    }
    // 15 samples at 0.55 -> bin 5, 9 correct.
    for i in 0..15 {
        scores.push(0.55);
        correct.push(i < 9);
    }
    // 10 samples at 0.95 and 5 at exactly 1.0 -> bin 9, 10 correct.
    for i in 0..10 {
        scores.push(0.95);
        correct.push(i < 10);
    }
    for _ in 0..5 {
        scores.push(1.0);
        correct.push(false);
    }

    let d = reliability_diagram(&scores, &correct, 10).unwrap();
    let total: usize = d.bins.iter().map(|b| b.count).sum();
    assert_eq!(total, 50);
    assert_eq!(d.bins[0].count, 20);
    assert_eq!(d.bins[0].accuracy, Some(12.0 / 20.0));
    assert_eq!(d.bins[5].count, 15);
    assert_eq!(d.bins[5].accuracy, Some(9.0 / 15.0));
    assert_eq!(d.bins[9].count, 15);
    assert_eq!(d.bins[9].accuracy, Some(10.0 / 15.0));
    for b in [1, 2, 3, 4, 6, 7, 8] {
        assert_eq!(d.bins[b].count, 0);
        assert_eq!(d.bins[b].accuracy, None);
    }
    println!("criterion 10 PASS - bin counts conserve 50 samples and within-bin accuracies match the hand enumeration exactly");
}
