//! RSSI beam sweeps and labeled dataset assembly.
//!
//! Labels come from noiseless beamforming gains over the narrow codebook
//! (the ground-truth optimal beam); features are the squared magnitudes of
//! noisy received pilots over the sensing codebook. Regenerating a dataset
//! with a different noise model but the same seed therefore changes features
//! only, never labels.

use alloc::vec::Vec;

use crate::channel::{normalize_channel_set, synth_channel_set, Fnv, ScenarioConfig};
use crate::channel::ChannelVector;
use crate::codebook::{BeamVector, Codebook};
use crate::rng::{domain, RngStream};
use crate::{Error, Result};

/// dBm to linear power (milliwatts).
pub fn dbm_to_linear(dbm: f64) -> f64 {
    libm::pow(10.0, dbm / 10.0)
}

/// Linear power (milliwatts) to dBm.
pub fn linear_to_dbm(linear: f64) -> f64 {
    10.0 * libm::log10(linear)
}

/// Measurement-noise description for feature generation.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "mode", rename_all = "snake_case"))]
pub enum NoiseModel {
    /// Noiseless sweep; features equal `p_bs * |h^H w|^2` exactly.
    None,
    /// Constant noise power.
    Fixed { power_dbm: f64 },
    /// Noise power drawn uniformly (in dB) per sample from the range, so one
    /// trained model sees the whole span. With `per_sample_draw` off the
    /// range midpoint is used for every sample.
    Ranged {
        low_dbm: f64,
        high_dbm: f64,
        per_sample_draw: bool,
    },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            NoiseModel::Ranged {
                low_dbm, high_dbm, ..
            } if low_dbm > high_dbm => Err(Error::invalid("noise range low must be <= high")),
            _ => Ok(()),
        }
    }

    /// Resolve the noise power (linear) for one sample, consuming at most one
    /// draw from the stream.
    pub fn draw_power(&self, stream: &mut RngStream) -> f64 {
        match *self {
            NoiseModel::None => 0.0,
            NoiseModel::Fixed { power_dbm } => dbm_to_linear(power_dbm),
            NoiseModel::Ranged {
                low_dbm,
                high_dbm,
                per_sample_draw,
            } => {
                if per_sample_draw {
                    dbm_to_linear(stream.uniform_in(low_dbm, high_dbm))
                } else {
                    dbm_to_linear(0.5 * (low_dbm + high_dbm))
                }
            }
        }
    }

    fn hash_into(&self, h: &mut Fnv) {
        match *self {
            NoiseModel::None => h.write_u64(0),
            NoiseModel::Fixed { power_dbm } => {
                h.write_u64(1);
                h.write_u64(power_dbm.to_bits());
            }
            NoiseModel::Ranged {
                low_dbm,
                high_dbm,
                per_sample_draw,
            } => {
                h.write_u64(2);
                h.write_u64(low_dbm.to_bits());
                h.write_u64(high_dbm.to_bits());
                h.write_u64(per_sample_draw as u64);
            }
        }
    }
}

/// Scale the classifier consumes features in. Data files always store linear
/// power; the transform is applied model-side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FeatureScale {
    /// Raw linear power.
    Linear,
    /// `ln(x + 1e-12)`; RSSI spans tens of dB, so log features are the
    /// default.
    #[default]
    Log,
}

/// One labeled beam-sweep observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    /// Linear received power per sensing beam.
    pub rssi: Vec<f64>,
    /// Optimal narrow-beam index in `[0, Q)`.
    pub label: usize,
    /// Realized best-sensing-beam SNR in dB (infinite for noiseless sweeps).
    pub snr_db: f64,
    /// Index of the UE the sample was generated from.
    pub ue_id: u32,
}

/// Split sizes as fractions of the full UE set. The calibration share is
/// carved out of the nominal test share.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
    pub calibration: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.70,
            validation: 0.10,
            test: 0.15,
            calibration: 0.05,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test, self.calibration];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::invalid("split fractions must be in [0, 1]"));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("split fractions must sum to 1"));
        }
        if self.train == 0.0 {
            return Err(Error::invalid("train fraction must be nonzero"));
        }
        if self.calibration == 0.0 {
            return Err(Error::invalid("calibration fraction must be nonzero"));
        }
        Ok(())
    }

    /// Largest-remainder apportionment of `n` samples; the four counts sum to
    /// `n` exactly and each is within one sample of `fraction * n`.
    pub fn counts(&self, n: usize) -> (usize, usize, usize, usize) {
        let fracs = [self.train, self.validation, self.test, self.calibration];
        let mut counts = [0usize; 4];
        let mut remainders = [(0.0f64, 0usize); 4];
        let mut assigned = 0;
        for (i, f) in fracs.iter().enumerate() {
            let exact = f * n as f64;
            counts[i] = libm::floor(exact) as usize;
            remainders[i] = (exact - counts[i] as f64, i);
            assigned += counts[i];
        }
        remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
        for r in remainders.iter().take(n - assigned) {
            counts[r.1] += 1;
        }
        (counts[0], counts[1], counts[2], counts[3])
    }
}

/// Dataset-level metadata carried alongside the splits.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DatasetMeta {
    /// Sensing-beam count (feature length).
    pub m_w: usize,
    /// Narrow-beam count (label alphabet size).
    pub q: usize,
    pub p_bs_dbm: f64,
    pub scenario_hash: u64,
    pub seed: u64,
    pub noise: NoiseModel,
    /// Transform the classifier is expected to apply to features.
    pub feature_scale: FeatureScale,
}

/// Materialized train/validation/calibration/test splits.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<Sample>,
    pub validation: Vec<Sample>,
    pub calibration: Vec<Sample>,
    pub test: Vec<Sample>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn total_len(&self) -> usize {
        self.train.len() + self.validation.len() + self.calibration.len() + self.test.len()
    }

    pub fn splits(&self) -> [(&'static str, &[Sample]); 4] {
        [
            ("train", &self.train),
            ("validation", &self.validation),
            ("calibration", &self.calibration),
            ("test", &self.test),
        ]
    }
}

/// Beamforming gain `|h^H w|^2`.
pub fn beamform_gain(h: &ChannelVector, w: &BeamVector) -> Result<f64> {
    if h.len() != w.len() {
        return Err(Error::invalid("channel and beam lengths differ"));
    }
    let inner: crate::C64 = h.h.iter().zip(&w.w).map(|(a, b)| a.conj() * b).sum();
    Ok(inner.norm_sqr())
}

/// Received SNR `p_bs * |h^H w|^2 / sigma2` (all powers linear).
pub fn snr(h: &ChannelVector, w: &BeamVector, p_bs: f64, sigma2: f64) -> Result<f64> {
    if sigma2.is_nan() || sigma2 <= 0.0 {
        return Err(Error::invalid("sigma2 must be > 0"));
    }
    Ok(p_bs * beamform_gain(h, w)? / sigma2)
}

/// Ground-truth optimal narrow beam: argmax of noiseless gain, ties to the
/// lowest index.
pub fn optimal_beam(h: &ChannelVector, narrow: &Codebook) -> Result<usize> {
    if narrow.is_empty() {
        return Err(Error::invalid("empty codebook"));
    }
    let mut best = 0usize;
    let mut best_gain = f64::NEG_INFINITY;
    for (q, beam) in narrow.beams.iter().enumerate() {
        let g = beamform_gain(h, beam)?;
        if g > best_gain {
            best_gain = g;
            best = q;
        }
    }
    Ok(best)
}

/// Sweep every sensing beam once and report `|sqrt(p_bs) h^H w_i + z_i|^2`
/// with unit pilot. The noise power is drawn once per call; each beam gets an
/// independent complex-Gaussian draw of that power.
pub fn measure_rssi(
    h: &ChannelVector,
    sensing: &Codebook,
    p_bs: f64,
    noise: &NoiseModel,
    stream: &mut RngStream,
) -> Result<Vec<f64>> {
    noise.validate()?;
    let sigma2 = noise.draw_power(stream);
    let amp = libm::sqrt(p_bs);
    let mut rssi = Vec::with_capacity(sensing.len());
    for beam in &sensing.beams {
        if h.len() != beam.len() {
            return Err(Error::invalid("channel and beam lengths differ"));
        }
        let inner: crate::C64 = h.h.iter().zip(&beam.w).map(|(a, b)| a.conj() * b).sum();
        let mut r = amp * inner;
        if sigma2 > 0.0 {
            r += stream.complex_gaussian(sigma2);
        }
        rssi.push(r.norm_sqr());
    }
    Ok(rssi)
}

/// Everything `build_dataset` needs besides the scenario itself.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepConfig {
    pub p_bs_dbm: f64,
    pub splits: SplitFractions,
    pub noise: NoiseModel,
    pub feature_scale: FeatureScale,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            p_bs_dbm: 30.0,
            splits: SplitFractions::default(),
            noise: NoiseModel::Ranged {
                low_dbm: -90.0,
                high_dbm: -28.0,
                per_sample_draw: true,
            },
            feature_scale: FeatureScale::Log,
        }
    }
}

/// Synthesize channels, normalize them globally, label against noiseless
/// narrow-beam gains, measure noisy sensing-beam features, and split.
///
/// Per-sample noise streams are keyed by `ue_id`, so the result is a pure
/// function of `(config, sensing, narrow, sweep)`.
pub fn build_dataset(
    scenario: &ScenarioConfig,
    sensing: &Codebook,
    narrow: &Codebook,
    sweep: &SweepConfig,
) -> Result<Dataset> {
    scenario.validate()?;
    sweep.splits.validate()?;
    sweep.noise.validate()?;
    if sensing.is_empty() || narrow.is_empty() {
        return Err(Error::invalid("codebooks must be nonempty"));
    }
    let channels = normalize_channel_set(&synth_channel_set(scenario)?)?;
    let p_bs = dbm_to_linear(sweep.p_bs_dbm);

    let mut samples = Vec::with_capacity(channels.len());
    for (ue, h) in channels.iter().enumerate() {
        let label = optimal_beam(h, narrow)?;
        let mut stream = RngStream::keyed(scenario.seed, &[domain::NOISE, ue as u64]);
        let sigma2 = sweep.noise.draw_power(&mut stream.clone());
        let rssi = measure_rssi(h, sensing, p_bs, &sweep.noise, &mut stream)?;
        let best_gain = sensing
            .beams
            .iter()
            .map(|w| beamform_gain(h, w).unwrap_or(0.0))
            .fold(0.0, f64::max);
        let snr_db = if sigma2 > 0.0 {
            10.0 * libm::log10(p_bs * best_gain / sigma2)
        } else {
            f64::INFINITY
        };
        samples.push(Sample {
            rssi,
            label,
            snr_db,
            ue_id: ue as u32,
        });
    }

    let (n_train, n_val, n_test, n_cal) = sweep.splits.counts(samples.len());
    let mut iter = samples.into_iter();
    let train: Vec<Sample> = iter.by_ref().take(n_train).collect();
    let validation: Vec<Sample> = iter.by_ref().take(n_val).collect();
    let test: Vec<Sample> = iter.by_ref().take(n_test).collect();
    let calibration: Vec<Sample> = iter.collect();
    debug_assert_eq!(calibration.len(), n_cal);

    let mut scen_hash = Fnv::new();
    scen_hash.write_u64(scenario.content_hash());
    sweep.noise.hash_into(&mut scen_hash);
    scen_hash.write_u64(sweep.p_bs_dbm.to_bits());

    Ok(Dataset {
        train,
        validation,
        calibration,
        test,
        meta: DatasetMeta {
            m_w: sensing.len(),
            q: narrow.len(),
            p_bs_dbm: sweep.p_bs_dbm,
            scenario_hash: scen_hash.finish(),
            seed: scenario.seed,
            noise: sweep.noise,
            feature_scale: sweep.feature_scale,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::{dft_codebook, odft_codebook};
    use crate::test_support::approx_eq;
    use crate::C64;
    use alloc::vec;

    fn beam_as_channel(w: &BeamVector) -> ChannelVector {
        ChannelVector { h: w.w.clone() }
    }

    #[test]
    fn gain_of_matching_unit_vectors_is_one() {
        let book = dft_codebook(8).unwrap();
        let h = beam_as_channel(&book.beams[3]);
        assert!(approx_eq(beamform_gain(&h, &book.beams[3]).unwrap(), 1.0, 1e-12));
    }

    #[test]
    fn gain_of_orthogonal_vectors_is_zero() {
        let book = dft_codebook(8).unwrap();
        let h = beam_as_channel(&book.beams[2]);
        assert!(beamform_gain(&h, &book.beams[5]).unwrap() < 1e-12);
    }

    #[test]
    fn gain_matches_scalar_loop_oracle() {
        let mut s = RngStream::new(5, 77);
        for _ in 0..50 {
            let n = 16;
            let h = ChannelVector {
                h: (0..n).map(|_| C64::new(s.normal(), s.normal())).collect(),
            };
            let w = BeamVector {
                w: (0..n).map(|_| C64::new(s.normal(), s.normal())).collect(),
            };
            // Independent oracle: accumulate conj(h_i)*w_i with raw scalars.
            let mut re = 0.0;
            let mut im = 0.0;
            for (a, b) in h.h.iter().zip(&w.w) {
                re += a.re * b.re + a.im * b.im;
                im += a.re * b.im - a.im * b.re;
            }
            let expect = re * re + im * im;
            assert!(approx_eq(beamform_gain(&h, &w).unwrap(), expect, 1e-10));
        }
    }

    #[test]
    fn gain_rejects_length_mismatch() {
        let h = ChannelVector {
            h: vec![C64::new(1.0, 0.0); 4],
        };
        let w = BeamVector {
            w: vec![C64::new(1.0, 0.0); 5],
        };
        assert!(matches!(beamform_gain(&h, &w), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn snr_scales_linearly() {
        let book = dft_codebook(4).unwrap();
        let h = beam_as_channel(&book.beams[0]);
        let w = &book.beams[0];
        let s1 = snr(&h, w, 1.0, 0.1).unwrap();
        assert!(approx_eq(s1, 10.0, 1e-12));
        let s2 = snr(&h, w, 2.0, 0.1).unwrap();
        assert!(approx_eq(s2, 2.0 * s1, 1e-12));
    }

    #[test]
    fn snr_in_db_matches_dbm_arithmetic() {
        // 30 dBm transmit, -90 dBm noise, unit gain -> 120 dB.
        let book = dft_codebook(4).unwrap();
        let h = beam_as_channel(&book.beams[1]);
        let s = snr(
            &h,
            &book.beams[1],
            dbm_to_linear(30.0),
            dbm_to_linear(-90.0),
        )
        .unwrap();
        assert!(approx_eq(10.0 * libm::log10(s), 120.0, 1e-9));
    }

    #[test]
    fn snr_rejects_nonpositive_sigma2() {
        let book = dft_codebook(4).unwrap();
        let h = beam_as_channel(&book.beams[0]);
        assert!(snr(&h, &book.beams[0], 1.0, 0.0).is_err());
        assert!(snr(&h, &book.beams[0], 1.0, -1.0).is_err());
    }

    #[test]
    fn optimal_beam_of_codeword_is_its_index() {
        let book = odft_codebook(16, 4).unwrap();
        for q in [0usize, 7, 31, 63] {
            let h = beam_as_channel(&book.beams[q]);
            assert_eq!(optimal_beam(&h, &book).unwrap(), q);
        }
    }

    #[test]
    fn optimal_beam_scale_invariant() {
        let cfg = ScenarioConfig::default_with(20, 13);
        let set = synth_channel_set(&cfg).unwrap();
        let book = odft_codebook(32, 4).unwrap();
        for h in &set {
            let scaled = ChannelVector {
                h: h.h.iter().map(|v| 5.0 * v).collect(),
            };
            assert_eq!(
                optimal_beam(h, &book).unwrap(),
                optimal_beam(&scaled, &book).unwrap()
            );
        }
    }

    #[test]
    fn single_path_on_grid_hits_grid_beam() {
        // An O-DFT beam at index q points at sin(phi) = -q/(n_bs*os) (mod 1);
        // a single-path channel at that angle must label as q. Verified by
        // exhaustive gain evaluation.
        let n_bs = 16;
        let os = 4;
        let book = odft_codebook(n_bs, os).unwrap();
        let q_total = n_bs * os;
        for q in [1usize, 5, 17, 40, 63] {
            // sin in (-1, 1): map q to signed grid point.
            let signed = if q * 2 > q_total {
                q as f64 / q_total as f64 - 1.0
            } else {
                q as f64 / q_total as f64
            };
            // Beam q is aligned when d_over_lambda*sin(phi) = -q/q_total (mod 1).
            let phi = libm::asin(-2.0 * signed);
            let b = crate::channel::array_response(phi, n_bs, 0.5).unwrap();
            let h = ChannelVector { h: b };
            let got = optimal_beam(&h, &book).unwrap();
            // Exhaustive oracle.
            let mut best = (0usize, f64::NEG_INFINITY);
            for (i, beam) in book.beams.iter().enumerate() {
                let g = beamform_gain(&h, beam).unwrap();
                if g > best.1 {
                    best = (i, g);
                }
            }
            assert_eq!(got, best.0);
            assert_eq!(got, q, "q={q} phi={phi}");
        }
    }

    #[test]
    fn noiseless_rssi_equals_gain_times_power() {
        let cfg = ScenarioConfig::default_with(5, 3);
        let set = normalize_channel_set(&synth_channel_set(&cfg).unwrap()).unwrap();
        let book = dft_codebook(32).unwrap();
        let mut stream = RngStream::new(0, 0);
        for h in &set {
            let rssi = measure_rssi(h, &book, 2.5, &NoiseModel::None, &mut stream).unwrap();
            for (i, beam) in book.beams.iter().enumerate() {
                let expect = 2.5 * beamform_gain(h, beam).unwrap();
                assert!(approx_eq(rssi[i], expect, 1e-12));
            }
        }
    }

    #[test]
    fn matched_beam_noiseless_rssi_is_power() {
        let book = dft_codebook(8).unwrap();
        let h = beam_as_channel(&book.beams[0]);
        let mut stream = RngStream::new(0, 0);
        let rssi = measure_rssi(&h, &book, 1.0, &NoiseModel::None, &mut stream).unwrap();
        assert!(approx_eq(rssi[0], 1.0, 1e-12));
    }

    #[test]
    fn ranged_noise_is_reproducible() {
        let cfg = ScenarioConfig::default_with(3, 9);
        let set = normalize_channel_set(&synth_channel_set(&cfg).unwrap()).unwrap();
        let book = dft_codebook(32).unwrap();
        let noise = NoiseModel::Ranged {
            low_dbm: -90.0,
            high_dbm: -28.0,
            per_sample_draw: true,
        };
        let mut s1 = RngStream::keyed(9, &[domain::NOISE, 0]);
        let mut s2 = RngStream::keyed(9, &[domain::NOISE, 0]);
        let a = measure_rssi(&set[0], &book, 1.0, &noise, &mut s1).unwrap();
        let b = measure_rssi(&set[0], &book, 1.0, &noise, &mut s2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_counts_match_example() {
        let splits = SplitFractions::default();
        assert_eq!(splits.counts(1000), (700, 100, 150, 50));
    }

    #[test]
    fn split_counts_total_preserved_awkward_sizes() {
        let splits = SplitFractions::default();
        for n in [1usize, 7, 99, 101, 1234] {
            let (a, b, c, d) = splits.counts(n);
            assert_eq!(a + b + c + d, n);
        }
    }

    #[test]
    fn build_dataset_shapes_and_determinism() {
        let scenario = ScenarioConfig {
            n_bs: 16,
            ..ScenarioConfig::default_with(200, 42)
        };
        let sensing = dft_codebook(16).unwrap();
        let narrow = odft_codebook(16, 4).unwrap();
        let sweep = SweepConfig::default();
        let d1 = build_dataset(&scenario, &sensing, &narrow, &sweep).unwrap();
        let d2 = build_dataset(&scenario, &sensing, &narrow, &sweep).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(d1.train.len(), 140);
        assert_eq!(d1.validation.len(), 20);
        assert_eq!(d1.test.len(), 30);
        assert_eq!(d1.calibration.len(), 10);
        assert_eq!(d1.meta.m_w, 16);
        assert_eq!(d1.meta.q, 64);
        for s in d1.splits().iter().flat_map(|(_, v)| v.iter()) {
            assert_eq!(s.rssi.len(), 16);
            assert!(s.label < 64);
            assert!(s.rssi.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn labels_are_noise_independent() {
        let scenario = ScenarioConfig {
            n_bs: 16,
            ..ScenarioConfig::default_with(100, 5)
        };
        let sensing = dft_codebook(16).unwrap();
        let narrow = odft_codebook(16, 4).unwrap();
        let noisy = build_dataset(&scenario, &sensing, &narrow, &SweepConfig::default()).unwrap();
        let clean = build_dataset(
            &scenario,
            &sensing,
            &narrow,
            &SweepConfig {
                noise: NoiseModel::None,
                ..SweepConfig::default()
            },
        )
        .unwrap();
        for ((_, a), (_, b)) in noisy.splits().iter().zip(clean.splits().iter()) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x.label, y.label);
                assert_ne!(x.rssi, y.rssi);
            }
        }
    }

    #[test]
    fn labels_match_independent_exhaustive_search() {
        // Oracle: raw scalar exhaustive search over the narrow codebook.
        let scenario = ScenarioConfig {
            n_bs: 16,
            ..ScenarioConfig::default_with(300, 11)
        };
        let narrow = odft_codebook(16, 4).unwrap();
        let sensing = dft_codebook(16).unwrap();
        let d = build_dataset(&scenario, &sensing, &narrow, &SweepConfig::default()).unwrap();
        let channels =
            normalize_channel_set(&synth_channel_set(&scenario).unwrap()).unwrap();
        let mut checked = 0;
        for (_, split) in d.splits() {
            for s in split {
                let h = &channels[s.ue_id as usize];
                let mut best = (0usize, f64::NEG_INFINITY);
                for (q, beam) in narrow.beams.iter().enumerate() {
                    let mut re = 0.0;
                    let mut im = 0.0;
                    for (a, b) in h.h.iter().zip(&beam.w) {
                        re += a.re * b.re + a.im * b.im;
                        im += a.re * b.im - a.im * b.re;
                    }
                    let g = re * re + im * im;
                    if g > best.1 {
                        best = (q, g);
                    }
                }
                assert_eq!(s.label, best.0);
                checked += 1;
            }
        }
        assert_eq!(checked, 300);
    }

    #[test]
    fn mean_snr_decreases_with_noise_power() {
        let scenario = ScenarioConfig {
            n_bs: 16,
            ..ScenarioConfig::default_with(100, 21)
        };
        let sensing = dft_codebook(16).unwrap();
        let narrow = odft_codebook(16, 4).unwrap();
        let mut last = f64::INFINITY;
        for dbm in [-90.0, -60.0, -28.0] {
            let d = build_dataset(
                &scenario,
                &sensing,
                &narrow,
                &SweepConfig {
                    noise: NoiseModel::Fixed { power_dbm: dbm },
                    ..SweepConfig::default()
                },
            )
            .unwrap();
            let mean: f64 = d
                .splits()
                .iter()
                .flat_map(|(_, v)| v.iter())
                .map(|s| s.snr_db)
                .sum::<f64>()
                / d.total_len() as f64;
            assert!(mean < last, "snr {mean} should fall as noise grows");
            last = mean;
        }
    }

    #[test]
    fn noisefree_argmax_matches_feature_argmax() {
        // Internal consistency: with no noise, the strongest sensing beam in
        // the features is the true strongest sensing beam.
        let scenario = ScenarioConfig {
            n_bs: 16,
            ..ScenarioConfig::default_with(50, 33)
        };
        let sensing = dft_codebook(16).unwrap();
        let narrow = odft_codebook(16, 4).unwrap();
        let d = build_dataset(
            &scenario,
            &sensing,
            &narrow,
            &SweepConfig {
                noise: NoiseModel::None,
                ..SweepConfig::default()
            },
        )
        .unwrap();
        let channels =
            normalize_channel_set(&synth_channel_set(&scenario).unwrap()).unwrap();
        for (_, split) in d.splits() {
            for s in split {
                let h = &channels[s.ue_id as usize];
                let feat_argmax = s
                    .rssi
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                    .unwrap()
                    .0;
                let true_argmax = (0..sensing.len())
                    .max_by(|&a, &b| {
                        beamform_gain(h, &sensing.beams[a])
                            .unwrap()
                            .partial_cmp(&beamform_gain(h, &sensing.beams[b]).unwrap())
                            .unwrap()
                    })
                    .unwrap();
                assert_eq!(feat_argmax, true_argmax);
            }
        }
    }

    #[test]
    fn empty_scenario_is_rejected() {
        let scenario = ScenarioConfig::default_with(0, 1);
        let sensing = dft_codebook(32).unwrap();
        let narrow = odft_codebook(32, 4).unwrap();
        assert!(matches!(
            build_dataset(&scenario, &sensing, &narrow, &SweepConfig::default()),
            Err(Error::DegenerateInput(_))
        ));
    }
}
