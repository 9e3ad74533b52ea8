//! Geometric multipath channel synthesis for a ULA base station.
//!
//! Each UE channel is a sum of `L` planar-wavefront paths, `h = Σ_l g_l ·
//! b(φ_l)`, with `b` the array response of the uniform linear array. This is a
//! statistical stand-in for ray-traced data: departure angles are drawn from a
//! configurable interval and per-path complex gains from one of two gain
//! models. Generation is keyed per UE, so a channel set is a pure function of
//! `(config, seed)`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, TAU};

use crate::rng::{domain, RngStream};
use crate::{C64, Error, Result};

/// Per-path complex gain distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum GainModel {
    /// First path has unit magnitude (uniform phase); the remaining paths are
    /// Rayleigh with the given mean magnitude.
    LosDominant { nlos_mean: f64 },
    /// All paths i.i.d. Rayleigh with the given mean magnitude.
    NlosBalanced { mean: f64 },
}

impl GainModel {
    pub fn los_default() -> Self {
        GainModel::LosDominant { nlos_mean: 0.3 }
    }

    pub fn nlos_default() -> Self {
        GainModel::NlosBalanced { mean: 1.0 }
    }
}

/// How departure angles are distributed over `angle_range`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AngleSampling {
    /// Uniform in angle (default).
    #[default]
    Uniform,
    /// Uniform in sin(angle), i.e. uniform over the beamspace grid.
    SinUniform,
}

/// Scenario description for synthetic channel generation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScenarioConfig {
    /// Base-station antenna count.
    pub n_bs: usize,
    /// Multipath count per UE.
    pub n_paths: usize,
    /// Antenna spacing normalized by wavelength.
    pub d_over_lambda: f64,
    /// Number of UE positions to synthesize.
    pub n_ue: usize,
    /// Departure-angle interval in radians, strictly inside (-pi/2, pi/2).
    pub angle_range: (f64, f64),
    /// Angle distribution over the interval.
    pub angle_sampling: AngleSampling,
    /// Per-path gain distribution.
    pub gain_model: GainModel,
    /// RNG seed; fixes the channel set bit-for-bit.
    pub seed: u64,
}

impl ScenarioConfig {
    /// 32-antenna half-wavelength ULA, 5 paths, LOS-dominant gains.
    pub fn default_with(n_ue: usize, seed: u64) -> Self {
        ScenarioConfig {
            n_bs: 32,
            n_paths: 5,
            d_over_lambda: 0.5,
            n_ue,
            angle_range: (-1.5, 1.5),
            angle_sampling: AngleSampling::Uniform,
            gain_model: GainModel::los_default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_bs < 1 {
            return Err(Error::invalid("n_bs must be >= 1"));
        }
        if self.n_paths < 1 {
            return Err(Error::invalid("n_paths must be >= 1"));
        }
        if self.d_over_lambda.is_nan() || self.d_over_lambda <= 0.0 {
            return Err(Error::invalid("d_over_lambda must be > 0"));
        }
        let (lo, hi) = self.angle_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::invalid("angle_range must be a finite interval"));
        }
        if lo <= -FRAC_PI_2 || hi >= FRAC_PI_2 {
            return Err(Error::invalid(
                "angle_range must lie strictly inside (-pi/2, pi/2)",
            ));
        }
        match self.gain_model {
            GainModel::LosDominant { nlos_mean } if nlos_mean.is_nan() || nlos_mean < 0.0 => {
                Err(Error::invalid("nlos_mean must be >= 0"))
            }
            GainModel::NlosBalanced { mean } if mean.is_nan() || mean <= 0.0 => {
                Err(Error::invalid("gain mean must be > 0"))
            }
            _ => Ok(()),
        }
    }

    /// Stable content hash over every field; identifies the scenario in
    /// dataset metadata.
    pub fn content_hash(&self) -> u64 {
        let mut h = Fnv::new();
        h.write_u64(self.n_bs as u64);
        h.write_u64(self.n_paths as u64);
        h.write_u64(self.d_over_lambda.to_bits());
        h.write_u64(self.n_ue as u64);
        h.write_u64(self.angle_range.0.to_bits());
        h.write_u64(self.angle_range.1.to_bits());
        h.write_u64(match self.angle_sampling {
            AngleSampling::Uniform => 0,
            AngleSampling::SinUniform => 1,
        });
        match self.gain_model {
            GainModel::LosDominant { nlos_mean } => {
                h.write_u64(0x10);
                h.write_u64(nlos_mean.to_bits());
            }
            GainModel::NlosBalanced { mean } => {
                h.write_u64(0x20);
                h.write_u64(mean.to_bits());
            }
        }
        h.write_u64(self.seed);
        h.finish()
    }
}

/// FNV-1a, 64-bit.
pub(crate) struct Fnv(u64);

impl Fnv {
    pub(crate) fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    pub(crate) fn write_u64(&mut self, v: u64) {
        for byte in v.to_le_bytes() {
            self.0 ^= byte as u64;
            self.0 = self.0.wrapping_mul(0x100_0000_01b3);
        }
    }

    pub(crate) fn finish(&self) -> u64 {
        self.0
    }
}

/// Gains and departure angles of one UE's multipath set.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub gains: Vec<C64>,
    pub angles: Vec<f64>,
}

/// Antenna-domain channel vector of one UE.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector {
    pub h: Vec<C64>,
}

impl ChannelVector {
    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.h.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// ULA array response at departure angle `phi` (radians).
///
/// Entry `n` is `exp(j*2*pi*d_over_lambda*n*sin(phi)) / sqrt(n_bs)`; the
/// vector has unit Euclidean norm by construction.
pub fn array_response(phi: f64, n_bs: usize, d_over_lambda: f64) -> Result<Vec<C64>> {
    if !phi.is_finite() {
        return Err(Error::invalid("phi must be finite"));
    }
    if n_bs < 1 {
        return Err(Error::invalid("n_bs must be >= 1"));
    }
    let scale = 1.0 / libm::sqrt(n_bs as f64);
    let step = TAU * d_over_lambda * libm::sin(phi);
    Ok((0..n_bs)
        .map(|n| {
            let phase = step * n as f64;
            C64::new(scale * libm::cos(phase), scale * libm::sin(phase))
        })
        .collect())
}

/// Draw one UE's multipath set from the scenario distributions.
///
/// Consumes a fixed number of draws per path in a fixed order, so a keyed
/// per-UE stream yields the same paths regardless of who else used the seed.
pub fn synth_paths(stream: &mut RngStream, config: &ScenarioConfig) -> Result<PathSet> {
    config.validate()?;
    let (lo, hi) = config.angle_range;
    let mut angles = Vec::with_capacity(config.n_paths);
    for _ in 0..config.n_paths {
        let phi = match config.angle_sampling {
            AngleSampling::Uniform => stream.uniform_in(lo, hi),
            AngleSampling::SinUniform => {
                let s = stream.uniform_in(libm::sin(lo), libm::sin(hi));
                libm::asin(s)
            }
        };
        angles.push(phi);
    }
    let mut gains = Vec::with_capacity(config.n_paths);
    match config.gain_model {
        GainModel::LosDominant { nlos_mean } => {
            gains.push(stream.unit_phase());
            for _ in 1..config.n_paths {
                let amp = stream.rayleigh_with_mean(nlos_mean);
                gains.push(amp * stream.unit_phase());
            }
        }
        GainModel::NlosBalanced { mean } => {
            for _ in 0..config.n_paths {
                let amp = stream.rayleigh_with_mean(mean);
                gains.push(amp * stream.unit_phase());
            }
        }
    }
    Ok(PathSet { gains, angles })
}

/// Superpose the path set into the antenna-domain channel
/// `h = Σ_l gains[l] * b(angles[l])`.
pub fn assemble_channel(paths: &PathSet, config: &ScenarioConfig) -> Result<ChannelVector> {
    if paths.gains.len() != paths.angles.len() {
        return Err(Error::invalid("gains and angles must have equal length"));
    }
    let mut h = alloc::vec![C64::new(0.0, 0.0); config.n_bs];
    for (gain, &phi) in paths.gains.iter().zip(&paths.angles) {
        let b = array_response(phi, config.n_bs, config.d_over_lambda)?;
        for (acc, bn) in h.iter_mut().zip(&b) {
            *acc += gain * bn;
        }
    }
    Ok(ChannelVector { h })
}

/// Synthesize the whole channel set, one keyed stream per UE.
pub fn synth_channel_set(config: &ScenarioConfig) -> Result<Vec<ChannelVector>> {
    config.validate()?;
    if config.n_ue == 0 {
        return Err(Error::degenerate("scenario has zero UEs"));
    }
    let mut out = Vec::with_capacity(config.n_ue);
    for ue in 0..config.n_ue {
        let mut stream = RngStream::keyed(config.seed, &[domain::CHANNEL, ue as u64]);
        let paths = synth_paths(&mut stream, config)?;
        out.push(assemble_channel(&paths, config)?);
    }
    Ok(out)
}

/// Scale the whole set by the inverse of its largest entry magnitude.
///
/// The global maximum becomes exactly 1 and all ratios are preserved, so
/// per-channel optimal beam indices are unchanged.
pub fn normalize_channel_set(channels: &[ChannelVector]) -> Result<Vec<ChannelVector>> {
    if channels.is_empty() {
        return Err(Error::degenerate("empty channel set"));
    }
    let max = channels
        .iter()
        .map(ChannelVector::max_abs)
        .fold(0.0, f64::max);
    if max == 0.0 {
        return Err(Error::degenerate("all-zero channel set"));
    }
    if !max.is_finite() {
        return Err(Error::degenerate(non_finite_msg(max)));
    }
    let inv = 1.0 / max;
    Ok(channels
        .iter()
        .map(|c| ChannelVector {
            h: c.h.iter().map(|v| v * inv).collect(),
        })
        .collect())
}

fn non_finite_msg(max: f64) -> String {
    format!("channel set contains non-finite magnitude {max}")
}
