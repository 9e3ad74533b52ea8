//! Analog beamforming codebooks under the constant-modulus constraint.
//!
//! Sensing beams come from the plain DFT codebook, narrow beams from an
//! oversampled DFT codebook, and the upper-bound beamformer is the
//! phase-aligned matched filter (optionally phase-quantized). Every beam has
//! unit norm and entries of magnitude `1/sqrt(n_bs)`.
//!
//! Sign convention: beam `q` entry `n` is `exp(-j*2*pi*n*q/Q') / sqrt(n_bs)`
//! with `Q' = n_bs * oversampling`. The convention is fixed so golden tests
//! are bit-exact; any consistent choice yields identical RSSI magnitudes.

use alloc::vec::Vec;
use core::f64::consts::TAU;

use crate::channel::ChannelVector;
use crate::{C64, Error, Result};

/// One constant-modulus analog beamforming vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamVector {
    pub w: Vec<C64>,
}

impl BeamVector {
    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// Role of a codebook in the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum CodebookKind {
    /// Wide sensing beams swept to produce classifier features.
    Sensing,
    /// Narrow beams among which the optimal one is predicted.
    Narrow,
    Custom,
}

/// An ordered set of beams.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub beams: Vec<BeamVector>,
    pub kind: CodebookKind,
    /// DFT oversampling factor (1 for the plain DFT codebook).
    pub oversampling: usize,
}

impl Codebook {
    /// Number of beams Q.
    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    /// Antenna count of the beams (0 for an empty book).
    pub fn n_bs(&self) -> usize {
        self.beams.first().map_or(0, BeamVector::len)
    }

    /// Evenly strided `m`-beam subset, used when fewer sensing beams than
    /// antennas are swept. `m == len()` returns the book unchanged.
    pub fn strided_subset(&self, m: usize) -> Result<Codebook> {
        if m == 0 || m > self.len() {
            return Err(Error::invalid("subset size must be in 1..=Q"));
        }
        let beams = (0..m)
            .map(|i| self.beams[i * self.len() / m].clone())
            .collect();
        Ok(Codebook {
            beams,
            kind: self.kind,
            oversampling: self.oversampling,
        })
    }
}

fn dft_family(n_bs: usize, os: usize, kind: CodebookKind) -> Result<Codebook> {
    if n_bs < 1 {
        return Err(Error::invalid("n_bs must be >= 1"));
    }
    if os < 1 {
        return Err(Error::invalid("oversampling factor must be >= 1"));
    }
    let q_total = n_bs * os;
    let scale = 1.0 / libm::sqrt(n_bs as f64);
    let beams = (0..q_total)
        .map(|q| {
            let w = (0..n_bs)
                .map(|n| {
                    // n*q/q_total as a single correctly-rounded division keeps
                    // odft(n_bs, os) beams at stride os bit-identical to the
                    // plain DFT beams.
                    let frac = (n * q) as f64 / q_total as f64;
                    let phase = -TAU * frac;
                    C64::new(scale * libm::cos(phase), scale * libm::sin(phase))
                })
                .collect();
            BeamVector { w }
        })
        .collect();
    Ok(Codebook {
        beams,
        kind,
        oversampling: os,
    })
}

/// Plain `n_bs`-beam DFT codebook (mutually orthogonal sensing beams).
pub fn dft_codebook(n_bs: usize) -> Result<Codebook> {
    dft_family(n_bs, 1, CodebookKind::Sensing)
}

/// Oversampled DFT codebook with `n_bs * os` narrow beams; contains the plain
/// DFT beams at indices `q*os`.
pub fn odft_codebook(n_bs: usize, os: usize) -> Result<Codebook> {
    dft_family(n_bs, os, CodebookKind::Narrow)
}

/// Round each entry's phase to the nearest multiple of `2*pi/2^bits`,
/// keeping magnitudes untouched.
pub fn quantize_phases(beam: &BeamVector, bits: u32) -> Result<BeamVector> {
    if bits < 1 {
        return Err(Error::invalid("bits must be >= 1"));
    }
    let levels = (1u64 << bits) as f64;
    let step = TAU / levels;
    let w = beam
        .w
        .iter()
        .map(|v| {
            let mag = v.norm();
            let phase = libm::atan2(v.im, v.re);
            let snapped = libm::round(phase / step) * step;
            C64::new(mag * libm::cos(snapped), mag * libm::sin(snapped))
        })
        .collect();
    Ok(BeamVector { w })
}

/// Phase-aligned matched-filter beam for a perfectly known channel.
///
/// Entry `i` is `exp(j*angle(h_i)) / sqrt(n_bs)`, so every term of `h^H w`
/// lands on the positive real axis and `|h^H w|^2 = (sum|h_i|)^2 / n_bs`,
/// the maximum over all constant-modulus vectors (the rank-one SVD direction
/// under the phase-only constraint).
pub fn mrt_beam(h: &ChannelVector) -> Result<BeamVector> {
    if h.is_empty() || h.h.iter().all(|v| v.norm_sqr() == 0.0) {
        return Err(Error::degenerate("zero channel has no matched beam"));
    }
    let scale = 1.0 / libm::sqrt(h.len() as f64);
    let w = h
        .h
        .iter()
        .map(|v| {
            if v.norm_sqr() == 0.0 {
                // Dead entry contributes nothing; any phase works.
                C64::new(scale, 0.0)
            } else {
                let phase = libm::atan2(v.im, v.re);
                C64::new(scale * libm::cos(phase), scale * libm::sin(phase))
            }
        })
        .collect();
    Ok(BeamVector { w })
}
