//! Simulation and evaluation core for deep-learning mmWave beam alignment
//! with conformal (deep k-NN) credibility.
//!
//! The crate covers the full pipeline in pure, deterministic code:
//!
//! - [`channel`] — geometric multipath channel synthesis for a ULA base station
//! - [`codebook`] — DFT / oversampled-DFT analog codebooks and phase-quantized
//!   matched-filter beams
//! - [`sweep`] — RSSI beam-sweep measurement, optimal-beam labeling, and
//!   train/validation/calibration/test dataset assembly
//! - [`model`] — a small convolutional classifier with exact gradients,
//!   per-layer activation capture, and seeded deterministic training
//! - [`dknn`] — per-layer nearest-neighbor conformal engine producing
//!   prediction, confidence, credibility, and p-values
//! - [`attack`] — fast gradient-sign adversarial input generation
//! - [`eval`] — top-k accuracy, spectral efficiency, sweep overhead, and
//!   reliability diagrams for all heads and baselines
//!
//! Everything is `no_std`-compatible (`alloc` required); transcendental math
//! is routed through `libm` so results are bit-identical with or without
//! `std`. All randomness flows through counter-based streams ([`rng`]), so
//! any fixed seed reproduces every artifact bit-for-bit.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod attack;
pub mod channel;
pub mod codebook;
pub mod dknn;
pub mod eval;
pub mod model;
pub mod rng;
pub mod sweep;

mod error;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;

/// Complex sample type used throughout (double-precision pair).
pub type C64 = num_complex::Complex64;
