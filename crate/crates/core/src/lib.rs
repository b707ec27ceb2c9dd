//! Recovery of Fourier-sparse continuous-time signals from noisy samples.
//!
//! The pipeline hashes frequencies into bins with a pair of window filters,
//! estimates one frequency per bin by a vote-based multi-scale search, fits
//! polynomial-modulated tones by weighted least squares and boosts the
//! success probability by a min-of-median selection over independent runs.
//!
//! Conventions used throughout the crate:
//! - the observation window is `[0, T]` and `‖f‖²_T = (1/T)∫₀ᵀ|f|²`;
//! - `sinc(x) = sin(x)/x` (unnormalized) unless a function says otherwise;
//! - `round` means round half away from zero.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod filters;
pub mod freq_est;
pub mod harness;
pub mod hashing;
pub mod pipeline;
pub mod plot;
pub mod quad;
pub mod rng;
pub mod sampling;
pub mod signal;
pub mod signal_est;
pub mod significant;

pub use error::{Error, Result};
pub use num_complex::Complex64;
