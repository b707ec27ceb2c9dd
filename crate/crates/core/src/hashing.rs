//! Frequency hashing and the bin transform.
//!
//! A hash `(σ, b)` sends frequency `f` to bin `round(frac(σ(f+b))·B) mod B`.
//! [`BinHasher`] evaluates all `B` filtered signals
//! `z_j = (x·H) * G^{(j)}_{σ,b}` at one time from `|supp G ∩ Z|` samples and
//! one length-`B` inverse DFT.

use crate::error::{Error, Result};
use crate::filters::{FilterG, FilterH};
use crate::signal::{unit_phasor, Sampler};
use num_complex::Complex64;
use rand::Rng;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Range for the scale `σ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaRange {
    /// `σ ∈ [1/(BΔ₀), 2/(BΔ₀)]`.
    #[default]
    Standard,
    /// `σ ∈ [1/(4BΔ₀), 1/(2BΔ₀)]`, the range of the collision bound.
    Collision,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HashParams {
    pub sigma: f64,
    pub b: f64,
    pub bins: u64,
}

impl HashParams {
    pub fn new(sigma: f64, b: f64, bins: u64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() || !b.is_finite() {
            return Err(Error::invalid("hash needs finite σ > 0 and finite b"));
        }
        if bins < 2 || !bins.is_power_of_two() {
            return Err(Error::invalid(format!("bin count {bins} must be a power of two ≥ 2")));
        }
        Ok(Self { sigma, b, bins })
    }

    /// Bin index of frequency `f`.
    pub fn bin_of(&self, f: f64) -> u64 {
        let x = self.sigma * (f + self.b);
        let frac = x - x.floor();
        (frac * self.bins as f64).round() as u64 % self.bins
    }

    /// Offset of `f` from the centre of its own bin, in units of the
    /// hashed circle (`|offset| ≤ 1/(2B)`).
    pub fn bin_offset(&self, f: f64) -> f64 {
        let u = self.sigma * (f + self.b) - self.bin_of(f) as f64 / self.bins as f64;
        u - u.round()
    }
}

pub fn hash_bin(p: &HashParams, f: f64) -> u64 {
    p.bin_of(f)
}

pub fn draw_hash_params<R: Rng + ?Sized>(
    delta0: f64,
    bins: u64,
    bandlimit: f64,
    range: SigmaRange,
    rng: &mut R,
) -> Result<HashParams> {
    if !(delta0 > 0.0) || !delta0.is_finite() {
        return Err(Error::invalid(format!("hash scale Δ₀ = {delta0} must be positive")));
    }
    let bf = bins as f64;
    let (lo, hi) = match range {
        SigmaRange::Standard => (1.0 / (bf * delta0), 2.0 / (bf * delta0)),
        SigmaRange::Collision => (1.0 / (4.0 * bf * delta0), 1.0 / (2.0 * bf * delta0)),
    };
    let sigma = rng.random_range(lo..=hi);
    let scale = bandlimit.max(1.0 / sigma);
    let b = rng.random_range(2.0 * scale..=4.0 * scale);
    HashParams::new(sigma, b, bins)
}

/// The `B` filtered-signal values at time `σa`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinVector {
    pub values: Vec<Complex64>,
    pub time: f64,
}

/// Precomputed taps `G(n)·e^{−2πiσbn}` and the inverse DFT plan for one hash.
#[derive(Clone)]
pub struct BinHasher<'a> {
    h: &'a FilterH,
    params: HashParams,
    reach: i64,
    taps: Vec<Complex64>,
    fft: Arc<dyn Fft<f64>>,
}

impl<'a> BinHasher<'a> {
    pub fn new(h: &'a FilterH, g: &'a FilterG, params: HashParams) -> Result<Self> {
        if g.bins != params.bins {
            return Err(Error::invalid(format!("filter has {} bins but hash has {}", g.bins, params.bins)));
        }
        let reach = g.reach();
        let sb = params.sigma * params.b;
        let taps = (-reach..=reach)
            .zip(g.taps())
            .map(|(n, &gn)| gn * unit_phasor(-sb, n as f64))
            .collect();
        let fft = FftPlanner::new().plan_fft_inverse(params.bins as usize);
        Ok(Self { h, params, reach, taps, fft })
    }

    pub fn params(&self) -> &HashParams {
        &self.params
    }

    /// Oracle queries per call.
    pub fn queries_per_call(&self) -> usize {
        self.taps.len()
    }

    /// `z_j(σa)` for every bin `j`.
    pub fn hash_to_bins<S: Sampler + ?Sized>(&self, x: &S, a: f64) -> BinVector {
        let bins = self.params.bins as usize;
        let sigma = self.params.sigma;
        let times: Vec<f64> = (-self.reach..=self.reach).map(|n| sigma * (a - n as f64)).collect();
        let mut samples = vec![Complex64::new(0.0, 0.0); times.len()];
        x.sample_progression(&times, -sigma, &mut samples);
        let mut folded = vec![Complex64::new(0.0, 0.0); bins];
        for (idx, ((tap, v), &t)) in self.taps.iter().zip(samples).zip(&times).enumerate() {
            let n = idx as i64 - self.reach;
            folded[n.rem_euclid(bins as i64) as usize] += v * self.h.eval(t) * tap;
        }
        self.fft.process(&mut folded);
        BinVector { values: folded, time: sigma * a }
    }
}

/// One-shot form of [`BinHasher::hash_to_bins`].
pub fn hash_to_bins<S: Sampler + ?Sized>(x: &S, h: &FilterH, g: &FilterG, p: &HashParams, a: f64) -> Result<BinVector> {
    Ok(BinHasher::new(h, g, *p)?.hash_to_bins(x, a))
}

/// `z_j(t)` for one bin from the comb-convolution sum
/// `Σ_n G(n)·(xH)(t − σn)·e^{2πi n (j/B − σb)}`, without folding or a DFT.
pub fn bin_signal_direct<S: Sampler + ?Sized>(x: &S, h: &FilterH, g: &FilterG, p: &HashParams, j: u64, t: f64) -> Complex64 {
    let reach = g.reach();
    let shift = j as f64 / p.bins as f64 - p.sigma * p.b;
    (-reach..=reach)
        .zip(g.taps())
        .map(|(n, &gn)| {
            let s = t - p.sigma * n as f64;
            gn * x.sample(s) * h.eval(s) * unit_phasor(shift, n as f64)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn bin_examples() {
        let p = HashParams::new(1.0, 0.0, 4).unwrap();
        assert_eq!(p.bin_of(0.0), 0);
        assert_eq!(p.bin_of(0.26), 1);
        assert_eq!(p.bin_of(0.95), 0);
        assert_eq!(hash_bin(&p, 0.5), 2);
        // ties round away from zero
        assert_eq!(p.bin_of(0.125), 1);
    }

    #[test]
    fn sigma_ranges() {
        let mut r = rng::stream(3);
        for _ in 0..100 {
            let p = draw_hash_params(1.0, 4, 10.0, SigmaRange::Standard, &mut r).unwrap();
            assert!((0.25..=0.5).contains(&p.sigma));
            let m = 10f64.max(1.0 / p.sigma);
            assert!(p.b >= 2.0 * m && p.b <= 4.0 * m);
            let q = draw_hash_params(1.0, 4, 10.0, SigmaRange::Collision, &mut r).unwrap();
            assert!((1.0 / 16.0..=1.0 / 8.0).contains(&q.sigma));
        }
        let a = draw_hash_params(2.0, 8, 5.0, SigmaRange::Standard, &mut rng::stream(1)).unwrap();
        let b = draw_hash_params(2.0, 8, 5.0, SigmaRange::Standard, &mut rng::stream(1)).unwrap();
        assert_eq!(a, b);
    }
}
