//! Multi-scale vote search for one frequency per bin.
//!
//! The search keeps an interval `[L, L+len)` and splits it into `num`
//! sub-intervals. Each round compares `z(α+β)` with `z(α)`: the phase
//! difference pins the frequency modulo `1/β`, and every sub-interval that
//! contains one of the aliases gets a vote. A window of three adjacent
//! sub-intervals holding at least half of the votes becomes the left edge of
//! the next, `5/num` times shorter interval.

use crate::error::{Error, Result};
use crate::filters::FilterH;
use crate::hashing::BinHasher;
use crate::rng;
use crate::signal::Sampler;
use crate::significant::{generate_significant_samples, BinSample};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    /// Arity of the search (≥ 6).
    pub num: usize,
    /// Fixed number of levels; `None` derives it from `F` and `Δ`.
    pub iterations: Option<usize>,
    /// Vote rounds per level.
    pub rounds: usize,
    /// `β ∈ [c/2, c]·num/len`.
    pub c_beta: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { num: 8, iterations: None, rounds: 24, c_beta: 0.05 }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num < 6 {
            return Err(Error::Config(format!("search arity {} must be at least 6", self.num)));
        }
        if self.rounds == 0 || self.iterations == Some(0) {
            return Err(Error::Config("search needs at least one round and one level".into()));
        }
        if !(self.c_beta > 0.0) {
            return Err(Error::Config("c_beta must be positive".into()));
        }
        Ok(())
    }

    /// `max(1, ⌈ln(2F/(num·Δ)) / ln(num/5)⌉)` unless fixed.
    pub fn levels(&self, bandlimit: f64, resolution: f64) -> usize {
        self.iterations.unwrap_or_else(|| {
            let n = self.num as f64;
            let d = ((2.0 * bandlimit / (n * resolution)).ln() / (n / 5.0).ln()).ceil();
            if d.is_finite() && d >= 1.0 {
                d as usize
            } else {
                1
            }
        })
    }

    /// Interval length searched at level `d` (0-based): `2F·(5/num)^d`.
    pub fn level_len(&self, bandlimit: f64, d: usize) -> f64 {
        2.0 * bandlimit * (5.0 / self.num as f64).powi(d as i32)
    }

    /// Upper end `β̂ = c_beta·num/len` of the shift range at level `d`.
    pub fn beta_cap(&self, bandlimit: f64, d: usize) -> f64 {
        self.c_beta * self.num as f64 / self.level_len(bandlimit, d)
    }
}

/// `levels × rounds × bins` significant samples with one `β` per
/// `(level, round)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleTensor {
    pub levels: usize,
    pub rounds: usize,
    pub bins: usize,
    pub betas: Vec<f64>,
    entries: Vec<BinSample>,
}

impl SampleTensor {
    pub fn beta(&self, d: usize, r: usize) -> f64 {
        self.betas[d * self.rounds + r]
    }

    pub fn entry(&self, d: usize, r: usize, j: usize) -> &BinSample {
        &self.entries[(d * self.rounds + r) * self.bins + j]
    }

    /// Build a tensor from explicit entries (rounds × bins per level).
    pub fn from_parts(levels: usize, rounds: usize, bins: usize, betas: Vec<f64>, entries: Vec<BinSample>) -> Result<Self> {
        if betas.len() != levels * rounds || entries.len() != levels * rounds * bins {
            return Err(Error::invalid("sample tensor shape mismatch"));
        }
        Ok(Self { levels, rounds, bins, betas, entries })
    }
}

/// Fill the tensor: for every `(d, r)` draw `β ~ U[β̂_d/2, β̂_d]` and run one
/// significant-sample call covering all bins.
#[allow(clippy::too_many_arguments)]
pub fn precompute_samples<S: Sampler + ?Sized, R: Rng + ?Sized>(
    x: &S,
    h: &FilterH,
    hasher: &BinHasher<'_>,
    bandlimit: f64,
    resolution: f64,
    cfg: &SearchConfig,
    s: usize,
    k: usize,
    rng: &mut R,
) -> Result<SampleTensor> {
    cfg.validate()?;
    let levels = cfg.levels(bandlimit, resolution);
    let bins = hasher.params().bins as usize;
    let mut betas = Vec::with_capacity(levels * cfg.rounds);
    let mut entries = Vec::with_capacity(levels * cfg.rounds * bins);
    for d in 0..levels {
        let cap = cfg.beta_cap(bandlimit, d);
        for _ in 0..cfg.rounds {
            let beta = rng.random_range(0.5 * cap..=cap);
            let batch = generate_significant_samples(x, h, hasher, beta, s, k, rng)?;
            betas.push(beta);
            entries.extend(batch.bins);
        }
    }
    Ok(SampleTensor { levels, rounds: cfg.rounds, bins, betas, entries })
}

/// Phase of `z(α+β)/z(α)` in `(−π, π]`.
pub fn phase_step(sample: &BinSample) -> f64 {
    (sample.z_alpha_beta * sample.z_alpha.conj()).arg()
}

/// Frequencies consistent with one round's phase step that fall near
/// `[left, left+len]`: `(θ + 2πs)/(2πβ)` for integer
/// `s ∈ [β·left − 10, β·(left+len) + 10]`.
pub fn candidate_frequencies(sample: &BinSample, beta: f64, left: f64, len: f64) -> Vec<f64> {
    let theta = phase_step(sample);
    let lo = (beta * left - 10.0).ceil() as i64;
    let hi = (beta * (left + len) + 10.0).floor() as i64;
    (lo..=hi).map(|s| (theta + TAU * s as f64) / (TAU * beta)).collect()
}

/// Vote counts per sub-interval at level `d` for bin `j`, and the number of
/// rounds that did not abstain.
pub fn vote_counts(tensor: &SampleTensor, d: usize, j: usize, left: f64, len: f64, num: usize) -> (Vec<u32>, usize) {
    let width = len / num as f64;
    let mut votes = vec![0u32; num];
    let mut active = 0;
    for r in 0..tensor.rounds {
        let sample = tensor.entry(d, r, j);
        if sample.degenerate || sample.z_alpha.norm_sqr() == 0.0 {
            continue;
        }
        active += 1;
        let mut hit = vec![false; num];
        for f in candidate_frequencies(sample, tensor.beta(d, r), left, len) {
            let pos = (f - left) / width;
            if pos < 0.0 || pos > num as f64 {
                continue;
            }
            // Closed sub-intervals: a point on a boundary votes for both sides.
            let q = pos.floor() as usize;
            if q < num {
                hit[q] = true;
            }
            if pos == pos.floor() && q >= 1 {
                hit[q - 1] = true;
            }
        }
        for (v, h) in votes.iter_mut().zip(hit) {
            *v += h as u32;
        }
    }
    (votes, active)
}

/// One level of the search; `None` when no window of three sub-intervals
/// collects half of the non-abstaining rounds.
pub fn ary_search(tensor: &SampleTensor, d: usize, j: usize, left: f64, len: f64, cfg: &SearchConfig) -> Option<f64> {
    let (votes, active) = vote_counts(tensor, d, j, left, len, cfg.num);
    if active == 0 {
        return None;
    }
    let at = |q: usize| votes.get(q).copied().unwrap_or(0);
    (0..cfg.num)
        .find(|&q| 2 * (at(q) + at(q + 1) + at(q + 2)) as usize >= active)
        .map(|q| left + q as f64 * len / cfg.num as f64)
}

/// Left endpoints visited by the search for bin `j`, ending with the final
/// interval; `None` if any level fails.
pub fn search_trace(tensor: &SampleTensor, j: usize, bandlimit: f64, cfg: &SearchConfig) -> Option<Vec<(f64, f64)>> {
    let mut left = -bandlimit;
    let mut len = 2.0 * bandlimit;
    let mut trace = vec![(left, len)];
    for d in 0..tensor.levels {
        left = ary_search(tensor, d, j, left, len, cfg)?;
        len *= 5.0 / cfg.num as f64;
        trace.push((left, len));
    }
    Some(trace)
}

/// Point estimate for bin `j`: centre of the final interval.
pub fn frequency_estimation_z(tensor: &SampleTensor, j: usize, bandlimit: f64, cfg: &SearchConfig) -> Option<f64> {
    search_trace(tensor, j, bandlimit, cfg).map(|t| {
        let (left, len) = *t.last().expect("trace is nonempty");
        left + 0.5 * len
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinFrequency {
    pub bin: u64,
    pub freq: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrequencyList {
    pub entries: Vec<BinFrequency>,
}

impl FrequencyList {
    pub fn freqs(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.freq).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Precompute once, then search every bin.
#[allow(clippy::too_many_arguments)]
pub fn frequency_estimation_x<S: Sampler + ?Sized>(
    x: &S,
    h: &FilterH,
    hasher: &BinHasher<'_>,
    bandlimit: f64,
    resolution: f64,
    cfg: &SearchConfig,
    s: usize,
    k: usize,
    seed: u64,
) -> Result<FrequencyList> {
    let mut rng = rng::stream(seed);
    let tensor = precompute_samples(x, h, hasher, bandlimit, resolution, cfg, s, k, &mut rng)?;
    let entries = (0..tensor.bins)
        .filter_map(|j| {
            frequency_estimation_z(&tensor, j, bandlimit, cfg).map(|freq| BinFrequency { bin: j as u64, freq })
        })
        .collect();
    Ok(FrequencyList { entries })
}
