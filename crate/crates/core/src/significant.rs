//! Two-level sampling of "significant" times: first-level times from the
//! importance distribution restricted to the flat part of `H`, then one
//! time per bin drawn with probability proportional to `w_i|z_j(t_i)|²`.

use crate::error::{Error, Result};
use crate::filters::FilterH;
use crate::hashing::BinHasher;
use crate::sampling::{draw_weighted, TimeDistribution};
use crate::signal::Sampler;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Start times `t₀ ∈ [left, right]` whose shifted window `[t₀, t₀+β]` stays
/// where `H > 1 − δ₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodIntervalU {
    pub left: f64,
    pub right: f64,
}

impl GoodIntervalU {
    pub fn len(&self) -> f64 {
        self.right - self.left
    }
}

pub fn compute_good_interval(h: &FilterH, beta: f64) -> Result<GoodIntervalU> {
    let window = h.window;
    if !(beta >= 0.0) || beta >= 0.1 * window {
        return Err(Error::Config(format!("shift β = {beta} must lie in [0, T/10)")));
    }
    let half = 0.5 * window;
    let reach = h.flat_half_width() * half;
    let mut left = half - reach;
    let mut right = half + reach - beta;
    let floor = 1.0 - h.delta1;
    let step = h.table_step();
    let start = h.table_start();
    let table = h.table();
    // Largest run of table nodes above the floor around the centre.
    let centre = ((half - start) / step).round() as usize;
    if table[centre] <= floor {
        return Err(Error::Config("H does not reach 1 − δ₁ at the window centre".into()));
    }
    let lo = (0..centre).rev().find(|&i| table[i] <= floor).map_or(start, |i| start + (i + 1) as f64 * step);
    let hi = (centre..table.len())
        .find(|&i| table[i] <= floor)
        .map_or(start + (table.len() - 1) as f64 * step, |i| start + (i - 1) as f64 * step);
    left = left.max(lo);
    right = right.min(hi - beta);
    if right - left < 0.5 * window {
        return Err(Error::Config(format!(
            "flat region of H too short: [{left}, {right}] for β = {beta}"
        )));
    }
    Ok(GoodIntervalU { left, right })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSample {
    pub z_alpha: Complex64,
    pub z_alpha_beta: Complex64,
    pub alpha: f64,
    pub degenerate: bool,
}

impl BinSample {
    fn abstain() -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self { z_alpha: zero, z_alpha_beta: zero, alpha: f64::NAN, degenerate: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificantSampleBatch {
    pub beta: f64,
    pub bins: Vec<BinSample>,
}

/// One call fills every bin from a shared first-level draw of `s` times,
/// using `2·s·|supp G ∩ Z|` oracle queries.
pub fn generate_significant_samples<S: Sampler + ?Sized, R: Rng + ?Sized>(
    x: &S,
    h: &FilterH,
    hasher: &BinHasher<'_>,
    beta: f64,
    s: usize,
    k: usize,
    rng: &mut R,
) -> Result<SignificantSampleBatch> {
    let u = compute_good_interval(h, beta)?;
    let dist = TimeDistribution::on_window(k.max(2) as f64, h.window, Some((u.left, u.right)))?;
    let first = draw_weighted(&dist, s, rng)?;
    let sigma = hasher.params().sigma;
    let (at, shifted): (Vec<_>, Vec<_>) = first
        .times
        .iter()
        .map(|&t| (hasher.hash_to_bins(x, t / sigma), hasher.hash_to_bins(x, (t + beta) / sigma)))
        .unzip();
    let bins = hasher.params().bins as usize;
    let mut out = Vec::with_capacity(bins);
    let mut mass = vec![0.0; s];
    for j in 0..bins {
        let mut total = 0.0;
        for (i, m) in mass.iter_mut().enumerate() {
            *m = first.weights[i] * at[i].values[j].norm_sqr();
            total += *m;
        }
        if !(total > 0.0) || !total.is_finite() {
            out.push(BinSample::abstain());
            continue;
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = s - 1;
        for (i, m) in mass.iter().enumerate() {
            acc += m;
            if acc > target && *m > 0.0 {
                pick = i;
                break;
            }
        }
        while mass[pick] == 0.0 {
            pick -= 1;
        }
        out.push(BinSample {
            z_alpha: at[pick].values[j],
            z_alpha_beta: shifted[pick].values[j],
            alpha: first.times[pick],
            degenerate: false,
        });
    }
    Ok(SignificantSampleBatch { beta, bins: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::{FilterG, GKnobs, HKnobs};
    use crate::hashing::{draw_hash_params, SigmaRange};
    use crate::rng;
    use crate::signal::{CountingSampler, SparseSignal, Tone};
    use std::f64::consts::TAU;

    #[test]
    fn good_interval_is_flat_and_long() {
        let h = FilterH::build(2, 0.005, 1.0, HKnobs::default()).unwrap();
        let u0 = compute_good_interval(&h, 0.0).unwrap();
        let half = h.flat_half_width() * 0.5;
        assert!((u0.left - (0.5 - half)).abs() < 2.0 * h.table_step());
        assert!((u0.right - (0.5 + half)).abs() < 2.0 * h.table_step());
        let beta = 0.03;
        let u = compute_good_interval(&h, beta).unwrap();
        assert!(u.len() >= 0.5);
        for i in 0..=1000 {
            let t = u.left + (u.right + beta - u.left) * i as f64 / 1000.0;
            assert!(h.eval(t) > 1.0 - h.delta1);
        }
        assert!(compute_good_interval(&h, 0.2).is_err());
    }

    #[test]
    fn zero_signal_abstains_and_queries_are_counted() {
        let h = FilterH::build(1, 0.01, 1.0, HKnobs::default()).unwrap();
        let g = FilterG::build(1, 0.01, 4, GKnobs::default()).unwrap();
        let mut r = rng::stream(5);
        let p = draw_hash_params(64.0, 4, 100.0, SigmaRange::Standard, &mut r).unwrap();
        let hasher = BinHasher::new(&h, &g, p).unwrap();
        let zero = SparseSignal::zero(100.0);
        let counted = CountingSampler::new(&zero);
        let batch = generate_significant_samples(&counted, &h, &hasher, 0.01, 7, 1, &mut r).unwrap();
        assert!(batch.bins.iter().all(|b| b.degenerate));
        assert_eq!(counted.queries(), 2 * 7 * g.support_points() as u64);
    }

    #[test]
    fn single_tone_local_test_mostly_passes() {
        let h = FilterH::build(1, 0.01, 1.0, HKnobs::default()).unwrap();
        let g = FilterG::build(1, 0.01, 4, GKnobs::default()).unwrap();
        let f0 = 61.7;
        let x = SparseSignal::new(vec![Tone::new(f0, Complex64::new(1.0, 0.4))], 100.0).unwrap();
        let mut good = 0;
        for trial in 0..30 {
            let mut r = rng::child(11, trial);
            let p = draw_hash_params(64.0, 4, 100.0, SigmaRange::Standard, &mut r).unwrap();
            let hasher = BinHasher::new(&h, &g, p).unwrap();
            let beta = 0.02;
            let batch = generate_significant_samples(&x, &h, &hasher, beta, 8, 1, &mut r).unwrap();
            let s = batch.bins[p.bin_of(f0) as usize];
            assert!(!s.degenerate);
            let rot = Complex64::from_polar(1.0, TAU * f0 * beta);
            if (s.z_alpha_beta - s.z_alpha * rot).norm_sqr() <= 0.01 * s.z_alpha.norm_sqr() {
                good += 1;
            }
        }
        assert!(good >= 18, "{good}/30");
    }
}
