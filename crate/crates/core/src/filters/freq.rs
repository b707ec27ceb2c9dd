use super::{next_even, scaled_box_power, sinc, sinc_normalized};
use crate::error::{Error, Result};
use crate::quad::GaussLegendre;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GKnobs {
    /// `l = smallest even integer ≥ c_l·log₂(k/δ)`, raised until the band
    /// edges meet their `δ/k` targets.
    pub c_l: f64,
    /// Relative width of the transition band.
    pub alpha_g: f64,
}

impl Default for GKnobs {
    fn default() -> Self {
        Self { c_l: 1.5, alpha_g: 0.5 }
    }
}

/// Flat-top frequency window.
///
/// Time response `G(τ) = b₀·(box_w)^{*l}(τ)·sinc(2π·m·τ)` with box width
/// `w = B/(α_g·π)` and `m = (1 − α_g/2)·π/B`. Its transform is a box of
/// half-width `m` smoothed by `sinc_n(w·ξ)^l`, so
/// `Ĝ(ξ) ∈ [1−δ/k, 1]` for `|ξ| ≤ (1−α_g)π/B` and `Ĝ(ξ) ≤ δ/k` for
/// `|ξ| ≥ π/B`.
///
/// The bin filter used by hashing is `Ĝ_bin(u) = Ĝ(2π(1−α_g)·u)`, whose
/// pass band is `|u| ≤ 1/(2B)`; its time response at integer arguments is
/// tabulated once.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterG {
    pub bins: u64,
    pub l: u32,
    pub alpha_g: f64,
    pub delta: f64,
    pub k: usize,
    pub b0: f64,
    pub knobs: GKnobs,
    box_width: f64,
    rect_half_width: f64,
    /// `Ψ(x) = ∫₀ˣ sinc_n(y)^l dy` at multiples of `PANEL`.
    primitive: Vec<f64>,
    /// Bin-level time response at integers `−reach..=reach`.
    taps: Vec<f64>,
    reach: i64,
}

const PANEL: f64 = 0.5;

impl FilterG {
    pub fn build(k: usize, delta: f64, bins: u64, knobs: GKnobs) -> Result<Self> {
        if k < 1 {
            return Err(Error::invalid("G filter needs k ≥ 1"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid(format!("delta = {delta} must lie in (0, 1)")));
        }
        if bins < 2 || !bins.is_power_of_two() {
            return Err(Error::invalid(format!("bin count {bins} must be a power of two ≥ 2")));
        }
        if !(knobs.alpha_g > 0.0 && knobs.alpha_g < 1.0) || !(knobs.c_l > 0.0) {
            return Err(Error::invalid("G knobs need alpha_g in (0,1) and c_l > 0"));
        }
        let target = delta / k as f64;
        let mut l = next_even(knobs.c_l * (k as f64 / delta).log2());
        loop {
            let g = Self::with_order(k, delta, bins, knobs, l);
            let pass = g.eval_hat((1.0 - knobs.alpha_g) * PI / bins as f64);
            let stop = g.eval_hat(PI / bins as f64);
            if pass >= 1.0 - target && stop <= target {
                return Ok(g);
            }
            l += 2;
            if l > 400 {
                return Err(Error::Numeric(format!("no B-spline order ≤ 400 meets the δ/k = {target:e} band targets")));
            }
        }
    }

    fn with_order(k: usize, delta: f64, bins: u64, knobs: GKnobs, l: u32) -> Self {
        let alpha = knobs.alpha_g;
        let bf = bins as f64;
        let box_width = bf / (alpha * PI);
        let rect_half_width = (1.0 - 0.5 * alpha) * PI / bf;
        let extent = 3.0 * bf * (1.0 - alpha) / alpha + box_width * rect_half_width + 2.0;
        let panels = (extent / PANEL).ceil() as usize;
        let rule = GaussLegendre::order16();
        let li = l as i32;
        let mut primitive = Vec::with_capacity(panels + 1);
        primitive.push(0.0);
        let mut acc = 0.0;
        for p in 0..panels {
            let lo = p as f64 * PANEL;
            acc += rule.integrate(|y| sinc_normalized(y).powi(li), lo, lo + PANEL);
            primitive.push(acc);
        }
        let mut g = Self {
            bins,
            l,
            alpha_g: alpha,
            delta,
            k,
            b0: 0.0,
            knobs,
            box_width,
            rect_half_width,
            primitive,
            taps: Vec::new(),
            reach: 0,
        };
        let half = g.psi(box_width * rect_half_width);
        // b₀ = m / (w^{l−1}·Ψ(w·m)); the w^{l−1} part is kept out of the
        // stored evaluations and only folded into this reported constant.
        g.b0 = (rect_half_width.ln() - (l - 1) as f64 * box_width.ln() - half.ln()).exp();
        let radius = (1.0 - alpha) * l as f64 * bf / alpha;
        let reach = radius.ceil() as i64 - 1;
        g.reach = reach.max(0);
        g.taps = (-g.reach..=g.reach).map(|n| g.eval_bin_time(n as f64)).collect();
        g
    }

    fn psi(&self, x: f64) -> f64 {
        let ax = x.abs();
        let last = self.primitive.len() - 1;
        let idx = ((ax / PANEL).floor() as usize).min(last);
        let v = if idx == last {
            self.primitive[last]
        } else {
            let lo = idx as f64 * PANEL;
            let li = self.l as i32;
            self.primitive[idx] + GaussLegendre::order16().integrate(|y| sinc_normalized(y).powi(li), lo, ax)
        };
        v.copysign(x)
    }

    /// Base time response; exactly zero outside `|τ| < l·B/(2π·α_g)`.
    pub fn eval_time(&self, tau: f64) -> f64 {
        let spline = scaled_box_power(self.l, self.box_width, tau);
        if spline == 0.0 {
            return 0.0;
        }
        let m = self.rect_half_width;
        m / self.psi(self.box_width * m) * spline * sinc(2.0 * PI * m * tau)
    }

    /// Base frequency response; `Ĝ(0) = 1`.
    pub fn eval_hat(&self, xi: f64) -> f64 {
        let w = self.box_width;
        let m = self.rect_half_width;
        (self.psi(w * (xi + m)) - self.psi(w * (xi - m))) / (2.0 * self.psi(w * m))
    }

    fn bin_scale(&self) -> f64 {
        2.0 * PI * (1.0 - self.alpha_g)
    }

    /// Bin-level time response `G_bin(n) = G(n/c)/c`, `c = 2π(1−α_g)`.
    pub fn eval_bin_time(&self, n: f64) -> f64 {
        let c = self.bin_scale();
        self.eval_time(n / c) / c
    }

    /// Bin-level frequency response `Ĝ(2π(1−α_g)·u)`.
    pub fn eval_bin_unit(&self, u: f64) -> f64 {
        self.eval_hat(self.bin_scale() * u)
    }

    /// `Ĝ^{(j)}_{σ,b}(f) = Σ_i Ĝ_bin(σf + σb − i − j/B)`, summed over the
    /// three periods nearest the argument; the remaining terms are below the
    /// stop-band level.
    pub fn eval_bin_hat(&self, sigma: f64, b: f64, j: u64, f: f64) -> f64 {
        let u = sigma * (f + b) - j as f64 / self.bins as f64;
        let r = u - u.round();
        (-1..=1).map(|i| self.eval_bin_unit(r - i as f64)).sum()
    }

    /// Half-width of the base time support, `l·B/(2π·α_g)`.
    pub fn time_support(&self) -> f64 {
        self.l as f64 * self.bins as f64 / (2.0 * PI * self.alpha_g)
    }

    /// Largest `|n|` with a nonzero bin-level tap.
    pub fn reach(&self) -> i64 {
        self.reach
    }

    /// Bin-level taps `G_bin(n)` for `n = −reach..=reach`.
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Number of integer points in the open support of the bin-level filter.
    pub fn support_points(&self) -> usize {
        self.taps.len()
    }

    pub fn pass_edge(&self) -> f64 {
        (1.0 - self.alpha_g) * PI / self.bins as f64
    }

    pub fn stop_edge(&self) -> f64 {
        PI / self.bins as f64
    }

    /// `δ/k`, the band tolerance.
    pub fn tolerance(&self) -> f64 {
        self.delta / self.k as f64
    }
}
