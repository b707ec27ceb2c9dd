//! Importance-sampling distributions over the observation window and the
//! weighted discrete norms built from them.
//!
//! Internally the window is centred, `x ∈ [−T', T']`. The density is
//! `c/(T'(1−|x|/T'))` in the bulk `|x| ≤ T'(1−1/k)` and `c·k/T'` on the two
//! edge bands, optionally restricted to a sub-interval `U` and renormalized.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistKind {
    Full,
    Restricted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Region {
    Edge,
    BulkRight,
    BulkLeft,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Piece {
    lo: f64,
    hi: f64,
    region: Region,
    /// Unnormalized mass `∫ shape` over the piece (shape = density / c).
    mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeDistribution {
    pub kind: DistKind,
    pub k: f64,
    /// Half-width `T'` of the centred window.
    pub half_window: f64,
    /// Support in centred coordinates.
    pub support: (f64, f64),
    /// Normalization: density = `c`·shape.
    pub c: f64,
    /// Added to centred coordinates to obtain caller coordinates.
    pub offset: f64,
    pieces: Vec<Piece>,
}

/// Full distribution on the centred window `[−T', T']` (restricted to `U`
/// when given, which must contain the bulk `[−T'(1−1/k), T'(1−1/k)]`).
pub fn build_dist(k: f64, half_window: f64, restrict: Option<(f64, f64)>) -> Result<TimeDistribution> {
    if let Some((lo, hi)) = restrict {
        let bulk = half_window * (1.0 - 1.0 / k);
        if lo > -bulk || hi < bulk {
            return Err(Error::invalid(format!(
                "restriction [{lo}, {hi}] must contain the bulk [-{bulk}, {bulk}]"
            )));
        }
    }
    TimeDistribution::new(k, half_window, restrict, 0.0)
}

impl TimeDistribution {
    fn new(k: f64, half_window: f64, restrict: Option<(f64, f64)>, offset: f64) -> Result<Self> {
        if !(k >= 2.0) || !k.is_finite() {
            return Err(Error::invalid(format!("sampling distribution needs k ≥ 2, got {k}")));
        }
        if !(half_window > 0.0) || !half_window.is_finite() {
            return Err(Error::invalid("half window must be positive"));
        }
        let (lo, hi) = restrict.unwrap_or((-half_window, half_window));
        let slack = 1e-12 * half_window;
        if !(lo < hi) || lo < -half_window - slack || hi > half_window + slack {
            return Err(Error::invalid(format!(
                "restriction [{lo}, {hi}] must be a nonempty subinterval of [-{half_window}, {half_window}]"
            )));
        }
        let (lo, hi) = (lo.max(-half_window), hi.min(half_window));
        let edge = half_window * (1.0 - 1.0 / k);
        let breaks = [-half_window, -edge, 0.0, edge, half_window];
        let regions = [Region::Edge, Region::BulkLeft, Region::BulkRight, Region::Edge];
        let mut pieces = Vec::new();
        for (w, &region) in breaks.windows(2).zip(&regions) {
            let a = w[0].max(lo);
            let b = w[1].min(hi);
            if b > a {
                let mass = shape_mass(region, a, b, k, half_window);
                pieces.push(Piece { lo: a, hi: b, region, mass });
            }
        }
        let total: f64 = pieces.iter().map(|p| p.mass).sum();
        Ok(Self {
            kind: if restrict.is_some() { DistKind::Restricted } else { DistKind::Full },
            k,
            half_window,
            support: (lo, hi),
            c: 1.0 / total,
            offset,
            pieces,
        })
    }

    /// Distribution over the observation window `[0, T]`, optionally
    /// restricted to `U ⊆ [0, T]` (any nonempty subinterval). Times are
    /// reported in window coordinates.
    pub fn on_window(k: f64, window: f64, restrict: Option<(f64, f64)>) -> Result<Self> {
        let half = 0.5 * window;
        Self::new(k, half, restrict.map(|(a, b)| (a - half, b - half)), half)
    }

    /// Length of the interval the weights integrate over.
    pub fn window_len(&self) -> f64 {
        self.support.1 - self.support.0
    }

    fn shape(&self, x: f64) -> f64 {
        if x < self.support.0 || x > self.support.1 {
            return 0.0;
        }
        let edge = self.half_window * (1.0 - 1.0 / self.k);
        if x.abs() >= edge {
            self.k / self.half_window
        } else {
            1.0 / (self.half_window - x.abs())
        }
    }

    /// Density at `t` (caller coordinates).
    pub fn density(&self, t: f64) -> f64 {
        self.c * self.shape(t - self.offset)
    }

    /// Cumulative distribution at `t` (caller coordinates).
    pub fn cdf(&self, t: f64) -> f64 {
        let x = t - self.offset;
        let mut acc = 0.0;
        for p in &self.pieces {
            if x >= p.hi {
                acc += p.mass;
            } else if x > p.lo {
                acc += shape_mass(p.region, p.lo, x, self.k, self.half_window);
                break;
            } else {
                break;
            }
        }
        (acc * self.c).clamp(0.0, 1.0)
    }

    /// Inverse CDF at `q ∈ [0, 1]`.
    pub fn quantile(&self, q: f64) -> f64 {
        let mut remaining = q.clamp(0.0, 1.0) / self.c;
        let last = self.pieces.len() - 1;
        for (i, p) in self.pieces.iter().enumerate() {
            if remaining <= p.mass || i == last {
                let m = remaining.min(p.mass);
                let x = invert_piece(p, m, self.k, self.half_window);
                return self.offset + x.clamp(p.lo, p.hi);
            }
            remaining -= p.mass;
        }
        unreachable!("distribution has at least one piece")
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

fn shape_mass(region: Region, a: f64, b: f64, k: f64, half: f64) -> f64 {
    match region {
        Region::Edge => k * (b - a) / half,
        Region::BulkRight => ((1.0 - a / half) / (1.0 - b / half)).ln(),
        Region::BulkLeft => ((1.0 + b / half) / (1.0 + a / half)).ln(),
    }
}

fn invert_piece(p: &Piece, m: f64, k: f64, half: f64) -> f64 {
    match p.region {
        Region::Edge => p.lo + m * half / k,
        Region::BulkRight => half * (1.0 - (1.0 - p.lo / half) * (-m).exp()),
        Region::BulkLeft => half * ((1.0 + p.lo / half) * m.exp() - 1.0),
    }
}

/// I.i.d. draws with importance weights `w_i = 1/(T_win·s·D(t_i))`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSampleSet {
    pub times: Vec<f64>,
    pub weights: Vec<f64>,
    pub source: TimeDistribution,
}

impl WeightedSampleSet {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `Σ w_i |f(t_i)|²`.
    pub fn norm_sq_of<F: Fn(f64) -> Complex64>(&self, f: F) -> f64 {
        self.times.iter().zip(&self.weights).map(|(&t, &w)| w * f(t).norm_sqr()).sum()
    }
}

pub fn draw_weighted<R: Rng + ?Sized>(dist: &TimeDistribution, s: usize, rng: &mut R) -> Result<WeightedSampleSet> {
    if s == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let scale = dist.window_len() * s as f64;
    let times: Vec<f64> = (0..s).map(|_| dist.sample(rng)).collect();
    let weights = times.iter().map(|&t| 1.0 / (scale * dist.density(t))).collect();
    Ok(WeightedSampleSet { times, weights, source: dist.clone() })
}

/// `‖x‖²_{S,w} = Σ w_i |x_i|²`.
pub fn weighted_norm_sq(values: &[Complex64], weights: &[f64]) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::invalid(format!(
            "{} values but {} weights",
            values.len(),
            weights.len()
        )));
    }
    Ok(values.iter().zip(weights).map(|(v, w)| w * v.norm_sqr()).sum())
}
