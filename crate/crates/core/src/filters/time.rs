use super::{next_even, next_pow2, sinc};
use crate::error::{Error, Result};
use crate::quad::{self, GaussLegendre};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HKnobs {
    /// `R = S = next power of two ≥ c_r·k²`.
    pub c_r: f64,
    /// Number of table nodes over `[−T/4, 5T/4]`; forced odd so `T/2` is a node.
    pub table_points: usize,
}

impl Default for HKnobs {
    fn default() -> Self {
        Self { c_r: 1.0, table_points: 16385 }
    }
}

/// Time window `H(t) = H₁(α_h(2t/T − 1))` with
/// `H₁(u) = s₀∫_{u−1/2}^{u+1/2} K(τ)dτ` and
/// `K(τ) = sinc(C₀Rτ)^{C·log₂R} · Π_{i=0}^{log₂S} sinc(C₀Sτ/2^i)^{2^i·C}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterH {
    pub r: u64,
    pub s: u64,
    pub c: u32,
    pub c0: f64,
    pub alpha_h: f64,
    pub s0: f64,
    pub window: f64,
    pub delta1: f64,
    /// Full width of the spectrum's support, in Hz.
    pub dh: f64,
    pub knobs: HKnobs,
    pub k: usize,
    #[serde(skip)]
    table_start: f64,
    #[serde(skip)]
    table_step: f64,
    #[serde(skip)]
    table: Vec<f64>,
}

/// The sinc-power kernel as a list of `(scale, power)` factors.
struct Kernel {
    factors: Vec<(f64, i32)>,
}

impl Kernel {
    fn new(r: u64, s: u64, c: u32, c0: f64) -> Self {
        let log_r = r.trailing_zeros() as i32;
        let log_s = s.trailing_zeros();
        let mut factors = vec![(c0 * r as f64, c as i32 * log_r)];
        for i in 0..=log_s {
            factors.push((c0 * s as f64 / (1u64 << i) as f64, (1i32 << i) * c as i32));
        }
        Self { factors }
    }

    fn eval(&self, tau: f64) -> f64 {
        self.factors.iter().map(|&(a, p)| sinc(a * tau).powi(p)).product()
    }

    /// Upper bound on `|K|` for `|τ| ≥ tau`, from `|sinc(x)| ≤ min(1, 1/|x|)`.
    fn envelope(&self, tau: f64) -> f64 {
        self.factors.iter().map(|&(a, p)| (1.0f64).min(1.0 / (a * tau).abs()).powi(p)).product()
    }

    /// Width of the narrowest feature, used to size quadrature cells.
    fn feature_width(&self) -> f64 {
        self.factors
            .iter()
            .map(|&(a, p)| (PI / a).min((6.0 / p.max(1) as f64).sqrt() / a))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Cumulative integral `Φ(x) = ∫₀ˣ K` on cells, with an exact partial-cell
/// completion.
struct Primitive<'a> {
    kernel: &'a Kernel,
    cell: f64,
    cumulative: Vec<f64>,
}

impl<'a> Primitive<'a> {
    fn build(kernel: &'a Kernel, extent: f64) -> Result<Self> {
        let cell = kernel.feature_width() / 16.0;
        let cells = (extent / cell).ceil() as usize;
        let mut cumulative = Vec::with_capacity(cells + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        let mut frozen = false;
        for i in 0..cells {
            let lo = i as f64 * cell;
            if !frozen && lo > 0.0 && kernel.envelope(lo) * (extent - lo) < 1e-18 * acc {
                frozen = true;
            }
            if !frozen {
                let part = quad::adaptive(|x| kernel.eval(x), lo, lo + cell, 1e-12, 1e-17 * acc.max(cell))?;
                acc += part;
            }
            cumulative.push(acc);
        }
        Ok(Self { kernel, cell, cumulative })
    }

    fn eval(&self, x: f64) -> f64 {
        let ax = x.abs();
        let last = self.cumulative.len() - 1;
        let idx = ((ax / self.cell).floor() as usize).min(last);
        let v = if idx == last {
            self.cumulative[last]
        } else {
            let lo = idx as f64 * self.cell;
            self.cumulative[idx] + GaussLegendre::order16().integrate(|t| self.kernel.eval(t), lo, ax)
        };
        v.copysign(x)
    }
}

impl FilterH {
    pub fn build(k: usize, delta1: f64, window: f64, knobs: HKnobs) -> Result<Self> {
        if k < 1 {
            return Err(Error::invalid("H filter needs k ≥ 1"));
        }
        if !(delta1 > 0.0 && delta1 < 0.5) {
            return Err(Error::invalid(format!("delta1 = {delta1} must lie in (0, 1/2)")));
        }
        if !(window > 0.0) || !window.is_finite() {
            return Err(Error::invalid(format!("window {window} must be positive")));
        }
        if !(knobs.c_r > 0.0) || knobs.table_points < 5 {
            return Err(Error::invalid("H knobs need c_r > 0 and at least 5 table points"));
        }
        // log₂R must be positive for the first kernel factor to exist.
        let r = next_pow2(knobs.c_r * (k * k) as f64).max(2);
        let s = r;
        let c = next_even((1.0 / delta1).log2());
        let c0 = PI * (c as f64 / PI).ceil();
        let alpha_h = 0.5 + 1.2 / (PI * c0 * r as f64);
        let kernel = Kernel::new(r, s, c, c0);
        let extent = 0.5 + alpha_h * 1.5 + 0.05;
        let primitive = Primitive::build(&kernel, extent)?;
        let half_mass = primitive.eval(0.5);
        if !(half_mass > 0.0) {
            return Err(Error::Numeric("H kernel integrates to zero".into()));
        }
        let s0 = 1.0 / (2.0 * half_mass);
        let log_r = r.trailing_zeros() as f64;
        let log_s = s.trailing_zeros() as f64;
        let dh = c as f64 * c0 / PI * (r as f64 * log_r + s as f64 * (log_s + 1.0)) * 2.0 * alpha_h / window;

        let points = knobs.table_points | 1;
        let table_start = -0.25 * window;
        let table_step = 1.5 * window / (points - 1) as f64;
        let mid = points / 2;
        let mut table = vec![0.0; points];
        // Fill the left half and mirror, so the table is exactly symmetric.
        for i in 0..=mid {
            let t = table_start + i as f64 * table_step;
            let u = (alpha_h * (2.0 * t / window - 1.0)).abs();
            let v = s0 * (primitive.eval(u + 0.5) - primitive.eval(u - 0.5));
            table[i] = v;
            table[points - 1 - i] = v;
        }
        Ok(Self {
            r,
            s,
            c,
            c0,
            alpha_h,
            s0,
            window,
            delta1,
            dh,
            knobs,
            k,
            table_start,
            table_step,
            table,
        })
    }

    pub(crate) fn from_parts(mut header: FilterH, table: Vec<f64>) -> Result<Self> {
        if table.len() < 5 || table.len().is_multiple_of(2) {
            return Err(Error::invalid("H table must have an odd number (≥ 5) of entries"));
        }
        header.table_step = 1.5 * header.window / (table.len() - 1) as f64;
        header.table_start = -0.25 * header.window;
        header.table = table;
        Ok(header)
    }

    /// Cubic (Catmull–Rom) interpolation of the table; 0 outside it.
    pub fn eval(&self, t: f64) -> f64 {
        let p = (t - self.table_start) / self.table_step;
        let n = self.table.len();
        if !(p >= 0.0 && p <= (n - 1) as f64) {
            return 0.0;
        }
        let i = (p.floor() as usize).min(n - 2);
        let x = p - i as f64;
        let at = |j: isize| -> f64 {
            let j = j.clamp(0, n as isize - 1) as usize;
            self.table[j]
        };
        let i = i as isize;
        let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
        let x2 = x * x;
        let x3 = x2 * x;
        0.5 * (2.0 * p1
            + (p2 - p0) * x
            + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * x2
            + (3.0 * (p1 - p2) + p3 - p0) * x3)
    }

    /// `H₁(u)` by direct adaptive quadrature of the defining integral.
    /// Slow; meant for checking the table.
    pub fn eval_direct(&self, t: f64) -> Result<f64> {
        let kernel = Kernel::new(self.r, self.s, self.c, self.c0);
        let u = self.alpha_h * (2.0 * t / self.window - 1.0);
        let lo = u - 0.5;
        let hi = u + 0.5;
        // Split at the origin and at the kernel's main lobe so the adaptive
        // driver sees the peak.
        let lobe = PI / (self.c0 * self.r as f64);
        let mut cuts = vec![lo, hi];
        for c in [-4.0 * lobe, -lobe, 0.0, lobe, 4.0 * lobe] {
            if c > lo && c < hi {
                cuts.push(c);
            }
        }
        cuts.sort_by(f64::total_cmp);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            total += quad::adaptive(|x| kernel.eval(x), w[0], w[1], 1e-12, 1e-300)?;
        }
        Ok(self.s0 * total)
    }

    /// Half-width, in units of `|2t/T − 1|`, of the region where the
    /// fluctuation bound `H ∈ [1−δ₁, 1]` is claimed:
    /// `α_h⁻¹·(1/2 − π/(C₀R))`.
    pub fn flat_half_width(&self) -> f64 {
        (0.5 - PI / (self.c0 * self.r as f64)) / self.alpha_h
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn table_times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.table.len()).map(move |i| self.table_start + i as f64 * self.table_step)
    }

    pub fn table_step(&self) -> f64 {
        self.table_step
    }

    pub fn table_start(&self) -> f64 {
        self.table_start
    }

    /// `π·C·R·√(2C·log₂R)`.
    pub fn s0_bound(&self) -> f64 {
        let log_r = self.r.trailing_zeros() as f64;
        PI * self.c as f64 * self.r as f64 * (2.0 * self.c as f64 * log_r).sqrt()
    }
}
