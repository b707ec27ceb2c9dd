//! Weighted least-squares fit of polynomial-modulated tones on known
//! frequencies, and conversion of the fit back to a sum of tones.

use crate::error::{Error, Result};
use crate::sampling::{draw_weighted, TimeDistribution};
use crate::signal::{unit_phasor, Sampler, SparseSignal, Tone};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// `y(t) = Σ_j e^{2πi f_j t}·P_j(τ)` with `τ = 2t/T − 1` and `P_j` of degree
/// at most `degree`, coefficients stored lowest power first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedPolySignal {
    pub window: f64,
    pub degree: usize,
    pub freqs: Vec<f64>,
    pub coeffs: Vec<Vec<Complex64>>,
}

fn horner(coeffs: &[Complex64], x: f64) -> Complex64 {
    coeffs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
}

fn binomial_row(p: usize) -> Vec<f64> {
    let mut row = vec![1.0; p + 1];
    for q in 1..p {
        row[q] = row[q - 1] * (p - q + 1) as f64 / q as f64;
    }
    row
}

impl MixedPolySignal {
    pub fn zero(window: f64, degree: usize) -> Self {
        Self { window, degree, freqs: vec![], coeffs: vec![] }
    }

    pub fn tau(&self, t: f64) -> f64 {
        2.0 * t / self.window - 1.0
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        let tau = self.tau(t);
        self.freqs
            .iter()
            .zip(&self.coeffs)
            .map(|(&f, c)| unit_phasor(f, t) * horner(c, tau))
            .sum()
    }

    /// Coefficients of each `P_j` as a polynomial in `t` itself.
    pub fn to_t_basis(&self) -> Vec<Vec<Complex64>> {
        let scale = 2.0 / self.window;
        self.coeffs
            .iter()
            .map(|c| {
                let mut out = vec![Complex64::new(0.0, 0.0); c.len()];
                for (p, &cp) in c.iter().enumerate() {
                    for (q, b) in binomial_row(p).into_iter().enumerate() {
                        let sign = if (p - q) % 2 == 0 { 1.0 } else { -1.0 };
                        out[q] += cp * (sign * b * scale.powi(q as i32));
                    }
                }
                out
            })
            .collect()
    }

    /// Evaluate through the `t`-basis coefficients.
    pub fn eval_t_basis(&self, t: f64) -> Complex64 {
        self.freqs
            .iter()
            .zip(self.to_t_basis())
            .map(|(&f, c)| unit_phasor(f, t) * horner(&c, t))
            .sum()
    }
}

/// Evaluate `Σ_j e^{2πi f_j t}·Σ_p c_{j,p} τ^p` at `t`.
pub fn mixed_poly_eval(y: &MixedPolySignal, t: f64) -> Complex64 {
    y.eval(t)
}

/// Sketch times with weights `1/(T·m·D(t))` and the normalized sampling
/// probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchPlan {
    pub times: Vec<f64>,
    pub weights: Vec<f64>,
    pub probs: Vec<f64>,
}

pub fn weighted_sketch<R: Rng + ?Sized>(m: usize, k_eff: usize, window: f64, rng: &mut R) -> Result<SketchPlan> {
    let dist = TimeDistribution::on_window(k_eff.max(2) as f64, window, None)?;
    let set = draw_weighted(&dist, m, rng)?;
    let total: f64 = set.weights.iter().sum();
    let probs = set.weights.iter().map(|w| w / total).collect();
    Ok(SketchPlan { times: set.times, weights: set.weights, probs })
}

/// Merge frequencies closer than `tol`, keeping the first of each group in
/// sorted order.
pub fn dedupe_frequencies(freqs: &[f64], tol: f64) -> Vec<f64> {
    let mut sorted: Vec<f64> = freqs.iter().copied().filter(|f| f.is_finite()).collect();
    sorted.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(sorted.len());
    for f in sorted {
        if out.last().is_none_or(|&last| f - last >= tol) {
            out.push(f);
        }
    }
    out
}

/// Sketch size `⌈c_m·n·log₂(n+1)⌉` for `n` unknowns.
pub fn sketch_size(unknowns: usize, c_m: f64) -> usize {
    let n = unknowns as f64;
    ((c_m * n * (n + 1.0).log2()).ceil() as usize).max(unknowns + 1)
}

/// Least-squares solve of a `√w`-weighted system, truncating singular values
/// below `1e−8` of the largest.
pub fn solve_weighted(
    design: &DMatrix<Complex64>,
    rhs: &DVector<Complex64>,
    weights: &[f64],
) -> Result<DVector<Complex64>> {
    solve_truncated(design, rhs, weights, 1e-8)
}

/// Least-squares solve of a `√w`-weighted system, dropping singular values
/// below `cutoff` times the largest.
pub fn solve_truncated(
    design: &DMatrix<Complex64>,
    rhs: &DVector<Complex64>,
    weights: &[f64],
    cutoff: f64,
) -> Result<DVector<Complex64>> {
    let mut a = design.clone();
    let mut b = rhs.clone();
    for (i, &w) in weights.iter().enumerate() {
        let root = w.sqrt();
        a.row_mut(i).scale_mut(root);
        b[i] *= root;
    }
    let svd = a.svd(true, true);
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if !(top > 0.0) || !top.is_finite() {
        return Err(Error::Numeric("least-squares design has no usable singular values".into()));
    }
    svd.solve(&b, cutoff * top).map_err(|e| Error::Numeric(e.to_string()))
}

/// Settings for [`signal_estimation`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub degree: usize,
    pub window: f64,
    /// Frequencies closer than this share one polynomial.
    pub merge_tol: f64,
    /// Sketch size constant `c_m`.
    pub c_m: f64,
    /// Relative singular-value cutoff of the least-squares solve.
    pub rcond: f64,
}

impl FitSettings {
    pub fn new(degree: usize, window: f64) -> Self {
        Self { degree, window, merge_tol: 0.0, c_m: 2.0, rcond: 1e-4 }
    }
}

/// Fit `y` with the given frequencies and polynomial degree from a weighted
/// sketch of `x`.
pub fn signal_estimation<S: Sampler + ?Sized, R: Rng + ?Sized>(
    x: &S,
    freqs: &[f64],
    fit: &FitSettings,
    rng: &mut R,
) -> Result<MixedPolySignal> {
    let FitSettings { degree, window, merge_tol, c_m, rcond } = *fit;
    let freqs = dedupe_frequencies(freqs, merge_tol.max(0.01 / window));
    if freqs.is_empty() {
        return Ok(MixedPolySignal::zero(window, degree));
    }
    let width = degree + 1;
    let unknowns = freqs.len() * width;
    let m = sketch_size(unknowns, c_m);
    let plan = weighted_sketch(m, unknowns, window, rng)?;
    let design = DMatrix::from_fn(m, unknowns, |i, col| {
        let t = plan.times[i];
        let tau = 2.0 * t / window - 1.0;
        unit_phasor(freqs[col / width], t) * tau.powi((col % width) as i32)
    });
    let rhs = DVector::from_iterator(m, plan.times.iter().map(|&t| x.sample(t)));
    let sol = solve_truncated(&design, &rhs, &plan.weights, rcond)?;
    let coeffs = (0..freqs.len()).map(|j| sol.rows(j * width, width).iter().copied().collect()).collect();
    Ok(MixedPolySignal { window, degree, freqs, coeffs })
}

fn fit_tones(poly: &[Complex64], window: f64, gamma: f64, count: usize) -> Result<(Vec<Complex64>, f64)> {
    // Chebyshev nodes for the fit, a denser uniform grid for the check.
    let nodes: Vec<f64> = (0..4 * count)
        .map(|i| 0.5 * window * (1.0 - (std::f64::consts::PI * (i as f64 + 0.5) / (4 * count) as f64).cos()))
        .collect();
    let checks = 32 * count + 1;
    let check: Vec<f64> = (0..checks).map(|i| window * i as f64 / (checks - 1) as f64).collect();
    let offset = (count as f64 - 1.0) / 2.0;
    let target = |t: f64| horner(poly, 2.0 * t / window - 1.0);
    let design = DMatrix::from_fn(nodes.len(), count, |i, m| unit_phasor(gamma * (m as f64 - offset), nodes[i]));
    let rhs = DVector::from_iterator(nodes.len(), nodes.iter().map(|&t| target(t)));
    let sol = solve_truncated(&design, &rhs, &vec![1.0; nodes.len()], 1e-14)?;
    let err = nodes
        .iter()
        .chain(&check)
        .map(|&t| {
            let fit: Complex64 = sol.iter().enumerate().map(|(m, &a)| a * unit_phasor(gamma * (m as f64 - offset), t)).sum();
            (fit - target(t)).norm()
        })
        .fold(0.0, f64::max);
    Ok((sol.iter().copied().collect(), err))
}

/// Replace each `e^{2πi f t}·P(τ)` by tones `f + γ·(m − d/2)`, `m = 0..=d`,
/// shrinking `γ` until the fit error on `[0, T]` is at most `eps`.
pub fn poly_to_fourier(y: &MixedPolySignal, eps: f64) -> Result<SparseSignal> {
    if !(eps > 0.0) {
        return Err(Error::invalid("conversion tolerance must be positive"));
    }
    let mut tones = Vec::new();
    for (&f, poly) in y.freqs.iter().zip(&y.coeffs) {
        let Some(top) = poly.iter().rposition(|c| c.norm() > 0.0) else { continue };
        if top == 0 {
            tones.push(Tone::new(f, poly[0]));
            continue;
        }
        let count = top + 1;
        let poly = &poly[..count];
        let mut gamma = count as f64 / y.window;
        let mut best = f64::INFINITY;
        let mut stale = 0;
        let fit = loop {
            let (coeffs, err) = fit_tones(poly, y.window, gamma, count)?;
            if err <= eps {
                break coeffs;
            }
            if err < 0.999 * best {
                best = err;
                stale = 0;
            } else {
                stale += 1;
            }
            gamma *= std::f64::consts::FRAC_1_SQRT_2;
            if stale >= 40 || gamma < 1e-300 {
                return Err(Error::Conversion(format!(
                    "no tone spacing reaches error {eps:e} for degree {top} at {f} (best {best:e})"
                )));
            }
        };
        let offset = (count as f64 - 1.0) / 2.0;
        tones.extend(fit.into_iter().enumerate().map(|(m, a)| Tone::new(f + gamma * (m as f64 - offset), a)));
    }
    let bandlimit = tones.iter().map(|t| t.freq.abs()).fold(0.0, f64::max);
    SparseSignal::new(tones, bandlimit)
}
