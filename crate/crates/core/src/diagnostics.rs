//! Ground-truth checks used to label trials: heavy clusters, high-SNR bins,
//! isolation, Large Offset, the ideal filter and energy bounds. All of them
//! read the true signal and are never used on the recovery path.

use crate::error::{Error, Result};
use crate::filters::{FilterG, FilterH};
use crate::hashing::HashParams;
use crate::signal::{default_grid_points, t_norm_sq, uniform_grid, unit_phasor, SparseSignal};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

/// `Ĥ(ξ) = e^{−πiξT}·A(ξ)` with the real amplitude `A` tabulated from the
/// `H` table by a zero-padded FFT.
#[derive(Debug, Clone)]
pub struct HSpectrum {
    window: f64,
    half_support: f64,
    step: f64,
    amplitude: Vec<f64>,
}

impl HSpectrum {
    pub fn new(h: &FilterH) -> Self {
        const PAD: usize = 16;
        let table = h.table();
        let n = table.len();
        let centre = n / 2;
        let size = ((n - 1) * PAD).next_power_of_two();
        let dt = h.table_step();
        let mut buf = vec![Complex64::new(0.0, 0.0); size];
        for (i, &v) in table.iter().enumerate() {
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            let idx = (i as i64 - centre as i64).rem_euclid(size as i64) as usize;
            buf[idx] += Complex64::new(w * v * dt, 0.0);
        }
        FftPlanner::new().plan_fft_forward(size).process(&mut buf);
        let step = 1.0 / (size as f64 * dt);
        let amplitude = buf[..size / 2].iter().map(|c| c.re).collect();
        let nyquist = 0.5 / dt;
        Self { window: h.window, half_support: (0.5 * h.dh).min(nyquist), step, amplitude }
    }

    /// Half-width of the frequency support used for sweeps and quadrature.
    pub fn half_support(&self) -> f64 {
        self.half_support
    }

    /// `A(ξ)` by cubic interpolation; zero outside the support.
    pub fn amplitude(&self, xi: f64) -> f64 {
        let x = xi.abs();
        if x > self.half_support {
            return 0.0;
        }
        let p = x / self.step;
        let i = p.floor() as usize;
        let n = self.amplitude.len();
        if i + 2 >= n {
            return 0.0;
        }
        let f = p - i as f64;
        // Even function: reflect the left neighbour at the origin.
        let p0 = if i == 0 { self.amplitude[1] } else { self.amplitude[i - 1] };
        let (p1, p2, p3) = (self.amplitude[i], self.amplitude[i + 1], self.amplitude[i + 2]);
        let f2 = f * f;
        0.5 * (2.0 * p1
            + (p2 - p0) * f
            + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * f2
            + (3.0 * (p1 - p2) + p3 - p0) * f2 * f)
    }

    pub fn eval(&self, xi: f64) -> Complex64 {
        unit_phasor(-0.5 * xi, self.window) * self.amplitude(xi)
    }

    /// `(x·H)^(ξ) = Σ_i a_i·Ĥ(ξ − f_i)`.
    pub fn windowed(&self, x: &SparseSignal, xi: f64) -> Complex64 {
        x.tones().iter().map(|t| t.coeff * self.eval(xi - t.freq)).sum()
    }

    /// Merged neighbourhoods `f_i ± half_support` that carry `(x·H)^`.
    fn carrier(&self, x: &SparseSignal) -> Vec<(f64, f64)> {
        let mut spans: Vec<(f64, f64)> =
            x.tones().iter().map(|t| (t.freq - self.half_support, t.freq + self.half_support)).collect();
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (lo, hi) in spans {
            match merged.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        merged
    }

    /// `∫ |(x·H)^(ξ)|²·w(ξ) dξ` over `ξ ∈ [lo, hi]` by composite Simpson on a
    /// grid of at most `1/(16T)` spacing.
    pub fn energy<W: Fn(f64) -> f64>(&self, x: &SparseSignal, lo: f64, hi: f64, weight: W) -> f64 {
        let dx = 1.0 / (16.0 * self.window);
        self.carrier(x)
            .into_iter()
            .filter_map(|(a, b)| {
                let (a, b) = (a.max(lo), b.min(hi));
                (b > a).then_some((a, b))
            })
            .map(|(a, b)| {
                let panels = (((b - a) / dx).ceil() as usize).max(1) * 2;
                let h = (b - a) / panels as f64;
                let f = |xi: f64| self.windowed(x, xi).norm_sqr() * weight(xi);
                let inner: f64 = (1..panels).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
                h / 3.0 * (f(a) + inner + f(b))
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinLabel {
    pub bin: u64,
    pub heavy: bool,
    pub high_snr: bool,
    pub well_isolated: bool,
    pub large_offset: bool,
}

/// `N² = ‖g‖²_T + δ‖x*‖²_T`.
pub fn noise_level_sq(noise_norm_sq: f64, delta: f64, signal_norm_sq: f64) -> f64 {
    noise_norm_sq + delta * signal_norm_sq
}

/// Whether `[f − Δ_h, f + Δ_h]` holds at least `T·N²/k` of `|(x*·H)^|²`.
pub fn heavy_frequency(xstar: &SparseSignal, spec: &HSpectrum, dh: f64, f: f64, noise_level_sq: f64, k: usize) -> bool {
    let mass = spec.energy(xstar, f - dh, f + dh, |_| 1.0);
    mass >= spec.window * noise_level_sq / k.max(1) as f64
}

/// `z_j` sampled on the grid `t₀ + m·σ/P`, computed as an FFT convolution of
/// `(x·H)` samples with the upsampled comb taps.
#[derive(Debug, Clone)]
pub struct BinSeries {
    pub start: f64,
    pub step: f64,
    pub values: Vec<Complex64>,
}

impl BinSeries {
    /// `∫_ℝ |z|²` as a Riemann sum over the whole support.
    pub fn energy_all(&self) -> f64 {
        self.step * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    /// `∫_lo^hi |z|²`.
    pub fn energy_between(&self, lo: f64, hi: f64) -> f64 {
        self.step
            * self
                .values
                .iter()
                .enumerate()
                .filter(|(m, _)| {
                    let t = self.start + *m as f64 * self.step;
                    t >= lo && t <= hi
                })
                .map(|(_, v)| v.norm_sqr())
                .sum::<f64>()
    }
}

pub fn bin_series(x: &SparseSignal, h: &FilterH, g: &FilterG, p: &HashParams, j: u64) -> BinSeries {
    const OVERSAMPLE: usize = 2;
    let window = h.window;
    let step = p.sigma / OVERSAMPLE as f64;
    let start = -0.25 * window;
    let len = (1.5 * window / step).ceil() as usize + 1;
    let times: Vec<f64> = (0..len).map(|m| start + m as f64 * step).collect();
    let mut samples = vec![Complex64::new(0.0, 0.0); len];
    x.eval_progression(&times, step, &mut samples);
    samples.iter_mut().zip(&times).for_each(|(v, &t)| *v *= h.eval(t));
    let reach = g.reach() as usize;
    let span = 2 * OVERSAMPLE * reach + 1;
    let size = (len + span - 1).next_power_of_two();
    let shift = j as f64 / p.bins as f64 - p.sigma * p.b;
    let mut kernel = vec![Complex64::new(0.0, 0.0); size];
    for (i, &gn) in g.taps().iter().enumerate() {
        let n = i as f64 - reach as f64;
        kernel[i * OVERSAMPLE] = gn * unit_phasor(shift, n);
    }
    let mut signal = vec![Complex64::new(0.0, 0.0); size];
    signal[..len].copy_from_slice(&samples);
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    fwd.process(&mut kernel);
    fwd.process(&mut signal);
    signal.iter_mut().zip(&kernel).for_each(|(a, b)| *a *= b / size as f64);
    inv.process(&mut signal);
    signal.truncate(len + span - 1);
    BinSeries { start: start - (OVERSAMPLE * reach) as f64 * step, step, values: signal }
}

/// `∫_ℝ|z_j|² / ∫₀ᵀ|z_j|²`.
pub fn time_concentration(x: &SparseSignal, h: &FilterH, g: &FilterG, p: &HashParams, j: u64) -> f64 {
    let z = bin_series(x, h, g, p, j);
    z.energy_all() / z.energy_between(0.0, h.window)
}

/// `‖(g·H)∗G^{(j)}‖²_T ≤ c·‖(x*·H)∗G^{(j)}‖²_T`.
pub fn high_snr_bin(
    xstar: &SparseSignal,
    noise: &SparseSignal,
    h: &FilterH,
    g: &FilterG,
    p: &HashParams,
    j: u64,
    c_snr: f64,
) -> bool {
    let window = h.window;
    let signal = bin_series(xstar, h, g, p, j).energy_between(0.0, window);
    let noisy = if noise.is_empty() { 0.0 } else { bin_series(noise, h, g, p, j).energy_between(0.0, window) };
    noisy <= c_snr * signal
}

/// Whether `Ĝ^{(j)}(ξ) ∈ [δ/k, 1 − δ/k]` for some `ξ ∈ f + supp Ĥ`, with `j`
/// the bin of `f`.
pub fn offset_at(f: f64, spec: &HSpectrum, g: &FilterG, p: &HashParams) -> bool {
    offset_in_bin(f, p.bin_of(f), spec, g, p)
}

fn offset_in_bin(f: f64, j: u64, spec: &HSpectrum, g: &FilterG, p: &HashParams) -> bool {
    let tol = g.tolerance();
    let half = spec.half_support();
    let edge = g.alpha_g / (p.sigma * p.bins as f64);
    let dx = (edge.min(half.max(edge)) / 64.0).max(1e-12 * (1.0 + f.abs()));
    let steps = ((2.0 * half) / dx).ceil() as usize;
    (0..=steps).any(|i| {
        let xi = f - half + 2.0 * half * i as f64 / steps.max(1) as f64;
        let v = g.eval_bin_hat(p.sigma, p.b, j, xi);
        v >= tol && v <= 1.0 - tol
    })
}

/// Large Offset event, reading each tone against its own bin's filter.
pub fn large_offset(freqs: &[f64], spec: &HSpectrum, g: &FilterG, p: &HashParams) -> bool {
    freqs.iter().any(|&f| offset_at(f, spec, g, p))
}

/// Large Offset event against every bin's filter. Bins tile the line, so this
/// reading fires for almost every tone.
pub fn large_offset_any_bin(freqs: &[f64], spec: &HSpectrum, g: &FilterG, p: &HashParams) -> bool {
    freqs.iter().any(|&f| (0..p.bins).any(|j| offset_in_bin(f, j, spec, g, p)))
}

/// `|ẑ_j|² = |(x·H)^|²·Ĝ^{(j)}²` integrated over `ξ ∈ [lo, hi]`.
pub fn bin_spectral_energy(x: &SparseSignal, spec: &HSpectrum, g: &FilterG, p: &HashParams, j: u64, lo: f64, hi: f64) -> f64 {
    spec.energy(x, lo, hi, |xi| g.eval_bin_hat(p.sigma, p.b, j, xi).powi(2))
}

/// Share of `‖ẑ_j‖²` inside `[f* − Δ, f* + Δ]`, with `j` the bin of `f*`.
pub fn in_band_fraction(x: &SparseSignal, spec: &HSpectrum, g: &FilterG, p: &HashParams, fstar: f64, resolution: f64) -> f64 {
    let j = p.bin_of(fstar);
    let inside = bin_spectral_energy(x, spec, g, p, j, fstar - resolution, fstar + resolution);
    let total = bin_spectral_energy(x, spec, g, p, j, f64::NEG_INFINITY, f64::INFINITY);
    if total > 0.0 {
        inside / total
    } else {
        0.0
    }
}

/// Energy of `ẑ_j` outside `[f* − Δ, f* + Δ]` at most `ε·T·N²/k`.
#[allow(clippy::too_many_arguments)]
pub fn well_isolated(
    x: &SparseSignal,
    spec: &HSpectrum,
    g: &FilterG,
    p: &HashParams,
    fstar: f64,
    resolution: f64,
    eps: f64,
    noise_level_sq: f64,
    k: usize,
) -> bool {
    let j = p.bin_of(fstar);
    let outside = bin_spectral_energy(x, spec, g, p, j, f64::NEG_INFINITY, fstar - resolution)
        + bin_spectral_energy(x, spec, g, p, j, fstar + resolution, f64::INFINITY);
    outside <= eps * spec.window * noise_level_sq / k.max(1) as f64
}

/// `1` where `Ĝ^{(j)}(f) > 1 − δ₁`, else `0`.
pub fn ideal_filter_value(g: &FilterG, p: &HashParams, j: u64, f: f64, delta1: f64) -> u8 {
    (g.eval_bin_hat(p.sigma, p.b, j, f) > 1.0 - delta1) as u8
}

/// `((x·H)∗I^{(j)})(t)` by quadrature of `(x·H)^·I^{(j)}` against `e^{2πiξt}`.
pub fn window_then_ideal(x: &SparseSignal, spec: &HSpectrum, g: &FilterG, p: &HashParams, j: u64, delta1: f64, t: f64) -> Complex64 {
    let dx = 1.0 / (64.0 * spec.window);
    let half = spec.half_support();
    x.tones()
        .iter()
        .map(|tone| {
            let panels = ((2.0 * half / dx).ceil() as usize).max(1) * 2;
            let h = 2.0 * half / panels as f64;
            let a = tone.freq - half;
            let f = |xi: f64| {
                spec.eval(xi - tone.freq) * unit_phasor(xi, t) * ideal_filter_value(g, p, j, xi, delta1) as f64
            };
            let inner: Complex64 =
                (1..panels).map(|i| f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 }).sum();
            tone.coeff * (f(a) + inner + f(a + 2.0 * half)) * (h / 3.0)
        })
        .sum()
}

/// `((x∗I^{(j)})·H)(t)`.
pub fn ideal_then_window(x: &SparseSignal, h: &FilterH, g: &FilterG, p: &HashParams, j: u64, delta1: f64, t: f64) -> Complex64 {
    let filtered: Complex64 = x
        .tones()
        .iter()
        .map(|tone| tone.coeff * unit_phasor(tone.freq, t) * ideal_filter_value(g, p, j, tone.freq, delta1) as f64)
        .sum();
    filtered * h.eval(t)
}

/// `max_t |x(t)|² / ‖x‖²_T` on a uniform grid.
pub fn energy_bound_ratio(x: &SparseSignal, window: f64) -> Result<f64> {
    let grid = uniform_grid(window, default_grid_points(x.sparsity(), x.bandlimit(), window));
    let values = x.eval_many(&grid);
    let norm = t_norm_sq(&values, window)?;
    if !(norm > 0.0) {
        return Err(Error::invalid("energy ratio of a zero signal is undefined"));
    }
    Ok(values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max) / norm)
}

/// Thresholds for [`label_bins`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabelConfig {
    pub c_snr: f64,
    pub isolation_eps: f64,
    pub resolution: f64,
    pub delta: f64,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self { c_snr: 1e-3, isolation_eps: 1.0, resolution: 1.0, delta: 0.01 }
    }
}

/// Labels for every bin that receives a tone of `x*`; each bin is judged on
/// its largest tone.
pub fn label_bins(
    xstar: &SparseSignal,
    noise: &SparseSignal,
    h: &FilterH,
    spec: &HSpectrum,
    g: &FilterG,
    p: &HashParams,
    cfg: &LabelConfig,
) -> Vec<BinLabel> {
    let window = h.window;
    let signal_sq = xstar.norm_sq(window);
    let noise_sq = if noise.is_empty() { 0.0 } else { noise.norm_sq(window) };
    let n2 = noise_level_sq(noise_sq, cfg.delta, signal_sq);
    let k = xstar.sparsity().max(1);
    let total = combine(xstar, noise);
    let mut bins: Vec<(u64, f64, f64)> = Vec::new();
    for tone in xstar.tones() {
        let j = p.bin_of(tone.freq);
        let mag = tone.coeff.norm();
        match bins.iter_mut().find(|b| b.0 == j) {
            Some(b) if mag > b.2 => *b = (j, tone.freq, mag),
            Some(_) => {}
            None => bins.push((j, tone.freq, mag)),
        }
    }
    bins.sort_by_key(|b| b.0);
    bins.into_iter()
        .map(|(j, f, _)| BinLabel {
            bin: j,
            heavy: heavy_frequency(xstar, spec, h.dh, f, n2, k),
            high_snr: high_snr_bin(xstar, noise, h, g, p, j, cfg.c_snr),
            well_isolated: well_isolated(&total, spec, g, p, f, cfg.resolution, cfg.isolation_eps, n2, k),
            large_offset: xstar.tones().iter().filter(|t| p.bin_of(t.freq) == j).any(|t| offset_at(t.freq, spec, g, p)),
        })
        .collect()
}

/// `x* + g` as one tone list.
pub fn combine(xstar: &SparseSignal, noise: &SparseSignal) -> SparseSignal {
    let mut tones = xstar.tones().to_vec();
    tones.extend_from_slice(noise.tones());
    SparseSignal::new(tones, xstar.bandlimit().max(noise.bandlimit())).expect("tones already validated")
}
