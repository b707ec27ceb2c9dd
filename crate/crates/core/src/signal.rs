//! Tones, sparse signals, T-norms and the noisy sample oracle.

use crate::error::{Error, Result};
use crate::rng::{self, mix64, unit_open};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};
use std::sync::atomic::{AtomicU64, Ordering};

/// `e^{2πi·f·t}`, with the phase reduced modulo one cycle before the
/// trigonometric call so large `f·t` stays accurate.
#[inline]
pub fn unit_phasor(f: f64, t: f64) -> Complex64 {
    let x = f * t;
    let (s, c) = (TAU * (x - x.round())).sin_cos();
    Complex64::new(c, s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    pub freq: f64,
    pub coeff: Complex64,
}

impl Tone {
    pub fn new(freq: f64, coeff: Complex64) -> Self {
        Self { freq, coeff }
    }
}

/// A finite sum of tones `Σ v_j e^{2πi f_j t}` with `|f_j| ≤ F`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseSignal {
    tones: Vec<Tone>,
    bandlimit: f64,
}

impl SparseSignal {
    pub fn new(tones: Vec<Tone>, bandlimit: f64) -> Result<Self> {
        if !(bandlimit >= 0.0) || !bandlimit.is_finite() {
            return Err(Error::invalid(format!("bandlimit {bandlimit} must be finite and nonnegative")));
        }
        let slack = 1e-9 * bandlimit.max(1.0);
        for t in &tones {
            if !t.freq.is_finite() || t.freq.abs() > bandlimit + slack {
                return Err(Error::invalid(format!("tone frequency {} outside [-{bandlimit}, {bandlimit}]", t.freq)));
            }
            if !(t.coeff.re.is_finite() && t.coeff.im.is_finite()) {
                return Err(Error::invalid("tone coefficient is not finite"));
            }
        }
        Ok(Self { tones, bandlimit })
    }

    pub fn zero(bandlimit: f64) -> Self {
        Self { tones: Vec::new(), bandlimit }
    }

    pub fn tones(&self) -> &[Tone] {
        &self.tones
    }

    pub fn bandlimit(&self) -> f64 {
        self.bandlimit
    }

    pub fn sparsity(&self) -> usize {
        self.tones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tones.is_empty()
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        self.tones.iter().map(|tone| tone.coeff * unit_phasor(tone.freq, t)).sum()
    }

    /// [`SparseSignal::eval`] on equally spaced `times`, by phasor
    /// recurrence re-anchored every 32 points.
    pub fn eval_progression(&self, times: &[f64], step: f64, out: &mut [Complex64]) {
        const ANCHOR: usize = 32;
        out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
        for tone in &self.tones {
            let ratio = unit_phasor(tone.freq, step);
            let mut phasor = Complex64::new(0.0, 0.0);
            for (i, (o, &t)) in out.iter_mut().zip(times).enumerate() {
                phasor = if i % ANCHOR == 0 { unit_phasor(tone.freq, t) } else { phasor * ratio };
                *o += tone.coeff * phasor;
            }
        }
    }

    pub fn eval_many(&self, times: &[f64]) -> Vec<Complex64> {
        times.iter().map(|&t| self.eval(t)).collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let tones = self.tones.iter().map(|t| Tone::new(t.freq, t.coeff * factor)).collect();
        Self { tones, bandlimit: self.bandlimit }
    }

    /// `self − other` as one tone list (tones are not merged).
    pub fn minus(&self, other: &SparseSignal) -> Self {
        let tones = self
            .tones
            .iter()
            .copied()
            .chain(other.tones.iter().map(|t| Tone::new(t.freq, -t.coeff)))
            .collect();
        Self { tones, bandlimit: self.bandlimit.max(other.bandlimit) }
    }

    /// `‖x‖²_T` on the default grid for this signal.
    pub fn norm_sq(&self, window: f64) -> f64 {
        let n = default_grid_points(self.sparsity(), self.bandlimit, window);
        function_norm_sq(|t| self.eval(t), window, n)
    }
}

/// Convenience for `SparseSignal::eval`.
pub fn eval_sparse(signal: &SparseSignal, t: f64) -> Complex64 {
    signal.eval(t)
}

/// Default uniform grid size for norms: `4096·max(1,k)` points, raised so
/// that the fastest beat of a band-limited signal gets ≥ 8 points per cycle.
pub fn default_grid_points(k: usize, bandlimit: f64, window: f64) -> usize {
    let base = 4096 * k.max(1);
    let beat = (16.0 * bandlimit * window).ceil() as usize + 1;
    base.max(beat)
}

pub fn uniform_grid(window: f64, points: usize) -> Vec<f64> {
    let h = window / (points - 1) as f64;
    (0..points).map(|i| i as f64 * h).collect()
}

/// Composite trapezoid estimate of `(1/T)∫₀ᵀ|f|²` from values on a uniform
/// grid covering [0, T].
pub fn t_norm_sq(values: &[Complex64], window: f64) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::invalid("t_norm_sq needs at least two grid points"));
    }
    if !(window > 0.0) {
        return Err(Error::invalid("window must be positive"));
    }
    let n = values.len();
    let inner: f64 = values[1..n - 1].iter().map(|v| v.norm_sqr()).sum();
    let ends = 0.5 * (values[0].norm_sqr() + values[n - 1].norm_sqr());
    Ok((inner + ends) / (n - 1) as f64)
}

pub fn function_norm_sq<F: Fn(f64) -> Complex64>(f: F, window: f64, points: usize) -> f64 {
    let values: Vec<Complex64> = uniform_grid(window, points).into_iter().map(f).collect();
    t_norm_sq(&values, window).expect("grid has at least two points")
}

/// Anything that can be sampled at a time point.
pub trait Sampler: Sync {
    fn sample(&self, t: f64) -> Complex64;

    /// Sample at `times`, which must be (up to rounding) equally spaced by
    /// `step`. Counts as `times.len()` queries.
    fn sample_progression(&self, times: &[f64], step: f64, out: &mut [Complex64]) {
        let _ = step;
        for (o, &t) in out.iter_mut().zip(times) {
            *o = self.sample(t);
        }
    }
}

impl Sampler for SparseSignal {
    fn sample(&self, t: f64) -> Complex64 {
        self.eval(t)
    }

    fn sample_progression(&self, times: &[f64], step: f64, out: &mut [Complex64]) {
        self.eval_progression(times, step, out)
    }
}

impl<F: Fn(f64) -> Complex64 + Sync> Sampler for F {
    fn sample(&self, t: f64) -> Complex64 {
        self(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    None,
    FixedTones,
    HashedGaussian,
}

/// Additive noise model. `level` is the target `‖g‖_T / ‖x*‖_T`; `tones`
/// is the number of random tones used by the fixed-tones kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    #[serde(default)]
    pub level: f64,
    #[serde(default = "default_noise_tones")]
    pub tones: usize,
}

fn default_noise_tones() -> usize {
    4
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self { kind: NoiseKind::None, level: 0.0, tones: default_noise_tones() }
    }

    pub fn fixed_tones(level: f64) -> Self {
        Self { kind: NoiseKind::FixedTones, level, tones: default_noise_tones() }
    }

    pub fn hashed_gaussian(level: f64) -> Self {
        Self { kind: NoiseKind::HashedGaussian, level, tones: default_noise_tones() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.level >= 0.0) || !self.level.is_finite() {
            return Err(Error::invalid(format!("noise level {} must be finite and nonnegative", self.level)));
        }
        if self.kind == NoiseKind::FixedTones && self.level > 0.0 && self.tones == 0 {
            return Err(Error::invalid("fixed-tones noise needs at least one tone"));
        }
        Ok(())
    }
}

/// A realized noise function `g`.
#[derive(Debug, Clone)]
pub enum Noise {
    Silent,
    Tones(SparseSignal),
    /// Complex Gaussian with `E|g(t)|² = std²`, keyed on the bits of `t`.
    HashedGaussian { key: u64, std: f64 },
}

impl Noise {
    pub fn build(xstar: &SparseSignal, spec: &NoiseSpec, window: f64, seed: u64) -> Result<Self> {
        spec.validate()?;
        if spec.kind == NoiseKind::None || spec.level == 0.0 {
            return Ok(Noise::Silent);
        }
        if xstar.is_empty() {
            return Err(Error::invalid("cannot calibrate a relative noise level against an empty signal"));
        }
        let signal_norm = xstar.norm_sq(window).sqrt();
        if signal_norm == 0.0 {
            return Err(Error::invalid("cannot calibrate a relative noise level against a zero-energy signal"));
        }
        let target = spec.level * signal_norm;
        match spec.kind {
            NoiseKind::None => Ok(Noise::Silent),
            NoiseKind::FixedTones => {
                let mut rng = rng::child(seed, 0x6E6F_6973);
                let band = xstar.bandlimit();
                let tones: Vec<Tone> = (0..spec.tones)
                    .map(|_| {
                        let f = rng.random_range(-band..=band);
                        let mag: f64 = rng.random_range(0.5..1.0);
                        let ph: f64 = rng.random_range(0.0..TAU);
                        Tone::new(f, Complex64::from_polar(mag, ph))
                    })
                    .collect();
                let raw = SparseSignal::new(tones, band)?;
                let grid = default_grid_points(xstar.sparsity() + raw.sparsity(), band, window);
                let raw_norm = function_norm_sq(|t| raw.eval(t), window, grid).sqrt();
                if raw_norm == 0.0 {
                    return Err(Error::Numeric("random noise tones cancelled exactly".into()));
                }
                Ok(Noise::Tones(raw.scaled(target / raw_norm)))
            }
            NoiseKind::HashedGaussian => Ok(Noise::HashedGaussian { key: mix64(seed ^ 0x6761_7573), std: target }),
        }
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        match self {
            Noise::Silent => Complex64::new(0.0, 0.0),
            Noise::Tones(s) => s.eval(t),
            Noise::HashedGaussian { key, std } => {
                let h1 = mix64(key ^ t.to_bits());
                let h2 = mix64(h1 ^ 0xA5A5_A5A5_A5A5_A5A5);
                let radius = (-2.0 * unit_open(h1).ln()).sqrt();
                let angle = TAU * unit_open(h2);
                Complex64::from_polar(radius * std / 2f64.sqrt(), angle)
            }
        }
    }

    pub fn as_tones(&self) -> Option<&SparseSignal> {
        match self {
            Noise::Tones(s) => Some(s),
            _ => None,
        }
    }
}

/// Query-counted access to `x = x* + g`.
#[derive(Debug)]
pub struct SampleOracle {
    signal: SparseSignal,
    noise: Noise,
    window: f64,
    seed: u64,
    queries: AtomicU64,
}

impl SampleOracle {
    pub fn new(signal: SparseSignal, noise: Noise, window: f64, seed: u64) -> Result<Self> {
        if !(window > 0.0) || !window.is_finite() {
            return Err(Error::invalid(format!("window {window} must be positive")));
        }
        Ok(Self { signal, noise, window, seed, queries: AtomicU64::new(0) })
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn bandlimit(&self) -> f64 {
        self.signal.bandlimit()
    }

    /// The realized noise; for the harness's ground-truth split only.
    pub fn noise(&self) -> &Noise {
        &self.noise
    }

    pub fn query(&self, t: f64) -> Complex64 {
        self.queries.fetch_add(1, Ordering::Relaxed);
        self.signal.eval(t) + self.noise.eval(t)
    }

    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }
}

impl Sampler for SampleOracle {
    fn sample(&self, t: f64) -> Complex64 {
        self.query(t)
    }

    fn sample_progression(&self, times: &[f64], step: f64, out: &mut [Complex64]) {
        self.queries.fetch_add(times.len() as u64, Ordering::Relaxed);
        self.signal.eval_progression(times, step, out);
        match &self.noise {
            Noise::Silent => {}
            Noise::Tones(g) => {
                let mut extra = vec![Complex64::new(0.0, 0.0); out.len()];
                g.eval_progression(times, step, &mut extra);
                out.iter_mut().zip(extra).for_each(|(o, e)| *o += e);
            }
            noise => out.iter_mut().zip(times).for_each(|(o, &t)| *o += noise.eval(t)),
        }
    }
}

/// Build the oracle for `x* + g` with `g` drawn from `noise`.
pub fn make_oracle(xstar: SparseSignal, noise: &NoiseSpec, window: f64, seed: u64) -> Result<SampleOracle> {
    if !(window > 0.0) {
        return Err(Error::invalid(format!("window {window} must be positive")));
    }
    let g = Noise::build(&xstar, noise, window, seed)?;
    SampleOracle::new(xstar, g, window, seed)
}

/// Per-caller query counter layered over a shared sampler, so concurrent
/// runs on one oracle can each report their own counts.
pub struct CountingSampler<'a, S: Sampler + ?Sized> {
    inner: &'a S,
    queries: AtomicU64,
}

impl<'a, S: Sampler + ?Sized> CountingSampler<'a, S> {
    pub fn new(inner: &'a S) -> Self {
        Self { inner, queries: AtomicU64::new(0) }
    }

    pub fn queries(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }
}

impl<S: Sampler + ?Sized> Sampler for CountingSampler<'_, S> {
    fn sample(&self, t: f64) -> Complex64 {
        self.queries.fetch_add(1, Ordering::Relaxed);
        self.inner.sample(t)
    }

    fn sample_progression(&self, times: &[f64], step: f64, out: &mut [Complex64]) {
        self.queries.fetch_add(times.len() as u64, Ordering::Relaxed);
        self.inner.sample_progression(times, step, out)
    }
}

/// Random tones with unit-scale magnitudes and uniform phases.
pub fn random_coefficient<R: Rng + ?Sized>(rng: &mut R, min_mag: f64, max_mag: f64) -> Complex64 {
    let mag = if max_mag > min_mag { rng.random_range(min_mag..max_mag) } else { min_mag };
    Complex64::from_polar(mag, rng.random_range(0.0..2.0 * PI))
}
