//! End-to-end recovery: one hashed constant-probability run, the
//! min-of-median merge, and the boosted wrapper.

use crate::error::{Error, Result};
use crate::filters::{next_pow2, FilterG, FilterH, GKnobs, HKnobs};
use crate::freq_est::{frequency_estimation_x, BinFrequency, FrequencyList, SearchConfig};
use crate::hashing::{draw_hash_params, BinHasher, HashParams, SigmaRange};
use crate::rng;
use crate::signal::{CountingSampler, Sampler, SparseSignal};
use crate::signal_est::{poly_to_fourier, signal_estimation, weighted_sketch, FitSettings};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MergeConfig {
    /// Constant in the sketch size `⌈c·K·log₂K·ln(R_p²/ρ)⌉`.
    pub c_sketch: f64,
    /// Sparsity bound `K`; `None` uses twice the largest candidate sparsity.
    pub sparsity: Option<usize>,
}

impl Default for MergeConfig {
    fn default() -> Self {
        Self { c_sketch: 1.0, sparsity: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub k: usize,
    /// Band limit `F`.
    pub bandlimit: f64,
    /// Observation window `T`.
    pub window: f64,
    pub delta: f64,
    /// Defaults to `δ/k`.
    pub delta1: Option<f64>,
    pub rho: f64,
    /// Defaults to `next_pow2(c_bins·k)`.
    pub bins: Option<u64>,
    pub c_bins: f64,
    /// Frequency resolution `Δ`; defaults to `k·Δ_h`.
    pub resolution: Option<f64>,
    /// Hash scale `Δ₀` used to draw `σ`; defaults to the resolution.
    pub hash_scale: Option<f64>,
    pub sigma_range: SigmaRange,
    pub h: HKnobs,
    pub g: GKnobs,
    pub search: SearchConfig,
    /// First-level significant samples; defaults to `⌈c_samples·k·log₂(2k)⌉`.
    pub samples: Option<usize>,
    pub c_samples: f64,
    /// Polynomial degree; defaults to `min(64, ⌈TΔ⌉ + 4k)`.
    pub degree: Option<usize>,
    /// Constant in the set-query sketch size.
    pub c_sketch: f64,
    /// Relative singular-value cutoff of the set-query solve.
    pub rcond: f64,
    /// Relative tolerance for the polynomial-to-tones conversion.
    pub poly_eps: f64,
    pub merge: MergeConfig,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k: 1,
            bandlimit: 100.0,
            window: 1.0,
            delta: 0.01,
            delta1: None,
            rho: 0.05,
            bins: None,
            c_bins: 4.0,
            resolution: None,
            hash_scale: None,
            sigma_range: SigmaRange::Standard,
            h: HKnobs::default(),
            g: GKnobs::default(),
            search: SearchConfig::default(),
            samples: None,
            c_samples: 8.0,
            degree: None,
            c_sketch: 2.0,
            rcond: 1e-4,
            poly_eps: 1e-4,
            merge: MergeConfig::default(),
            seed: 0,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} = {v} must be positive and finite")))
    }
}

impl PipelineConfig {
    pub fn delta1(&self) -> f64 {
        self.delta1.unwrap_or(self.delta / self.k.max(1) as f64)
    }

    pub fn runs(&self) -> usize {
        ((1.0 / self.rho).log2().ceil() as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        positive("bandlimit", self.bandlimit)?;
        positive("window", self.window)?;
        positive("delta", self.delta)?;
        positive("c_bins", self.c_bins)?;
        positive("c_samples", self.c_samples)?;
        positive("c_sketch", self.c_sketch)?;
        positive("poly_eps", self.poly_eps)?;
        if !(self.rcond > 0.0 && self.rcond < 1.0) {
            return Err(Error::Config(format!("rcond = {} must lie in (0, 1)", self.rcond)));
        }
        positive("merge.c_sketch", self.merge.c_sketch)?;
        if self.delta >= 1.0 {
            return Err(Error::Config(format!("delta = {} must be below 1", self.delta)));
        }
        let d1 = self.delta1();
        positive("delta1", d1)?;
        if d1 > self.delta / self.k as f64 * (1.0 + 1e-12) {
            return Err(Error::Config(format!("delta1 = {d1} exceeds delta/k = {}", self.delta / self.k as f64)));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::Config(format!("rho = {} must lie in (0, 1)", self.rho)));
        }
        if let Some(b) = self.bins {
            if b < 2 || !b.is_power_of_two() {
                return Err(Error::Config(format!("bins = {b} must be a power of two ≥ 2")));
            }
        }
        if let Some(r) = self.resolution {
            positive("resolution", r)?;
        }
        if let Some(r) = self.hash_scale {
            positive("hash_scale", r)?;
        }
        if self.samples == Some(0) {
            return Err(Error::Config("samples must be at least 1".into()));
        }
        self.search.validate()
    }
}

/// Values derived from a config once the filters exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParams {
    pub k: usize,
    pub bins: u64,
    pub l: u32,
    pub taps: usize,
    pub delta1: f64,
    pub dh: f64,
    pub resolution: f64,
    pub hash_scale: f64,
    pub levels: usize,
    pub samples: usize,
    pub degree: usize,
    pub runs: usize,
}

/// Filters and derived parameters shared by every run of one config.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub cfg: PipelineConfig,
    pub h: FilterH,
    pub g: FilterG,
    pub params: ResolvedParams,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageQueries {
    pub frequency: u64,
    pub signal: u64,
    pub total: u64,
}

impl StageQueries {
    fn add(&mut self, other: &StageQueries) {
        self.frequency += other.frequency;
        self.signal += other.signal;
        self.total += other.total;
    }
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    pub frequency: f64,
    pub signal: f64,
    pub conversion: f64,
    pub merge: f64,
}

impl StageTimes {
    fn add(&mut self, other: &StageTimes) {
        self.frequency += other.frequency;
        self.signal += other.signal;
        self.conversion += other.conversion;
        self.merge += other.merge;
    }

    pub fn total(&self) -> f64 {
        self.frequency + self.signal + self.conversion + self.merge
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyRun {
    pub hash: HashParams,
    pub frequencies: FrequencyList,
    pub queries: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub hash: HashParams,
    pub frequencies: FrequencyList,
    pub signal: SparseSignal,
    pub queries: StageQueries,
    pub wall: StageTimes,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let k = cfg.k;
        let delta1 = cfg.delta1();
        let h = FilterH::build(k, delta1, cfg.window, cfg.h)?;
        let bins = cfg.bins.unwrap_or_else(|| next_pow2(cfg.c_bins * k as f64).max(2));
        let g = FilterG::build(k, cfg.delta, bins, cfg.g)?;
        let resolution = cfg.resolution.unwrap_or(k as f64 * h.dh);
        let hash_scale = cfg.hash_scale.unwrap_or(resolution);
        let kf = k as f64;
        let samples = cfg.samples.unwrap_or_else(|| (cfg.c_samples * kf * (2.0 * kf).log2()).ceil() as usize);
        let degree = cfg
            .degree
            .unwrap_or_else(|| ((cfg.window * resolution).ceil() as usize).saturating_add(4 * k).min(64));
        let params = ResolvedParams {
            k,
            bins,
            l: g.l,
            taps: g.support_points(),
            delta1,
            dh: h.dh,
            resolution,
            hash_scale,
            levels: cfg.search.levels(cfg.bandlimit, resolution),
            samples,
            degree,
            runs: cfg.runs(),
        };
        Ok(Self { cfg, h, g, params })
    }

    fn draw_hash<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<HashParams> {
        draw_hash_params(self.params.hash_scale, self.params.bins, self.cfg.bandlimit, self.cfg.sigma_range, rng)
    }

    /// Hash draw and frequency estimation only.
    pub fn frequency_stage<S: Sampler + ?Sized>(&self, x: &S, seed: u64) -> Result<FrequencyRun> {
        let mut rng = rng::child(seed, 0);
        let hash = self.draw_hash(&mut rng)?;
        self.frequencies_with(x, hash, seed)
    }

    fn frequencies_with<S: Sampler + ?Sized>(&self, x: &S, hash: HashParams, seed: u64) -> Result<FrequencyRun> {
        let start = Instant::now();
        let hasher = BinHasher::new(&self.h, &self.g, hash)?;
        let counted = CountingSampler::new(x);
        let frequencies = frequency_estimation_x(
            &counted,
            &self.h,
            &hasher,
            self.cfg.bandlimit,
            self.params.resolution,
            &self.cfg.search,
            self.params.samples,
            self.cfg.k,
            rng::derive_seed(seed, 1),
        )?;
        Ok(FrequencyRun { hash, frequencies, queries: counted.queries(), seconds: start.elapsed().as_secs_f64() })
    }

    /// One constant-probability run with its own hash and randomness.
    pub fn constant_prob_interpolate<S: Sampler + ?Sized>(&self, x: &S, seed: u64) -> Result<RunOutcome> {
        let mut rng = rng::child(seed, 0);
        let hash = self.draw_hash(&mut rng)?;
        self.run_with_hash(x, hash, seed)
    }

    /// A run with fixed hash parameters.
    pub fn run_with_hash<S: Sampler + ?Sized>(&self, x: &S, hash: HashParams, seed: u64) -> Result<RunOutcome> {
        let freq = self.frequencies_with(x, hash, seed)?;
        let mut wall = StageTimes { frequency: freq.seconds, ..StageTimes::default() };
        let mut queries = StageQueries { frequency: freq.queries, ..StageQueries::default() };
        let window = self.cfg.window;
        if freq.frequencies.is_empty() {
            queries.total = queries.frequency;
            let signal = SparseSignal::zero(self.cfg.bandlimit);
            return Ok(RunOutcome { hash, frequencies: freq.frequencies, signal, queries, wall });
        }
        let start = Instant::now();
        let counted = CountingSampler::new(x);
        let mut rng = rng::child(seed, 2);
        let settings = FitSettings {
            degree: self.params.degree,
            window,
            merge_tol: self.params.resolution,
            c_m: self.cfg.c_sketch,
            rcond: self.cfg.rcond,
        };
        let fit = signal_estimation(&counted, &freq.frequencies.freqs(), &settings, &mut rng)?;
        queries.signal = counted.queries();
        queries.total = queries.frequency + queries.signal;
        wall.signal = start.elapsed().as_secs_f64();
        let start = Instant::now();
        let scale = fit
            .coeffs
            .iter()
            .map(|c| c.iter().map(|v| v.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let signal = if scale > 0.0 {
            poly_to_fourier(&fit, self.cfg.poly_eps * scale)?
        } else {
            SparseSignal::zero(self.cfg.bandlimit)
        };
        wall.conversion = start.elapsed().as_secs_f64();
        Ok(RunOutcome { hash, frequencies: freq.frequencies, signal, queries, wall })
    }
}

/// One constant-probability run seeded from `cfg.seed`.
pub fn constant_prob_interpolate<S: Sampler + ?Sized>(x: &S, cfg: &PipelineConfig) -> Result<SparseSignal> {
    Ok(Pipeline::new(cfg.clone())?.constant_prob_interpolate(x, cfg.seed)?.signal)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeOutcome {
    pub index: usize,
    pub medians: Vec<f64>,
    pub sketch_size: usize,
}

/// Sketched squared distances `‖y_i − y_j‖²_{S,w}` for all pairs.
pub fn sketch_distances<R: Rng + ?Sized>(
    candidates: &[SparseSignal],
    window: f64,
    m: usize,
    sparsity: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let plan = weighted_sketch(m, sparsity, window, rng)?;
    let values: Vec<Vec<_>> = candidates.iter().map(|c| c.eval_many(&plan.times)).collect();
    let n = candidates.len();
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d: f64 = values[i]
                .iter()
                .zip(&values[j])
                .zip(&plan.weights)
                .map(|((a, b), w)| w * (a - b).norm_sqr())
                .sum();
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    Ok(dist)
}

/// Min-of-median selection: the candidate whose median sketched distance to
/// the others is smallest; ties go to the lowest index.
pub fn merge_signals<R: Rng + ?Sized>(
    candidates: &[SparseSignal],
    window: f64,
    cfg: &MergeConfig,
    rho: f64,
    rng: &mut R,
) -> Result<MergeOutcome> {
    let n = candidates.len();
    if n == 0 {
        return Err(Error::invalid("merge needs at least one candidate"));
    }
    if n == 1 {
        return Ok(MergeOutcome { index: 0, medians: vec![0.0], sketch_size: 0 });
    }
    let sparsity = cfg
        .sparsity
        .unwrap_or_else(|| 2 * candidates.iter().map(SparseSignal::sparsity).max().unwrap_or(0))
        .max(2);
    let kf = sparsity as f64;
    let rp = n as f64;
    let m = (cfg.c_sketch * kf * kf.log2() * (rp * rp / rho).ln()).ceil().max(1.0) as usize;
    let dist = sketch_distances(candidates, window, m, sparsity, rng)?;
    let medians: Vec<f64> = dist
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut others: Vec<f64> = row.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &d)| d).collect();
            others.sort_by(f64::total_cmp);
            others[(others.len() - 1) / 2]
        })
        .collect();
    let index = medians
        .iter()
        .enumerate()
        .fold(0, |best, (i, &m)| if m < medians[best] { i } else { best });
    Ok(MergeOutcome { index, medians, sketch_size: m })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub hash: HashParams,
    pub frequencies: Vec<BinFrequency>,
    pub sparsity: usize,
    pub queries: StageQueries,
}

/// Result of the boosted interpolator. Wall times are kept out of equality
/// and serialization so identical seeds give identical reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub output: SparseSignal,
    pub chosen: usize,
    pub medians: Vec<f64>,
    pub runs: Vec<RunSummary>,
    pub queries: StageQueries,
    pub params: ResolvedParams,
    /// `‖y − x*‖_T`, filled in by the harness.
    pub error: Option<f64>,
    /// `‖g‖_T`, filled in by the harness.
    pub noise_norm: Option<f64>,
    #[serde(skip)]
    pub wall: StageTimes,
}

impl PartialEq for RecoveryReport {
    fn eq(&self, other: &Self) -> bool {
        self.output == other.output
            && self.chosen == other.chosen
            && self.medians == other.medians
            && self.runs == other.runs
            && self.queries == other.queries
            && self.params == other.params
            && self.error == other.error
            && self.noise_norm == other.noise_norm
    }
}

impl Pipeline {
    /// `R_p` independent runs merged by min-of-median.
    pub fn high_prob_interpolate<S: Sampler + ?Sized>(&self, x: &S, seed: u64) -> Result<RecoveryReport> {
        let runs: Vec<RunOutcome> = (0..self.params.runs)
            .into_par_iter()
            .map(|r| self.constant_prob_interpolate(x, rng::derive_seed(seed, r as u64)))
            .collect::<Result<_>>()?;
        let start = Instant::now();
        let candidates: Vec<SparseSignal> = runs.iter().map(|r| r.signal.clone()).collect();
        let mut rng = rng::child(seed, u64::MAX);
        let merged = merge_signals(&candidates, self.cfg.window, &self.cfg.merge, self.cfg.rho, &mut rng)?;
        let mut wall = StageTimes { merge: start.elapsed().as_secs_f64(), ..StageTimes::default() };
        let mut queries = StageQueries::default();
        for r in &runs {
            queries.add(&r.queries);
            wall.add(&r.wall);
        }
        let summaries = runs
            .iter()
            .map(|r| RunSummary {
                hash: r.hash,
                frequencies: r.frequencies.entries.clone(),
                sparsity: r.signal.sparsity(),
                queries: r.queries,
            })
            .collect();
        Ok(RecoveryReport {
            output: candidates[merged.index].clone(),
            chosen: merged.index,
            medians: merged.medians,
            runs: summaries,
            queries,
            params: self.params.clone(),
            error: None,
            noise_norm: None,
            wall,
        })
    }
}

/// Boosted recovery seeded from `cfg.seed`.
pub fn high_prob_interpolate<S: Sampler + ?Sized>(x: &S, cfg: &PipelineConfig) -> Result<RecoveryReport> {
    Pipeline::new(cfg.clone())?.high_prob_interpolate(x, cfg.seed)
}
