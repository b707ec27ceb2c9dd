//! Seeded Monte Carlo experiments: instance generation, recovery, metrics,
//! scaling sweeps and the JSON/CSV report files.

use crate::diagnostics::{label_bins, BinLabel, HSpectrum, LabelConfig};
use crate::error::{Error, Result};
use crate::pipeline::{Pipeline, PipelineConfig, ResolvedParams, StageQueries, StageTimes};
use crate::rng;
use crate::signal::{default_grid_points, function_norm_sq, make_oracle, random_coefficient, Noise, NoiseKind, NoiseSpec, SparseSignal, Tone};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    /// Hashing and frequency estimation only.
    Freq,
    #[default]
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapUnit {
    /// Multiples of the frequency resolution `Δ`.
    #[default]
    Resolution,
    /// Multiples of the hash scale `Δ₀`.
    HashScale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeparationMode {
    /// Pairwise gaps of at least `min_gap` units.
    #[default]
    Floor,
    /// No gap floor.
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Separation {
    pub mode: SeparationMode,
    pub min_gap: f64,
    /// All frequencies fit in a window of this many units.
    pub max_span: Option<f64>,
    pub unit: GapUnit,
}

impl Default for Separation {
    fn default() -> Self {
        Self { mode: SeparationMode::Floor, min_gap: 8.0, max_span: None, unit: GapUnit::Resolution }
    }
}

/// Tone magnitudes uniform in `[min, max]`, phases uniform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AmplitudeLaw {
    pub min: f64,
    pub max: f64,
}

impl Default for AmplitudeLaw {
    fn default() -> Self {
        Self { min: 1.0, max: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceSpec {
    pub k: usize,
    pub bandlimit: f64,
    pub window: f64,
    #[serde(default)]
    pub separation: Separation,
    #[serde(default)]
    pub amplitude: AmplitudeLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub instance: InstanceSpec,
    #[serde(default = "NoiseSpec::none")]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub stage: Stage,
    /// When set, every trial carries diagnostic bin labels.
    #[serde(default)]
    pub labels: Option<LabelConfig>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!("unsupported schema_version {}", self.schema_version)));
        }
        let i = &self.instance;
        if i.k == 0 || !(i.bandlimit > 0.0) || !(i.window > 0.0) {
            return Err(Error::Config("instance needs k ≥ 1 and positive bandlimit and window".into()));
        }
        let a = i.amplitude;
        if !(a.min > 0.0) || a.max < a.min {
            return Err(Error::Config("amplitude law needs 0 < min ≤ max".into()));
        }
        if !(i.separation.min_gap >= 0.0) || i.separation.max_span.is_some_and(|s| !(s > 0.0)) {
            return Err(Error::Config("separation needs min_gap ≥ 0 and a positive max_span".into()));
        }
        self.noise.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.pipeline_config().validate()
    }

    /// The pipeline settings with `k`, `F`, `T` and the seed taken from the
    /// instance and the experiment.
    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            k: self.instance.k,
            bandlimit: self.instance.bandlimit,
            window: self.instance.window,
            seed: self.seed,
            ..self.pipeline.clone()
        }
    }

    pub fn with_k(&self, k: usize) -> Self {
        let mut out = self.clone();
        out.instance.k = k;
        out
    }
}

/// Draw `x*` under the instance spec; `unit` is the gap unit in Hz.
pub fn generate_instance<R: Rng + ?Sized>(spec: &InstanceSpec, unit: f64, rng: &mut R) -> Result<SparseSignal> {
    const ATTEMPTS: usize = 10_000;
    let sep = spec.separation;
    let min_gap = match sep.mode {
        SeparationMode::Floor => sep.min_gap * unit,
        SeparationMode::Hard => 0.0,
    };
    let band = spec.bandlimit;
    for _ in 0..ATTEMPTS {
        let (lo, hi) = match sep.max_span {
            Some(span) if span * unit < 2.0 * band => {
                let width = span * unit;
                let lo = rng.random_range(-band..=band - width);
                (lo, lo + width)
            }
            _ => (-band, band),
        };
        let mut freqs: Vec<f64> = Vec::with_capacity(spec.k);
        for _ in 0..ATTEMPTS {
            if freqs.len() == spec.k {
                break;
            }
            let f = rng.random_range(lo..=hi);
            if freqs.iter().all(|&g| (f - g).abs() >= min_gap) {
                freqs.push(f);
            }
        }
        if freqs.len() == spec.k {
            let tones = freqs
                .into_iter()
                .map(|f| Tone::new(f, random_coefficient(rng, spec.amplitude.min, spec.amplitude.max)))
                .collect();
            return SparseSignal::new(tones, band);
        }
    }
    Err(Error::Config(format!(
        "cannot place {} tones in [-{band}, {band}] with gaps ≥ {min_gap}",
        spec.k
    )))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub k: usize,
    pub queries: StageQueries,
    /// `‖y − x*‖_T` (full stage).
    pub error: Option<f64>,
    /// `‖y − x*‖_T / ‖x*‖_T` (full stage).
    pub relative_error: Option<f64>,
    pub signal_norm: f64,
    pub noise_norm: f64,
    /// Largest distance from a true tone to the nearest estimate.
    pub freq_max_error: Option<f64>,
    /// Distance from each true tone to the nearest estimate.
    pub freq_errors: Vec<Option<f64>>,
    pub output_sparsity: usize,
    pub labels: Vec<BinLabel>,
    #[serde(skip)]
    pub wall: StageTimes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub params: Option<ResolvedParams>,
    pub trials: Vec<TrialRecord>,
}

fn nearest(freqs: &[f64], f: f64) -> Option<f64> {
    freqs.iter().map(|g| (g - f).abs()).min_by(f64::total_cmp)
}

/// Noise realization as tones, when it has that form.
fn noise_tones(noise: &Noise, bandlimit: f64) -> Option<SparseSignal> {
    match noise {
        Noise::Silent => Some(SparseSignal::zero(bandlimit)),
        Noise::Tones(g) => Some(g.clone()),
        Noise::HashedGaussian { .. } => None,
    }
}

/// One seeded trial against a prepared pipeline.
pub fn run_trial(cfg: &ExperimentConfig, pipeline: &Pipeline, spectrum: Option<&HSpectrum>, trial: usize) -> Result<TrialRecord> {
    let seed = rng::derive_seed(cfg.seed, trial as u64);
    let spec = &cfg.instance;
    let window = spec.window;
    let unit = match spec.separation.unit {
        GapUnit::Resolution => pipeline.params.resolution,
        GapUnit::HashScale => pipeline.params.hash_scale,
    };
    let xstar = generate_instance(spec, unit, &mut rng::child(seed, 0))?;
    let oracle = make_oracle(xstar.clone(), &cfg.noise, window, rng::derive_seed(seed, 1))?;
    let noise = noise_tones(oracle.noise(), spec.bandlimit);
    let signal_norm = xstar.norm_sq(window).sqrt();
    let noise_norm = match (&noise, cfg.noise.kind) {
        (Some(g), _) => if g.is_empty() { 0.0 } else { g.norm_sq(window).sqrt() },
        (None, NoiseKind::HashedGaussian) => cfg.noise.level * signal_norm,
        (None, _) => 0.0,
    };
    let run_seed = rng::derive_seed(seed, 2);
    let truth: Vec<f64> = xstar.tones().iter().map(|t| t.freq).collect();
    let (queries, wall, estimates, hash, output) = match cfg.stage {
        Stage::Freq => {
            let run = pipeline.frequency_stage(&oracle, run_seed)?;
            let q = StageQueries { frequency: run.queries, signal: 0, total: run.queries };
            let w = StageTimes { frequency: run.seconds, ..StageTimes::default() };
            (q, w, run.frequencies.freqs(), run.hash, None)
        }
        Stage::Full => {
            let report = pipeline.high_prob_interpolate(&oracle, run_seed)?;
            let run = &report.runs[report.chosen];
            let est = run.frequencies.iter().map(|e| e.freq).collect();
            (report.queries, report.wall, est, run.hash, Some(report.output))
        }
    };
    let freq_errors: Vec<Option<f64>> = truth.iter().map(|&f| nearest(&estimates, f)).collect();
    let freq_max_error = freq_errors.iter().try_fold(0.0f64, |acc, e| e.map(|e| acc.max(e)));
    let (error, relative_error, output_sparsity) = match &output {
        Some(y) => {
            let grid = default_grid_points(xstar.sparsity() + y.sparsity(), spec.bandlimit.max(y.bandlimit()), window);
            let err = function_norm_sq(|t| y.eval(t) - xstar.eval(t), window, grid).sqrt();
            (Some(err), Some(if signal_norm > 0.0 { err / signal_norm } else { err }), y.sparsity())
        }
        None => (None, None, 0),
    };
    let labels = match (&cfg.labels, &noise, spectrum) {
        (Some(lc), Some(g), Some(sp)) => label_bins(&xstar, g, &pipeline.h, sp, &pipeline.g, &hash, lc),
        _ => Vec::new(),
    };
    Ok(TrialRecord {
        trial,
        seed,
        k: spec.k,
        queries,
        error,
        relative_error,
        signal_norm,
        noise_norm,
        freq_max_error,
        freq_errors,
        output_sparsity,
        labels,
        wall,
    })
}

/// Run every trial; records come back in trial order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut cfg = cfg.clone();
    cfg.pipeline = cfg.pipeline_config();
    let cfg = &cfg;
    if cfg.trials == 0 {
        return Ok(ExperimentReport { schema_version: SCHEMA_VERSION, config: cfg.clone(), params: None, trials: vec![] });
    }
    let pipeline = Pipeline::new(cfg.pipeline_config())?;
    let spectrum = cfg.labels.map(|_| HSpectrum::new(&pipeline.h));
    let trials = (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, &pipeline, spectrum.as_ref(), i))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport { schema_version: SCHEMA_VERSION, config: cfg.clone(), params: Some(pipeline.params.clone()), trials })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRow {
    pub k: usize,
    pub trials: usize,
    pub frequency_queries: f64,
    pub signal_queries: f64,
    pub total_queries: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSlopes {
    pub frequency: Option<f64>,
    pub signal: Option<f64>,
    pub total: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepTable {
    pub schema_version: u32,
    pub rows: Vec<SweepRow>,
    pub slopes: SweepSlopes,
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Least-squares slope of `ln y` against `ln x`; `None` with fewer than two
/// positive points.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Per-`k` median query counts and log-log slopes.
pub fn scaling_sweep(base: &ExperimentConfig, ks: &[usize]) -> Result<(SweepTable, Vec<ExperimentReport>)> {
    if ks.is_empty() || ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("sweep needs a nonempty ascending list of k".into()));
    }
    let mut rows = Vec::with_capacity(ks.len());
    let mut reports = Vec::with_capacity(ks.len());
    for &k in ks {
        let report = run_experiment(&base.with_k(k))?;
        let pick = |f: fn(&StageQueries) -> u64| {
            let mut v: Vec<f64> = report.trials.iter().map(|t| f(&t.queries) as f64).collect();
            median(&mut v)
        };
        rows.push(SweepRow {
            k,
            trials: report.trials.len(),
            frequency_queries: pick(|q| q.frequency),
            signal_queries: pick(|q| q.signal),
            total_queries: pick(|q| q.total),
        });
        reports.push(report);
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.k as f64).collect();
    let col = |f: fn(&SweepRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let slopes = SweepSlopes {
        frequency: loglog_slope(&xs, &col(|r| r.frequency_queries)),
        signal: loglog_slope(&xs, &col(|r| r.signal_queries)),
        total: loglog_slope(&xs, &col(|r| r.total_queries)),
    };
    Ok((SweepTable { schema_version: SCHEMA_VERSION, rows, slopes }, reports))
}

pub const TRIAL_COLUMNS: [&str; 17] = [
    "schema_version",
    "trial",
    "seed",
    "k",
    "queries_frequency",
    "queries_signal",
    "queries_total",
    "error",
    "relative_error",
    "signal_norm",
    "noise_norm",
    "freq_max_error",
    "output_sparsity",
    "bins_labeled",
    "heavy_bins",
    "isolated_bins",
    "large_offset_bins",
];

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:e}")).unwrap_or_default()
}

pub fn trials_csv(report: &ExperimentReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRIAL_COLUMNS)?;
    for t in &report.trials {
        let count = |f: fn(&BinLabel) -> bool| t.labels.iter().filter(|l| f(l)).count().to_string();
        w.write_record([
            SCHEMA_VERSION.to_string(),
            t.trial.to_string(),
            t.seed.to_string(),
            t.k.to_string(),
            t.queries.frequency.to_string(),
            t.queries.signal.to_string(),
            t.queries.total.to_string(),
            opt(t.error),
            opt(t.relative_error),
            format!("{:e}", t.signal_norm),
            format!("{:e}", t.noise_norm),
            opt(t.freq_max_error),
            t.output_sparsity.to_string(),
            t.labels.len().to_string(),
            count(|l| l.heavy),
            count(|l| l.well_isolated),
            count(|l| l.large_offset),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Numeric(e.to_string()))
}

pub fn timings_csv(report: &ExperimentReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["trial", "frequency_s", "signal_s", "conversion_s", "merge_s", "total_s"])?;
    for t in &report.trials {
        let s = t.wall;
        w.write_record([
            t.trial.to_string(),
            format!("{:.6}", s.frequency),
            format!("{:.6}", s.signal),
            format!("{:.6}", s.conversion),
            format!("{:.6}", s.merge),
            format!("{:.6}", s.total()),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Numeric(e.to_string()))
}

pub fn sweep_csv(table: &SweepTable) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["schema_version", "k", "trials", "frequency_queries", "signal_queries", "total_queries"])?;
    for r in &table.rows {
        w.write_record([
            SCHEMA_VERSION.to_string(),
            r.k.to_string(),
            r.trials.to_string(),
            r.frequency_queries.to_string(),
            r.signal_queries.to_string(),
            r.total_queries.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Numeric(e.to_string()))
}

/// Create `dir` and check it accepts files.
pub fn prepare_output_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
    fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

fn write(path: PathBuf, bytes: &[u8]) -> Result<()> {
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
}

/// `report.json`, `trials.csv` and `timings.csv`.
pub fn write_report(dir: &Path, report: &ExperimentReport) -> Result<()> {
    let mut json = serde_json::to_vec_pretty(report)?;
    json.push(b'\n');
    write(dir.join("report.json"), &json)?;
    write(dir.join("trials.csv"), &trials_csv(report)?)?;
    write(dir.join("timings.csv"), &timings_csv(report)?)
}

/// `sweep.json` and `sweep.csv`.
pub fn write_sweep(dir: &Path, table: &SweepTable) -> Result<()> {
    let mut json = serde_json::to_vec_pretty(table)?;
    json.push(b'\n');
    write(dir.join("sweep.json"), &json)?;
    write(dir.join("sweep.csv"), &sweep_csv(table)?)
}
