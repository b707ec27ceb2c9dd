use clap::{Parser, ValueEnum};
use fourier_interp::harness::{
    prepare_output_dir, run_experiment, scaling_sweep, write_report, write_sweep, ExperimentConfig, Stage,
};
use fourier_interp::plot::{plot_errors, plot_queries, plot_sweep};
use fourier_interp::Error;
use std::path::PathBuf;
use std::process::ExitCode;

/// Recover a Fourier-sparse signal from noisy samples over seeded trials.
#[derive(Debug, Parser)]
#[command(name = "recover", version)]
struct Args {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the experiment seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of trials.
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory (default: `out` in the config, else `./out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Stop after frequency estimation or run the whole pipeline.
    #[arg(long, value_enum)]
    stage: Option<StageArg>,
    /// Sweep over sparsities, e.g. `k=2,4,8,16`.
    #[arg(long, value_parser = parse_sweep)]
    sweep: Option<SweepList>,
    /// Write SVG figures next to the reports.
    #[arg(long)]
    emit_plots: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StageArg {
    Freq,
    Full,
}

/// Sparsities given as `k=2,4,8`.
#[derive(Debug, Clone, PartialEq)]
struct SweepList(Vec<usize>);

fn parse_sweep(s: &str) -> Result<SweepList, String> {
    let list = s.strip_prefix("k=").ok_or_else(|| format!("expected k=<list>, got {s}"))?;
    list.split(',')
        .map(|v| v.trim().parse::<usize>().map_err(|e| format!("bad k value {v:?}: {e}")))
        .collect::<Result<_, _>>()
        .map(SweepList)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidInput(_) | Error::Serde(_) => 2,
        Error::Numeric(_) | Error::Conversion(_) => 3,
        Error::Io { .. } | Error::Csv(_) => 1,
    }
}

fn run(args: Args) -> Result<(), Error> {
    // an unreadable config is a config error, not an output failure
    let mut cfg = ExperimentConfig::load(&args.config).map_err(|e| match e {
        Error::Io { .. } => Error::Config(e.to_string()),
        e => e,
    })?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(stage) = args.stage {
        cfg.stage = match stage {
            StageArg::Freq => Stage::Freq,
            StageArg::Full => Stage::Full,
        };
    }
    let out = args.out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    cfg.out = None;
    cfg.validate()?;
    prepare_output_dir(&out)?;
    match args.sweep {
        Some(SweepList(ks)) => {
            let (table, reports) = scaling_sweep(&cfg, &ks)?;
            write_sweep(&out, &table)?;
            for report in &reports {
                let dir = out.join(format!("k{}", report.config.instance.k));
                prepare_output_dir(&dir)?;
                write_report(&dir, report)?;
            }
            if args.emit_plots {
                plot_sweep(&out.join("sweep.svg"), &table)?;
            }
            for r in &table.rows {
                println!(
                    "k={:<4} frequency={:.0} signal={:.0} total={:.0}",
                    r.k, r.frequency_queries, r.signal_queries, r.total_queries
                );
            }
            let show = |s: Option<f64>| s.map_or("n/a".to_string(), |v| format!("{v:.3}"));
            println!(
                "slopes: frequency={} signal={} total={}",
                show(table.slopes.frequency),
                show(table.slopes.signal),
                show(table.slopes.total)
            );
        }
        None => {
            let report = run_experiment(&cfg)?;
            write_report(&out, &report)?;
            if args.emit_plots && !report.trials.is_empty() {
                plot_errors(&out.join("errors.svg"), &report)?;
                plot_queries(&out.join("queries.svg"), &report)?;
            }
            println!("{} trials written to {}", report.trials.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Ok(v) = std::env::var("RECOVER_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("error: thread pool: {e}");
                    return ExitCode::from(2);
                }
            }
            _ => {
                eprintln!("error: RECOVER_THREADS must be a positive integer, got {v:?}");
                return ExitCode::from(2);
            }
        }
    }
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
