//! Static SVG figures drawn from report data.

use crate::error::{Error, Result};
use crate::harness::{ExperimentReport, SweepTable};
use plotters::prelude::*;
use std::path::Path;

fn draw_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Numeric(format!("plot: {e}"))
}

fn bounds(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi > lo {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn scatter(path: &Path, title: &str, y_label: &str, points: &[(f64, f64)]) -> Result<()> {
    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (x0, x1) = bounds(&xs);
    let (y0, y1) = bounds(&ys);
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(draw_err)?;
    chart.configure_mesh().x_desc("trial").y_desc(y_label).draw().map_err(draw_err)?;
    chart
        .draw_series(points.iter().map(|&(x, y)| Circle::new((x, y), 3, BLUE.filled())))
        .map_err(draw_err)?;
    root.present().map_err(draw_err)
}

/// Per-trial relative error (full stage) or worst frequency error (freq stage).
pub fn plot_errors(path: &Path, report: &ExperimentReport) -> Result<()> {
    let rel: Vec<(f64, f64)> =
        report.trials.iter().filter_map(|t| t.relative_error.map(|e| (t.trial as f64, e))).collect();
    if !rel.is_empty() {
        return scatter(path, "Recovery error", "‖y − x*‖_T / ‖x*‖_T", &rel);
    }
    let freq: Vec<(f64, f64)> =
        report.trials.iter().filter_map(|t| t.freq_max_error.map(|e| (t.trial as f64, e))).collect();
    scatter(path, "Frequency error", "max |f̂ − f| (Hz)", &freq)
}

/// Per-trial total oracle queries.
pub fn plot_queries(path: &Path, report: &ExperimentReport) -> Result<()> {
    let pts: Vec<(f64, f64)> = report.trials.iter().map(|t| (t.trial as f64, t.queries.total as f64)).collect();
    scatter(path, "Oracle queries", "queries", &pts)
}

type Series = (&'static str, RGBColor, Vec<(f64, f64)>);

/// Median queries per stage against `k` on log-log axes.
pub fn plot_sweep(path: &Path, table: &SweepTable) -> Result<()> {
    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let series: [Series; 3] = [
        ("frequency", BLUE, table.rows.iter().map(|r| (r.k as f64, r.frequency_queries)).collect()),
        ("signal", RED, table.rows.iter().map(|r| (r.k as f64, r.signal_queries)).collect()),
        ("total", BLACK, table.rows.iter().map(|r| (r.k as f64, r.total_queries)).collect()),
    ];
    let ks: Vec<f64> = table.rows.iter().map(|r| r.k as f64).collect();
    let qs: Vec<f64> = series.iter().flat_map(|s| s.2.iter().map(|p| p.1)).filter(|&q| q > 0.0).collect();
    let kmin = ks.iter().copied().fold(f64::INFINITY, f64::min).max(1.0);
    let kmax = ks.iter().copied().fold(1.0, f64::max);
    let qmin = qs.iter().copied().fold(f64::INFINITY, f64::min).clamp(1.0, 1.0e300);
    let qmax = qs.iter().copied().fold(1.0, f64::max);
    let mut chart = ChartBuilder::on(&root)
        .caption("Queries against k", ("sans-serif", 22))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(80)
        .build_cartesian_2d((kmin * 0.8..kmax * 1.25).log_scale(), (qmin * 0.5..qmax * 2.0).log_scale())
        .map_err(draw_err)?;
    chart.configure_mesh().x_desc("k").y_desc("median queries").draw().map_err(draw_err)?;
    for (name, color, pts) in series {
        let pts: Vec<(f64, f64)> = pts.into_iter().filter(|p| p.1 > 0.0).collect();
        if pts.is_empty() {
            continue;
        }
        chart
            .draw_series(LineSeries::new(pts.clone(), color.stroke_width(2)))
            .map_err(draw_err)?
            .label(name)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
        chart.draw_series(pts.into_iter().map(|p| Circle::new(p, 4, color.filled()))).map_err(draw_err)?;
    }
    chart.configure_series_labels().border_style(BLACK).background_style(WHITE).draw().map_err(draw_err)?;
    root.present().map_err(draw_err)
}
