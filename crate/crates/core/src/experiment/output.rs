//! CSV and SVG output.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use plotters::prelude::*;

use super::{summarize, ResultRow, SummaryRow};
use crate::error::{Error, Result};

fn unwritable(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::OutputUnwritable(format!("{}: {e}", path.display()))
}

/// Writes to a sibling temporary file, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut file = fs::File::create(&tmp).map_err(|e| unwritable(path, e))?;
    file.write_all(bytes).map_err(|e| unwritable(path, e))?;
    file.sync_all().map_err(|e| unwritable(path, e))?;
    fs::rename(&tmp, path).map_err(|e| unwritable(path, e))
}

fn to_csv<T: serde::Serialize>(items: &[T], header: &[&str]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let internal = |e: csv::Error| Error::OutputUnwritable(e.to_string());
    w.write_record(header).map_err(internal)?;
    for item in items {
        w.serialize(item).map_err(internal)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::OutputUnwritable(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub const RESULT_COLUMNS: [&str; 14] = [
    "run_id",
    "algorithm",
    "delta",
    "K",
    "gamma",
    "eta",
    "seed",
    "iteration",
    "simulated_time",
    "loss",
    "best_loss",
    "grad_est_norm",
    "clarke_min_norm",
    "diverged",
];

const SUMMARY_COLUMNS: [&str; 9] = [
    "algorithm",
    "delta",
    "K",
    "eta",
    "gamma",
    "seeds",
    "mean_best_loss",
    "mean_final_loss",
    "diverged_runs",
];

/// Header plus one line per row, even when `rows` is empty.
pub fn rows_to_csv(rows: &[ResultRow]) -> Result<String> {
    to_csv(rows, &RESULT_COLUMNS)
}

pub fn summary_to_csv(summary: &[SummaryRow]) -> Result<String> {
    to_csv(summary, &SUMMARY_COLUMNS)
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::ConfigParse(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .map(|row| row.map_err(|e| Error::ConfigParse(format!("{}: {e}", path.display()))))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotAxis {
    Iterations,
    SimulatedTime,
}

impl PlotAxis {
    fn label(&self) -> &'static str {
        match self {
            PlotAxis::Iterations => "iteration",
            PlotAxis::SimulatedTime => "simulated time",
        }
    }

    fn file_stem(&self) -> &'static str {
        match self {
            PlotAxis::Iterations => "loss_vs_iteration",
            PlotAxis::SimulatedTime => "loss_vs_time",
        }
    }
}

impl FromStr for PlotAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iterations" | "iteration" => Ok(PlotAxis::Iterations),
            "simulated_time" | "time" => Ok(PlotAxis::SimulatedTime),
            other => Err(Error::InvalidArgument(format!("unknown plot axis '{other}'"))),
        }
    }
}

fn x_of(r: &ResultRow, axis: PlotAxis) -> f64 {
    match axis {
        PlotAxis::Iterations => r.iteration as f64,
        PlotAxis::SimulatedTime => r.simulated_time as f64,
    }
}

/// Loss curve of each seed of one grid point, in seed order.
fn seed_curves(rows: &[&ResultRow], axis: PlotAxis) -> Vec<Vec<(f64, f64)>> {
    let mut by_seed: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.loss.is_finite()) {
        by_seed.entry(r.seed).or_default().push((x_of(r, axis), r.loss));
    }
    by_seed.into_values().collect()
}

/// Seed-mean loss curve of one grid point.
fn mean_curve(rows: &[&ResultRow], axis: PlotAxis) -> Vec<(f64, f64)> {
    let mut by_iter: BTreeMap<usize, (f64, f64, usize)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.loss.is_finite()) {
        let e = by_iter.entry(r.iteration).or_insert((x_of(r, axis), 0.0, 0));
        e.1 += r.loss;
        e.2 += 1;
    }
    by_iter.into_values().map(|(x, s, n)| (x, s / n as f64)).collect()
}

/// One SVG per depth showing each algorithm's best grid point: a faint line
/// per seed and a bold seed-mean line. Returns the written paths.
pub fn emit_plot(rows: &[ResultRow], axis: PlotAxis, dir: &Path) -> Result<Vec<PathBuf>> {
    if rows.is_empty() {
        return Err(Error::EmptyRecords);
    }
    fs::create_dir_all(dir).map_err(|e| unwritable(dir, e))?;
    let summary = summarize(rows);
    let deltas: std::collections::BTreeSet<usize> = summary.iter().map(|s| s.delta).collect();
    let mut written = Vec::new();
    for delta in deltas {
        let curves: Vec<Curves> = summary
            .iter()
            .filter(|s| s.delta == delta)
            .map(|s| {
                let matching: Vec<&ResultRow> = rows
                    .iter()
                    .filter(|r| {
                        r.algorithm == s.algorithm && r.delta == delta && r.k == s.k && r.eta == s.eta && r.gamma == s.gamma
                    })
                    .collect();
                let label = if s.algorithm == "pprs" {
                    format!("pprs K={} lr={:e} gamma={:e}", s.k, s.eta, s.gamma)
                } else {
                    format!("{} lr={:e}", s.algorithm, s.eta)
                };
                Curves {
                    label,
                    mean: mean_curve(&matching, axis),
                    seeds: seed_curves(&matching, axis),
                }
            })
            .collect();
        let path = dir.join(format!("{}_delta{delta}.svg", axis.file_stem()));
        let svg = render(&curves, axis, delta).map_err(|e| unwritable(&path, e))?;
        write_atomic(&path, svg.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

struct Curves {
    label: String,
    mean: Vec<(f64, f64)>,
    seeds: Vec<Vec<(f64, f64)>>,
}

fn render(curves: &[Curves], axis: PlotAxis, delta: usize) -> std::result::Result<String, String> {
    let points = curves.iter().flat_map(|c| c.seeds.iter().flatten());
    let (mut x_max, mut y_min, mut y_max) = (1.0f64, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in points {
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    if !y_min.is_finite() {
        (y_min, y_max) = (0.0, 1.0);
    }
    let pad = ((y_max - y_min) * 0.05).max(1e-9);
    let mut out = String::new();
    {
        let root = SVGBackend::with_string(&mut out, (900, 560)).into_drawing_area();
        let err = |e: DrawingAreaErrorKind<_>| e.to_string();
        root.fill(&WHITE).map_err(err)?;
        let mut chart = ChartBuilder::on(&root)
            .caption(format!("loss, depth {delta}"), ("sans-serif", 22))
            .margin(12)
            .x_label_area_size(40)
            .y_label_area_size(70)
            .build_cartesian_2d(0.0..x_max, (y_min - pad)..(y_max + pad))
            .map_err(err)?;
        chart
            .configure_mesh()
            .x_desc(axis.label())
            .y_desc("loss")
            .draw()
            .map_err(err)?;
        for (i, c) in curves.iter().enumerate() {
            let color = Palette99::pick(i).to_rgba();
            for seed in &c.seeds {
                chart
                    .draw_series(LineSeries::new(seed.iter().copied(), color.mix(0.25).stroke_width(1)))
                    .map_err(err)?;
            }
            chart
                .draw_series(LineSeries::new(c.mean.iter().copied(), color.stroke_width(2)))
                .map_err(err)?
                .label(c.label.clone())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.85))
            .border_style(BLACK)
            .draw()
            .map_err(err)?;
        root.present().map_err(err)?;
    }
    Ok(out)
}
