//! CSV tables and plot scripts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ebm_spectral::{synthesize, ConvergenceReport, Eoc, StudyKind, Trajectory};

pub const GRID_POINTS: usize = 201;

/// Shortest decimal string that parses back to `v`.
pub fn number(v: f64) -> String {
    let mut buf = ryu::Buffer::new();
    buf.format(v).to_string()
}

fn writer(path: &Path) -> std::io::Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(BufWriter::new(File::create(
        path,
    )?)))
}

fn finish(mut w: csv::Writer<BufWriter<File>>) -> std::io::Result<()> {
    w.flush()?;
    w.into_inner()
        .map_err(|e| std::io::Error::other(e.to_string()))?
        .flush()
}

/// `t, y_0, ..., y_N`, one row per stored level.
pub fn write_solution(path: &Path, traj: &Trajectory) -> std::io::Result<()> {
    let modes = traj.levels.first().map_or(0, |c| c.len());
    let mut w = writer(path)?;
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((0..modes).map(|i| format!("y_{i}")))
        .collect();
    w.write_record(&header)?;
    for (t, c) in traj.iter() {
        let row: Vec<String> = std::iter::once(t)
            .chain(c.iter().copied())
            .map(number)
            .collect();
        w.write_record(&row)?;
    }
    finish(w)
}

/// `x, u, T` at the final level on a uniform grid of [0, 1].
pub fn write_grid(path: &Path, traj: &Trajectory) -> std::io::Result<()> {
    let mut w = writer(path)?;
    w.write_record(["x", "u", "T"])?;
    if let Some((t, c)) = traj.last() {
        let xs: Vec<f64> = (0..GRID_POINTS)
            .map(|k| k as f64 / (GRID_POINTS - 1) as f64)
            .collect();
        let us = synthesize(c, &xs);
        let scale = t.exp();
        for (x, u) in xs.iter().zip(us) {
            w.write_record([number(*x), number(u), number(scale * u)])?;
        }
    }
    finish(w)
}

/// `resolution, error, eoc`; the eoc cell is empty where no order is defined.
pub fn write_study(path: &Path, report: &ConvergenceReport) -> std::io::Result<()> {
    let mut w = writer(path)?;
    w.write_record(["resolution", "error", "eoc"])?;
    for row in &report.rows {
        let eoc = match row.eoc {
            Eoc::Value(v) => number(v),
            Eoc::Undefined | Eoc::Saturated => String::new(),
        };
        w.write_record([number(row.resolution), number(row.error), eoc])?;
    }
    finish(w)
}

/// Gnuplot script plotting `study.csv`: semi-log for spatial, log-log for temporal.
pub fn plot_script(report: &ConvergenceReport, csv_name: &str) -> String {
    let (scale, xlabel) = match report.kind {
        StudyKind::Spatial => ("set logscale y", "N"),
        StudyKind::Temporal => ("set logscale xy", "h"),
    };
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str("set key top right\n");
    s.push_str(scale);
    s.push('\n');
    s.push_str("set format y '%.0e'\n");
    s.push_str(&format!("set xlabel '{xlabel}'\n"));
    s.push_str("set ylabel 'L2 error'\n");
    s.push_str(&format!(
        "set title '{} (t = {})'\n",
        report.case,
        number(report.t_eval)
    ));
    s.push_str("set terminal pngcairo size 800,600\n");
    s.push_str("set output 'study.png'\n");
    match report.kind {
        StudyKind::Spatial => s.push_str(&format!(
            "plot '{csv_name}' using 1:2 skip 1 with linespoints title 'error'\n"
        )),
        StudyKind::Temporal => {
            // reference slope h^2 anchored at the coarsest step
            let (h0, e0) = report
                .rows
                .first()
                .map_or((1.0, 1.0), |r| (r.resolution, r.error));
            s.push_str(&format!(
                "plot '{csv_name}' using 1:2 skip 1 with linespoints title 'error', \\\n     {} * (x / {})**2 with lines dashtype 2 title 'h^2'\n",
                number(e0),
                number(h0)
            ));
        }
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> std::io::Result<()> {
    std::fs::write(path, text)
}
