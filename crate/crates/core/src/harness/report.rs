//! CSV and SVG emission for sweeps, Monte Carlo studies and spectra.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::montecarlo::MonteCarloReport;
use super::svg::{Guide, Plot, Series};
use super::sweep::{ExperimentReport, DETECTABILITY_DB};
use crate::dsp::PsdEstimate;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Svg,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Svg => "svg",
        }
    }
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "svg" => Ok(ReportFormat::Svg),
            other => Err(Error::InvalidParams(format!("unknown report format {other:?}"))),
        }
    }
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn cell_label(rx: &str, mhz: f64) -> String {
    format!("{rx}_{mhz:.0}MHz")
}

/// One row per sweep value; per-cell gain and SNR columns, then the row
/// summary. Failed rows keep their value and carry the error in `status`.
pub fn sweep_csv(r: &ExperimentReport) -> String {
    let mut out = format!("{}_{}", r.axis.name(), r.axis.unit());
    for rx in &r.receivers {
        for (_, f) in &r.harmonics {
            let l = cell_label(rx, f.mhz());
            let _ = write!(out, ",{l}_gain_db,{l}_snr_db");
        }
    }
    out.push_str(",total_gain_db,all_detectable,best,status\n");
    let width = r.receivers.len() * r.harmonics.len();
    for (i, row) in r.rows.iter().enumerate() {
        out.push_str(&num(row.value));
        match &row.outcome {
            Ok(cells) => {
                for c in cells {
                    let _ = write!(out, ",{},{}", num(c.relative_gain_db), num(c.snr_db));
                }
                let _ = writeln!(
                    out,
                    ",{},{},{},ok",
                    opt(row.total_gain_db()),
                    row.all_detectable(),
                    r.best == Some(i)
                );
            }
            Err(e) => {
                out.push_str(&",".repeat(2 * width));
                let _ = writeln!(out, ",,false,false,{}", csv_text(&format!("error: {e}")));
            }
        }
    }
    out
}

pub fn sweep_svg(r: &ExperimentReport) -> String {
    let mut series = Vec::new();
    for rx in &r.receivers {
        for (h, f) in &r.harmonics {
            let points = r
                .rows
                .iter()
                .filter_map(|row| {
                    let cells = row.outcome.as_ref().ok()?;
                    let c = cells.iter().find(|c| &c.rx_id == rx && c.harmonic == *h)?;
                    Some((row.value, c.relative_gain_db))
                })
                .collect();
            series.push(Series {
                label: cell_label(rx, f.mhz()),
                points,
            });
        }
    }
    Plot {
        title: r.title.clone(),
        subtitle: Some(r.note.clone()),
        x_label: format!("{} ({})", r.axis.name(), r.axis.unit()),
        y_label: "relative gain (dB)".into(),
        series,
        guides: vec![Guide {
            y: DETECTABILITY_DB,
            label: format!("{DETECTABILITY_DB} dB"),
        }],
        marker_x: r.best_row().map(|row| row.value),
    }
    .render()
}

fn subset_label(s: &[String]) -> String {
    s.join("+")
}

/// One row per `(noise level, subset)` cell.
pub fn montecarlo_summary_csv(r: &MonteCarloReport) -> String {
    let mut out = String::from(
        "noise_dbfs_hz,subset,trials,failed,median_cm,p90_cm,median_abs_dx_cm,median_abs_dy_cm,median_abs_dz_cm,x_dominant,y_dominant,z_dominant\n",
    );
    for c in &r.cells {
        let axes = c.median_abs_axis_cm();
        let dom = c.dominance();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            num(c.noise_level),
            subset_label(&c.subset),
            c.trials.len(),
            c.failed(),
            opt(c.median_cm()),
            opt(c.p90_cm()),
            opt(axes[0]),
            opt(axes[1]),
            opt(axes[2]),
            num(dom[0]),
            num(dom[1]),
            num(dom[2]),
        );
    }
    out
}

/// Every trial of every cell.
pub fn montecarlo_trials_csv(r: &MonteCarloReport) -> String {
    let mut out = String::from("noise_dbfs_hz,subset,trial,seed,error_cm,dx_cm,dy_cm,dz_cm,status\n");
    for c in &r.cells {
        for t in &c.trials {
            let head = format!("{},{},{},{}", num(c.noise_level), subset_label(&c.subset), t.index, t.seed);
            let _ = match &t.outcome {
                Ok(e) => writeln!(
                    out,
                    "{head},{},{},{},{},ok",
                    num(e.error_cm),
                    num(e.dx_cm),
                    num(e.dy_cm),
                    num(e.dz_cm)
                ),
                Err(msg) => writeln!(out, "{head},,,,,{}", csv_text(&format!("error: {msg}"))),
            };
        }
    }
    out
}

/// Median error against noise level, one line per subset. Noise-free cells
/// are left out since they have no position on the axis.
pub fn montecarlo_svg(r: &MonteCarloReport) -> String {
    let mut subsets: Vec<&Vec<String>> = Vec::new();
    for c in &r.cells {
        if !subsets.contains(&&c.subset) {
            subsets.push(&c.subset);
        }
    }
    let series = subsets
        .into_iter()
        .map(|s| Series {
            label: subset_label(s),
            points: r
                .cells
                .iter()
                .filter(|c| &c.subset == s)
                .filter_map(|c| Some((c.noise_level, c.median_cm()?)))
                .collect(),
        })
        .collect();
    Plot {
        title: r.title.clone(),
        x_label: "noise PSD (dBFS/Hz)".into(),
        y_label: "median error (cm)".into(),
        series,
        ..Default::default()
    }
    .render()
}

pub fn psd_csv(psd: &PsdEstimate) -> String {
    let mut out = String::from("freq_hz,power_db\n");
    for (f, p) in psd.bin_frequencies.iter().zip(&psd.power_db) {
        let _ = writeln!(out, "{f:.1},{}", num(*p));
    }
    out
}

pub fn psd_svg(psd: &PsdEstimate, title: &str) -> String {
    Plot {
        title: title.to_string(),
        x_label: "frequency (MHz)".into(),
        y_label: "power (dBFS/bin)".into(),
        series: vec![Series {
            label: format!("{:.0} MHz", psd.center_frequency.mhz()),
            points: psd
                .bin_frequencies
                .iter()
                .zip(&psd.power_db)
                .map(|(f, p)| (f / 1e6, *p))
                .collect(),
        }],
        ..Default::default()
    }
    .render()
}

/// A report that can be written to disk.
pub enum Report<'a> {
    Sweep(&'a ExperimentReport),
    MonteCarlo(&'a MonteCarloReport),
    Psd(&'a PsdEstimate),
}

impl Report<'_> {
    fn is_empty(&self) -> bool {
        match self {
            Report::Sweep(r) => r.rows.is_empty(),
            Report::MonteCarlo(r) => r.cells.iter().all(|c| c.trials.is_empty()),
            Report::Psd(p) => p.power_db.is_empty(),
        }
    }
}

/// Writes `report` under `dir` and returns the files created. CSV output of
/// a Monte Carlo study is split into `{stem}_summary.csv` and
/// `{stem}_trials.csv`.
pub fn emit_report(report: &Report, format: ReportFormat, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    if report.is_empty() {
        return Err(Error::EmptyReport);
    }
    fs::create_dir_all(dir)?;
    let ext = format.extension();
    let files: Vec<(String, String)> = match (report, format) {
        (Report::Sweep(r), ReportFormat::Csv) => vec![(format!("{stem}.{ext}"), sweep_csv(r))],
        (Report::Sweep(r), ReportFormat::Svg) => vec![(format!("{stem}.{ext}"), sweep_svg(r))],
        (Report::MonteCarlo(r), ReportFormat::Csv) => vec![
            (format!("{stem}_summary.{ext}"), montecarlo_summary_csv(r)),
            (format!("{stem}_trials.{ext}"), montecarlo_trials_csv(r)),
        ],
        (Report::MonteCarlo(r), ReportFormat::Svg) => vec![(format!("{stem}.{ext}"), montecarlo_svg(r))],
        (Report::Psd(p), ReportFormat::Csv) => vec![(format!("{stem}.{ext}"), psd_csv(p))],
        (Report::Psd(p), ReportFormat::Svg) => vec![(format!("{stem}.{ext}"), psd_svg(p, stem))],
    };
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body)?;
        written.push(path);
    }
    Ok(written)
}
