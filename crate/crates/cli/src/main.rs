//! `harmloc` command line driver.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::json;

use harmloc::dsp::{estimate_tone, relative_gain_db, welch_psd_with, WelchConfig, Window};
use harmloc::harness::{emit_report, run_montecarlo, run_sweep, MonteCarloSpec, Report, ReportFormat, SweepAxis, SweepSpec};
use harmloc::localizer::{localize, localization_error_cm, Geometry, LocalizerParams, MeasurementSet, OffsetModel};
use harmloc::scenario_file::{load_scenario, parse_scenario};
use harmloc::synthesis::{read_capture, synthesize_all, write_capture, CaptureSettings};
use harmloc::{presets, Aabb, Frequency, Position, Scenario};

#[derive(Parser)]
#[command(name = "harmloc", version, about = "Harmonic backscatter simulation, analysis and localization")]
struct Cli {
    /// Overrides the scenario noise seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Svg,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Svg => ReportFormat::Svg,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize one capture per receiver and harmonic.
    Simulate(SimulateArgs),
    /// PSD of a capture, with relative gain against an optional baseline.
    Analyze(AnalyzeArgs),
    /// Estimate the device position from captures.
    Localize(LocalizeArgs),
    /// Run a sweep described by a JSON spec.
    Sweep(SweepArgs),
    /// Localization error distributions over noise realizations.
    Montecarlo(MonteCarloArgs),
}

#[derive(Args)]
struct CaptureArgs {
    /// Capture length, seconds.
    #[arg(long, default_value_t = 0.1)]
    duration: f64,
    #[arg(long, default_value_t = 1e6)]
    sample_rate: f64,
    /// Baseband offset of the device tone, Hz.
    #[arg(long, default_value_t = 100e3)]
    tone_offset: f64,
}

impl CaptureArgs {
    fn settings(&self) -> CaptureSettings {
        CaptureSettings {
            duration_s: self.duration,
            sample_rate: self.sample_rate,
            tone_offset_hz: self.tone_offset,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario JSON file or preset name such as `chicken/c1`.
    #[arg(long)]
    scenario: String,
    /// Leave the device out, producing baseline captures.
    #[arg(long)]
    no_device: bool,
    #[command(flatten)]
    capture: CaptureArgs,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Capture path (`.cf32` with its `.json` sidecar).
    capture: PathBuf,
    /// Capture of the same receiver and harmonic without the device.
    #[arg(long)]
    baseline: Option<PathBuf>,
    #[arg(long, default_value_t = 100e3)]
    tone_offset: f64,
    #[arg(long, default_value_t = 4096)]
    fft_size: usize,
    #[arg(long, default_value_t = 0.5)]
    overlap: f64,
    #[arg(long)]
    rectangular: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Offsets {
    Known,
    Shared,
    PerHarmonic,
}

#[derive(Args)]
struct LocalizeArgs {
    /// Scenario providing the antenna geometry and medium.
    #[arg(long)]
    scenario: String,
    /// Capture files; directories contribute every `.cf32` inside.
    #[arg(required = true)]
    captures: Vec<PathBuf>,
    #[arg(long, default_value_t = 100e3)]
    tone_offset: f64,
    #[arg(long, default_value_t = harmloc::dsp::DEFAULT_SNR_FLOOR_DB, allow_negative_numbers = true)]
    snr_floor: f64,
    #[arg(long, value_enum, default_value = "known")]
    offsets: Offsets,
    /// Calibrated offsets for `--offsets known`, radians.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    offset_low: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    offset_high: f64,
    /// True position `x,y,z` in cm; adds `error_cm` to the output.
    #[arg(long, value_parser = parse_cm, allow_hyphen_values = true)]
    truth: Option<Position>,
    /// Search box corners `x,y,z` in cm.
    #[arg(long, value_parser = parse_cm, default_value = "0,0,0", allow_hyphen_values = true)]
    box_min: Position,
    #[arg(long, value_parser = parse_cm, default_value = "70,70,20", allow_hyphen_values = true)]
    box_max: Position,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep spec JSON.
    spec: PathBuf,
}

#[derive(Args)]
struct MonteCarloArgs {
    #[arg(long)]
    scenario: String,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Noise PSD in dBFS/Hz, or `off`; repeatable.
    #[arg(long = "noise", value_parser = parse_noise, required = true, allow_hyphen_values = true)]
    noise: Vec<f64>,
    /// Comma-separated receiver ids; repeatable.
    #[arg(long = "subset", required = true)]
    subsets: Vec<String>,
    #[arg(long, default_value_t = harmloc::dsp::DEFAULT_SNR_FLOOR_DB, allow_negative_numbers = true)]
    snr_floor: f64,
    #[command(flatten)]
    capture: CaptureArgs,
}

fn parse_cm(s: &str) -> std::result::Result<Position, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<std::result::Result<_, _>>()?;
    match v[..] {
        [x, y, z] => Ok(Position::from_cm([x, y, z])),
        _ => Err("expected x,y,z".into()),
    }
}

fn parse_noise(s: &str) -> std::result::Result<f64, String> {
    if s.eq_ignore_ascii_case("off") {
        return Ok(f64::NEG_INFINITY);
    }
    s.parse().map_err(|e: std::num::ParseFloatError| e.to_string())
}

/// A scenario file path, else a preset name.
fn resolve_scenario(arg: &str) -> Result<Scenario> {
    let path = Path::new(arg);
    if path.is_file() {
        return load_scenario(path).with_context(|| format!("loading {arg}"));
    }
    presets::by_name(arg).ok_or_else(|| {
        anyhow!(
            "{arg:?} is neither a scenario file nor a preset (presets: {})",
            presets::PRESET_NAMES.join(", ")
        )
    })
}

fn apply_seed(s: &mut Scenario, seed: Option<u64>) {
    if let Some(seed) = seed {
        s.rng_seed = seed;
    }
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<u8> {
    let mut s = resolve_scenario(&a.scenario)?;
    apply_seed(&mut s, cli.seed);
    if a.no_device {
        s.device = None;
    }
    std::fs::create_dir_all(&cli.out_dir)?;
    let mut files = Vec::new();
    for (_, c) in synthesize_all(&s, &a.capture.settings())? {
        let path = cli
            .out_dir
            .join(format!("{}_{:.0}MHz.cf32", c.metadata.rx_id, c.center_frequency.mhz()));
        write_capture(&c, &path)?;
        files.push(path.display().to_string());
    }
    println!("{}", serde_json::to_string_pretty(&json!({ "captures": files }))?);
    Ok(0)
}

fn analyze(cli: &Cli, a: &AnalyzeArgs) -> Result<u8> {
    let cap = read_capture(&a.capture)?;
    let cfg = WelchConfig {
        fft_size: a.fft_size,
        overlap: a.overlap,
        window: if a.rectangular { Window::Rectangular } else { Window::Hann },
    };
    let psd = welch_psd_with(&cap, &cfg)?;
    let tone = estimate_tone(&cap, a.tone_offset)?;
    let stem = a
        .capture
        .file_stem()
        .map(|s| format!("{}_psd", s.to_string_lossy()))
        .unwrap_or_else(|| "psd".into());
    let files = emit_report(&Report::Psd(&psd), cli.format.into(), &cli.out_dir, &stem)?;
    let mut out = json!({
        "rx_id": cap.metadata.rx_id,
        "center_mhz": cap.center_frequency.mhz(),
        "tone": {
            "amplitude": tone.amplitude,
            "phase_rad": tone.phase,
            "snr_db": finite_or_null(tone.snr_db),
        },
        "files": files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    });
    if let Some(base) = &a.baseline {
        let without = welch_psd_with(&read_capture(base)?, &cfg)?;
        let f = Frequency::from_hz(cap.center_frequency.hz() + a.tone_offset)?;
        out["relative_gain_db"] = json!(relative_gain_db(&psd, &without, f)?);
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(0)
}

fn finite_or_null(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        serde_json::Value::Null
    }
}

fn capture_paths(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|q| q.extension().is_some_and(|e| e == "cf32"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        bail!("no capture files given");
    }
    Ok(out)
}

fn localize_cmd(a: &LocalizeArgs) -> Result<u8> {
    let s = resolve_scenario(&a.scenario)?;
    let captures = capture_paths(&a.captures)?
        .iter()
        .map(|p| read_capture(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let (ms, rejected) = MeasurementSet::from_captures(Geometry::from_scenario(&s), &captures, a.tone_offset, a.snr_floor)?;
    for (rx, f, e) in &rejected {
        eprintln!("skipping {rx} at {:.0} MHz: {e}", f.mhz());
    }
    let params = LocalizerParams {
        offsets: match a.offsets {
            Offsets::Known => OffsetModel::Known {
                low: a.offset_low,
                high: a.offset_high,
            },
            Offsets::Shared => OffsetModel::Shared,
            Offsets::PerHarmonic => OffsetModel::PerHarmonic,
        },
        ..Default::default()
    };
    let search_box = Aabb::new(a.box_min, a.box_max)?;
    let r = localize(&ms, &search_box, &params)?;
    let mut out = json!({
        "position_cm": r.position.to_cm(),
        "objective": r.objective,
        "iterations": r.iterations,
        "converged": r.converged,
        "starts": r.starts_evaluated,
        "measurements": ms.entries.len(),
    });
    if let Some(t) = a.truth {
        out["error_cm"] = json!(localization_error_cm(r.position, t));
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(0)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    /// Preset name, scenario file path, or an inline scenario object.
    base: serde_json::Value,
    axis: SweepAxis,
    values: Vec<f64>,
    #[serde(default)]
    duration_s: Option<f64>,
    #[serde(default)]
    sample_rate: Option<f64>,
    #[serde(default)]
    tone_offset_hz: Option<f64>,
    #[serde(default)]
    fft_size: Option<usize>,
    /// Output file stem.
    #[serde(default)]
    name: Option<String>,
}

fn sweep_cmd(cli: &Cli, a: &SweepArgs) -> Result<u8> {
    let text = std::fs::read_to_string(&a.spec).with_context(|| format!("reading {}", a.spec.display()))?;
    let file: SweepFile = serde_json::from_str(&text).context("parsing sweep spec")?;
    let mut base = match &file.base {
        serde_json::Value::String(s) => resolve_scenario(s)?,
        v @ serde_json::Value::Object(_) => parse_scenario(&v.to_string())?,
        _ => bail!("sweep base must be a preset name, a path or a scenario object"),
    };
    apply_seed(&mut base, cli.seed);
    let mut spec = SweepSpec::new(base, file.axis, file.values);
    if let Some(d) = file.duration_s {
        spec.capture.duration_s = d;
    }
    if let Some(r) = file.sample_rate {
        spec.capture.sample_rate = r;
    }
    if let Some(o) = file.tone_offset_hz {
        spec.capture.tone_offset_hz = o;
    }
    if let Some(n) = file.fft_size {
        spec.welch.fft_size = n;
    }
    let report = run_sweep(&spec)?;
    let stem = file.name.unwrap_or_else(|| format!("sweep_{}", spec.axis.name()));
    let files = emit_report(&Report::Sweep(&report), cli.format.into(), &cli.out_dir, &stem)?;
    let best = report.best_row().map(|r| r.value);
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "rows": report.rows.len(),
            "failed_rows": report.failed_rows(),
            "best": best,
            "files": files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        }))?
    );
    Ok(if report.failed_rows() > 0 { 2 } else { 0 })
}

fn montecarlo_cmd(cli: &Cli, a: &MonteCarloArgs) -> Result<u8> {
    let mut s = resolve_scenario(&a.scenario)?;
    apply_seed(&mut s, cli.seed);
    let subsets = a
        .subsets
        .iter()
        .map(|s| s.split(',').map(|t| t.trim().to_string()).filter(|t| !t.is_empty()).collect())
        .collect();
    let mut spec = MonteCarloSpec::new(s, a.trials, a.noise.clone(), subsets);
    spec.capture = a.capture.settings();
    spec.snr_floor_db = a.snr_floor;
    let report = run_montecarlo(&spec)?;
    let files = emit_report(&Report::MonteCarlo(&report), cli.format.into(), &cli.out_dir, "montecarlo")?;
    let failed = report.failed_trials();
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "cells": report.cells.len(),
            "failed_trials": failed,
            "files": files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        }))?
    );
    Ok(if failed > 0 { 2 } else { 0 })
}

fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Simulate(a) => simulate(cli, a),
        Command::Analyze(a) => analyze(cli, a),
        Command::Localize(a) => localize_cmd(a),
        Command::Sweep(a) => sweep_cmd(cli, a),
        Command::Montecarlo(a) => montecarlo_cmd(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
