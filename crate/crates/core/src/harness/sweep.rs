//! One-axis sweeps comparing captures with and without the device.

use serde::{Deserialize, Serialize};

use crate::dsp::{estimate_tone, relative_gain_db, welch_psd_with, WelchConfig};
use crate::error::{Error, Result};
use crate::model::{AntennaRole, Frequency, Harmonic, Position, Scenario};
use crate::synthesis::{synthesize_capture, CaptureSettings};

/// Side of the square reference grid, cm.
pub const GRID_EXTENT_CM: f64 = 70.0;
/// Relative gains at or above this magnitude count as detectable.
pub const DETECTABILITY_DB: f64 = 1.0;

pub const CONFIG_NOTE: &str = "detectability is configuration-driven: it follows from the scenario's \
attenuation, gain and noise settings, not from measured hardware";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    DeviceY,
    DeviceX,
    RxGain,
    NoiseLevel,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::DeviceY => "device_y",
            SweepAxis::DeviceX => "device_x",
            SweepAxis::RxGain => "rx_gain",
            SweepAxis::NoiseLevel => "noise_level",
        }
    }

    pub fn unit(self) -> &'static str {
        match self {
            SweepAxis::DeviceY | SweepAxis::DeviceX => "cm",
            SweepAxis::RxGain => "db",
            SweepAxis::NoiseLevel => "dbfs_hz",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: Scenario,
    pub axis: SweepAxis,
    /// In the axis unit: cm for device axes, dB for receiver gain, dBFS/Hz
    /// for the noise level.
    pub values: Vec<f64>,
    pub capture: CaptureSettings,
    pub welch: WelchConfig,
}

impl SweepSpec {
    pub fn new(base: Scenario, axis: SweepAxis, values: Vec<f64>) -> Self {
        Self {
            base,
            axis,
            values,
            capture: CaptureSettings::default(),
            welch: WelchConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.values.is_empty() {
            return Err(Error::InvalidParams("a sweep needs at least one value".into()));
        }
        for &v in &self.values {
            let ok = match self.axis {
                SweepAxis::DeviceX | SweepAxis::DeviceY => (0.0..=GRID_EXTENT_CM).contains(&v),
                SweepAxis::RxGain => v.is_finite(),
                SweepAxis::NoiseLevel => !v.is_nan() && v != f64::INFINITY,
            };
            if !ok {
                return Err(Error::InvalidParams(format!(
                    "{} value {v} is outside the valid range",
                    self.axis.name()
                )));
            }
        }
        self.capture.sample_count()?;
        Ok(())
    }

    /// The base scenario with the swept parameter set to `value`.
    pub fn apply(&self, value: f64) -> Result<Scenario> {
        let mut s = self.base.clone();
        match self.axis {
            SweepAxis::DeviceY | SweepAxis::DeviceX => {
                if let Some(d) = &s.device {
                    let mut cm = d.position.to_cm();
                    cm[if self.axis == SweepAxis::DeviceX { 0 } else { 1 }] = value;
                    s.relocate_device(Position::from_cm(cm))?;
                }
            }
            SweepAxis::RxGain => {
                for a in s.antennas.iter_mut().filter(|a| a.role == AntennaRole::Receive) {
                    a.chain_gain_db = value;
                }
            }
            SweepAxis::NoiseLevel => s.noise_psd_dbfs_hz = value,
        }
        s.validate()?;
        Ok(s)
    }
}

/// One `(receiver, harmonic)` cell of a sweep row.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub rx_id: String,
    pub harmonic: Harmonic,
    pub frequency: Frequency,
    pub relative_gain_db: f64,
    /// Tone SNR of the with-device capture.
    pub snr_db: f64,
    pub detectable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    /// Cells in receiver order, low harmonic first; the error text when the
    /// row failed.
    pub outcome: std::result::Result<Vec<CellResult>, String>,
}

impl SweepRow {
    pub fn total_gain_db(&self) -> Option<f64> {
        self.outcome
            .as_ref()
            .ok()
            .map(|cells| cells.iter().map(|c| c.relative_gain_db).sum())
    }

    pub fn all_detectable(&self) -> bool {
        matches!(&self.outcome, Ok(cells) if cells.iter().all(|c| c.detectable))
    }

    pub fn none_detectable(&self) -> bool {
        matches!(&self.outcome, Ok(cells) if cells.iter().all(|c| !c.detectable))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub title: String,
    pub axis: SweepAxis,
    pub receivers: Vec<String>,
    pub harmonics: Vec<(Harmonic, Frequency)>,
    pub rows: Vec<SweepRow>,
    /// Row with the largest positive summed gain; `None` is the N/A case.
    pub best: Option<usize>,
    pub note: String,
}

impl ExperimentReport {
    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome.is_err()).count()
    }

    pub fn best_row(&self) -> Option<&SweepRow> {
        self.best.map(|i| &self.rows[i])
    }
}

fn sweep_row(spec: &SweepSpec, value: f64) -> Result<Vec<CellResult>> {
    let with = spec.apply(value)?;
    let mut without = with.clone();
    without.device = None;
    let mut cells = Vec::new();
    for rx in with.receivers() {
        for h in Harmonic::BOTH {
            let f = h.frequency(with.f1, with.f2)?;
            // same seed, rx and harmonic: identical noise in both captures
            let cap_with = synthesize_capture(&with, &rx.id, f, &spec.capture)?;
            let cap_without = synthesize_capture(&without, &rx.id, f, &spec.capture)?;
            let tone = Frequency::from_hz(f.hz() + spec.capture.tone_offset_hz)?;
            let gain = relative_gain_db(
                &welch_psd_with(&cap_with, &spec.welch)?,
                &welch_psd_with(&cap_without, &spec.welch)?,
                tone,
            )?;
            let snr_db = estimate_tone(&cap_with, spec.capture.tone_offset_hz)?.snr_db;
            cells.push(CellResult {
                rx_id: rx.id.clone(),
                harmonic: h,
                frequency: f,
                relative_gain_db: gain,
                snr_db,
                detectable: gain.abs() >= DETECTABILITY_DB,
            });
        }
    }
    Ok(cells)
}

/// Runs every value of the sweep. Row errors are recorded, not propagated.
pub fn run_sweep(spec: &SweepSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let (lo, hi) = spec.base.harmonics()?;
    let rows: Vec<SweepRow> = spec
        .values
        .iter()
        .map(|&value| SweepRow {
            value,
            outcome: sweep_row(spec, value).map_err(|e| e.to_string()),
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in rows.iter().enumerate() {
        if let Some(total) = r.total_gain_db().filter(|t| *t > 0.0) {
            if best.is_none_or(|(_, b)| total > b) {
                best = Some((i, total));
            }
        }
    }
    Ok(ExperimentReport {
        title: format!("{} sweep over {}", spec.base.name, spec.axis.name()),
        axis: spec.axis,
        receivers: spec.base.receivers().map(|a| a.id.clone()).collect(),
        harmonics: vec![(Harmonic::Low, lo), (Harmonic::High, hi)],
        rows,
        best: best.map(|(i, _)| i),
        note: CONFIG_NOTE.to_string(),
    })
}

/// Device y positions 0, 10, ..., 70 cm.
pub fn grid_y_steps() -> Vec<f64> {
    (0..=7).map(|i| 10.0 * i as f64).collect()
}
