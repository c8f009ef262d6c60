//! Position recovery from harmonic phases.
//!
//! For a candidate device position `p` the expected phase of each
//! `(receiver, harmonic)` measurement is the diode's phase law applied to the
//! two downlink legs, plus the uplink leg at the harmonic, plus a device phase
//! offset:
//!
//! * low  (`2·f2 − f1`): `2·φ(f2, TX2→p) − φ(f1, TX1→p) + φ(h, p→RX) + θ_low`
//! * high (`f1 + f2`):   `φ(f1, TX1→p) + φ(f2, TX2→p) + φ(h, p→RX) + θ_high`
//!
//! The objective is the sum of squared residuals wrapped to `(−π, π]`. It is
//! minimized with Adam from a grid of starting positions.
//!
//! How the device offsets are handled matters. Permittivity does not depend
//! on frequency here, so both harmonics see the same optical distances:
//!
//! * one free offset per harmonic absorbs the downlink terms entirely and
//!   leaves only receiver-to-receiver distance differences, two constraints
//!   for three coordinates with three receivers;
//! * one shared offset keeps a single downlink combination, which wraps
//!   every few centimeters along the curve the differences allow, so exact
//!   aliases remain;
//! * known (calibrated) offsets add a second, independently wrapping
//!   constraint and make the position observable with three receivers.
//!
//! [`OffsetModel::Known`] with zero offsets is therefore the default; the
//! other two remain available.

mod adam;

pub use adam::{adam_minimize, central_gradient, Adam, AdamConfig, AdamOutcome};

use serde::{Deserialize, Serialize};

use crate::dsp::{extract_tone_phasor_with_floor, TonePhasor};
use crate::error::{Error, Result};
use crate::model::{
    Aabb, AntennaRole, AntennaSpec, Frequency, Harmonic, IqCapture, MediumStack, PerHarmonic,
    Position, Scenario,
};
use crate::phase::{wrap_2pi, wrap_pi};
use crate::propagation::{effective_distance, path_phase, trace_path};
use crate::synthesis::ToneTruth;

/// Antennas, medium and carriers: everything the phase model needs besides
/// the device itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub antennas: Vec<AntennaSpec>,
    pub medium: MediumStack,
    pub f1: Frequency,
    pub f2: Frequency,
    pub tx_f1: String,
    pub tx_f2: String,
}

impl Geometry {
    pub fn from_scenario(s: &Scenario) -> Self {
        Self {
            antennas: s.antennas.clone(),
            medium: s.medium.clone(),
            f1: s.f1,
            f2: s.f2,
            tx_f1: s.tx_f1.clone(),
            tx_f2: s.tx_f2.clone(),
        }
    }

    fn antenna(&self, id: &str, role: AntennaRole) -> Result<&AntennaSpec> {
        self.antennas
            .iter()
            .find(|a| a.id == id && a.role == role)
            .ok_or_else(|| match role {
                AntennaRole::Receive => Error::UnknownReceiver(id.to_string()),
                AntennaRole::Transmit => {
                    Error::InvalidScenario(format!("no transmit antenna `{id}`"))
                }
            })
    }
}

fn leg_phase(medium: &MediumStack, from: Position, to: Position, f: Frequency) -> Result<f64> {
    Ok(path_phase(f, effective_distance(&trace_path(medium, from, to)?)))
}

/// Expected phase of `harmonic` at receiver `rx_id` for a device at `p`.
pub fn model_phase(
    geometry: &Geometry,
    p: Position,
    harmonic: Harmonic,
    rx_id: &str,
    phase_offset: f64,
) -> Result<f64> {
    let tx1 = geometry.antenna(&geometry.tx_f1, AntennaRole::Transmit)?;
    let tx2 = geometry.antenna(&geometry.tx_f2, AntennaRole::Transmit)?;
    let rx = geometry.antenna(rx_id, AntennaRole::Receive)?;
    let fh = harmonic.frequency(geometry.f1, geometry.f2)?;
    let down1 = leg_phase(&geometry.medium, tx1.position, p, geometry.f1)?;
    let down2 = leg_phase(&geometry.medium, tx2.position, p, geometry.f2)?;
    let up = leg_phase(&geometry.medium, p, rx.position, fh)?;
    let mixed = match harmonic {
        Harmonic::Low => 2.0 * down2 - down1,
        Harmonic::High => down1 + down2,
    };
    Ok(wrap_2pi(mixed + up + phase_offset))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub rx_id: String,
    pub harmonic: Frequency,
    pub phasor: TonePhasor,
    /// Residual weight; 1 unless a caller weights by SNR.
    pub weight: f64,
}

/// A capture left out of a measurement set: receiver, harmonic and reason.
pub type Rejected = (String, Frequency, Error);

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub geometry: Geometry,
    pub entries: Vec<Measurement>,
}

impl MeasurementSet {
    /// Checks every entry against the geometry.
    pub fn new(geometry: Geometry, entries: Vec<Measurement>) -> Result<Self> {
        for e in &entries {
            geometry.antenna(&e.rx_id, AntennaRole::Receive)?;
            Harmonic::classify(e.harmonic, geometry.f1, geometry.f2)?;
            if !(e.weight >= 0.0 && e.weight.is_finite()) || !e.phasor.phase.is_finite() {
                return Err(Error::InvalidParams(format!(
                    "entry {} at {} has a non-finite phase or weight",
                    e.rx_id, e.harmonic
                )));
            }
        }
        Ok(Self { geometry, entries })
    }

    /// Noiseless measurements straight from synthesis ground truth.
    pub fn from_truth(scenario: &Scenario, truth: &[ToneTruth]) -> Result<Self> {
        let entries = truth
            .iter()
            .map(|t| Measurement {
                rx_id: t.rx_id.clone(),
                harmonic: t.frequency,
                phasor: TonePhasor {
                    frequency: t.frequency,
                    amplitude: t.amplitude,
                    phase: t.phase,
                    snr_db: f64::INFINITY,
                },
                weight: 1.0,
            })
            .collect();
        Self::new(Geometry::from_scenario(scenario), entries)
    }

    /// Extracts a phasor from each capture; captures under the SNR floor are
    /// skipped and returned alongside.
    pub fn from_captures(
        geometry: Geometry,
        captures: &[IqCapture],
        tone_offset_hz: f64,
        snr_floor_db: f64,
    ) -> Result<(Self, Vec<Rejected>)> {
        let mut entries = Vec::new();
        let mut rejected = Vec::new();
        for c in captures {
            match extract_tone_phasor_with_floor(c, tone_offset_hz, snr_floor_db) {
                Ok(phasor) => entries.push(Measurement {
                    rx_id: c.metadata.rx_id.clone(),
                    harmonic: c.center_frequency,
                    phasor,
                    weight: 1.0,
                }),
                Err(e @ Error::InsufficientSignal { .. }) => {
                    rejected.push((c.metadata.rx_id.clone(), c.center_frequency, e))
                }
                Err(e) => return Err(e),
            }
        }
        Ok((Self::new(geometry, entries)?, rejected))
    }

    /// Keeps only entries from the listed receivers.
    pub fn restricted_to(&self, rx_ids: &[String]) -> Self {
        Self {
            geometry: self.geometry.clone(),
            entries: self
                .entries
                .iter()
                .filter(|e| rx_ids.contains(&e.rx_id))
                .cloned()
                .collect(),
        }
    }
}

/// How the device phase offsets enter the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum OffsetModel {
    /// One unknown offset shared by both products.
    Shared,
    /// An independent unknown offset per product.
    PerHarmonic,
    /// Offsets calibrated beforehand.
    Known { low: f64, high: f64 },
}

impl Default for OffsetModel {
    fn default() -> Self {
        OffsetModel::Known { low: 0.0, high: 0.0 }
    }
}

impl OffsetModel {
    /// Offsets taken as known, e.g. from a tag calibration.
    pub fn calibrated(offsets: PerHarmonic<f64>) -> Self {
        OffsetModel::Known {
            low: offsets.low,
            high: offsets.high,
        }
    }

    pub fn free_parameters(&self) -> usize {
        match self {
            OffsetModel::Shared => 1,
            OffsetModel::PerHarmonic => 2,
            OffsetModel::Known { .. } => 0,
        }
    }

    /// Offsets encoded in the tail of a parameter vector.
    pub fn offsets(&self, tail: &[f64]) -> PerHarmonic<f64> {
        match *self {
            OffsetModel::Shared => PerHarmonic::new(tail[0], tail[0]),
            OffsetModel::PerHarmonic => PerHarmonic::new(tail[0], tail[1]),
            OffsetModel::Known { low, high } => PerHarmonic::new(low, high),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizerParams {
    pub adam: AdamConfig,
    pub offsets: OffsetModel,
    /// Spacing of the multi-start grid, meters.
    pub grid_spacing: f64,
    /// Iterations every start gets before the field is narrowed.
    pub screen_iters: usize,
    /// Starts carried on to `adam.max_iters` after screening.
    pub refine_top: usize,
    /// Extra starts placed inside dielectric slabs, where the phase varies
    /// `sqrt(εr)` times faster and coarse-grid basins are easily missed.
    pub slab_starts: usize,
}

impl Default for LocalizerParams {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            offsets: OffsetModel::default(),
            grid_spacing: 0.05,
            screen_iters: 150,
            refine_top: 8,
            slab_starts: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationResult {
    pub position: Position,
    pub offsets: PerHarmonic<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub starts_evaluated: usize,
    pub error_m: Option<f64>,
}

/// Precomputed view of a measurement set for fast objective evaluation.
struct Evaluator<'a> {
    medium: &'a MediumStack,
    f1: Frequency,
    f2: Frequency,
    tx1: Position,
    tx2: Position,
    terms: Vec<Term>,
}

struct Term {
    rx: Position,
    harmonic: Harmonic,
    freq: Frequency,
    measured: f64,
    weight: f64,
}

impl<'a> Evaluator<'a> {
    fn new(ms: &'a MeasurementSet) -> Result<Self> {
        let g = &ms.geometry;
        let tx1 = g.antenna(&g.tx_f1, AntennaRole::Transmit)?.position;
        let tx2 = g.antenna(&g.tx_f2, AntennaRole::Transmit)?.position;
        let terms = ms
            .entries
            .iter()
            .map(|e| {
                Ok(Term {
                    rx: g.antenna(&e.rx_id, AntennaRole::Receive)?.position,
                    harmonic: Harmonic::classify(e.harmonic, g.f1, g.f2)?,
                    freq: e.harmonic,
                    measured: e.phasor.phase,
                    weight: e.weight,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            medium: &g.medium,
            f1: g.f1,
            f2: g.f2,
            tx1,
            tx2,
            terms,
        })
    }

    fn value(&self, p: Position, offsets: PerHarmonic<f64>) -> Result<f64> {
        let down1 = leg_phase(self.medium, self.tx1, p, self.f1)?;
        let down2 = leg_phase(self.medium, self.tx2, p, self.f2)?;
        let low = 2.0 * down2 - down1 + offsets.low;
        let high = down1 + down2 + offsets.high;
        let mut sum = 0.0;
        for t in &self.terms {
            let up = leg_phase(self.medium, p, t.rx, t.freq)?;
            let mixed = match t.harmonic {
                Harmonic::Low => low,
                Harmonic::High => high,
            };
            let r = wrap_pi(t.measured - (mixed + up));
            sum += t.weight * r * r;
        }
        Ok(sum)
    }

    /// Objective at `p` with free offsets set to their per-point optimum
    /// (the weighted circular mean of the residuals), plus those offsets.
    fn profiled(&self, model: &OffsetModel, p: Position) -> Result<(f64, Vec<f64>)> {
        let fixed = model.offsets(&[0.0, 0.0]);
        let tail = match model {
            OffsetModel::Known { .. } => vec![],
            _ => {
                let down1 = leg_phase(self.medium, self.tx1, p, self.f1)?;
                let down2 = leg_phase(self.medium, self.tx2, p, self.f2)?;
                let mut acc = PerHarmonic::new((0.0, 0.0), (0.0, 0.0));
                for t in &self.terms {
                    let up = leg_phase(self.medium, p, t.rx, t.freq)?;
                    let mixed = match t.harmonic {
                        Harmonic::Low => 2.0 * down2 - down1,
                        Harmonic::High => down1 + down2,
                    };
                    let r = t.measured - mixed - up;
                    let h = match model {
                        OffsetModel::Shared => Harmonic::Low,
                        _ => t.harmonic,
                    };
                    acc[h].0 += t.weight * r.sin();
                    acc[h].1 += t.weight * r.cos();
                }
                let angle = |(s, c): (f64, f64)| s.atan2(c);
                match model {
                    OffsetModel::Shared => vec![angle(acc.low)],
                    _ => vec![angle(acc.low), angle(acc.high)],
                }
            }
        };
        let offsets = if tail.is_empty() { fixed } else { model.offsets(&tail) };
        Ok((self.value(p, offsets)?, tail))
    }

    /// Objective over a packed `[x, y, z, offsets...]` vector; NaN on error.
    fn packed(&self, model: &OffsetModel, x: &[f64]) -> f64 {
        self.value(Position::new(x[0], x[1], x[2]), model.offsets(&x[3..]))
            .unwrap_or(f64::NAN)
    }
}

/// Sum of squared wrapped phase residuals.
pub fn objective(ms: &MeasurementSet, p: Position, offsets: PerHarmonic<f64>) -> Result<f64> {
    Evaluator::new(ms)?.value(p, offsets)
}

/// The objective as a function of a packed `[x, y, z, offsets...]` vector.
pub fn packed_objective<'a>(
    ms: &'a MeasurementSet,
    model: OffsetModel,
) -> Result<impl Fn(&[f64]) -> f64 + 'a> {
    let ev = Evaluator::new(ms)?;
    Ok(move |x: &[f64]| ev.packed(&model, x))
}

/// Cell centers of a grid over `b` with roughly `spacing` between points,
/// x fastest.
pub fn start_grid(b: &Aabb, spacing: f64) -> Vec<Position> {
    let e = b.extent();
    let counts = [e.x, e.y, e.z].map(|len| ((len / spacing).round() as usize).max(1));
    let mut out = Vec::with_capacity(counts.iter().product());
    for k in 0..counts[2] {
        for j in 0..counts[1] {
            for i in 0..counts[0] {
                out.push(Position::new(
                    b.min.x + (i as f64 + 0.5) * e.x / counts[0] as f64,
                    b.min.y + (j as f64 + 0.5) * e.y / counts[1] as f64,
                    b.min.z + (k as f64 + 0.5) * e.z / counts[2] as f64,
                ));
            }
        }
    }
    out
}

/// Slab-interior probe points: a grid `sqrt(εr)` times finer than the
/// coarse one over each dielectric slab clipped to `search_box`.
fn slab_probes(medium: &MediumStack, search_box: &Aabb, spacing: f64) -> Vec<(Position, f64)> {
    let mut out = Vec::new();
    for slab in &medium.slabs {
        if slab.rel_permittivity <= 1.0 {
            continue;
        }
        let lo = Position::new(
            slab.extent.min.x.max(search_box.min.x),
            slab.extent.min.y.max(search_box.min.y),
            slab.extent.min.z.max(search_box.min.z),
        );
        let hi = Position::new(
            slab.extent.max.x.min(search_box.max.x),
            slab.extent.max.y.min(search_box.max.y),
            slab.extent.max.z.min(search_box.max.z),
        );
        let Ok(clipped) = Aabb::new(lo, hi) else { continue };
        let scale = slab.rel_permittivity.sqrt();
        out.extend(
            start_grid(&clipped, spacing / scale)
                .into_iter()
                .map(|p| (p, scale)),
        );
    }
    out
}

/// Multi-start Adam confined to `search_box`.
///
/// Starts are the coarse grid (offsets 0) plus the `slab_starts` best
/// slab-interior probes by profiled objective, which run with the learning
/// rate divided by `sqrt(εr)`. Every start gets `screen_iters` iterations;
/// the `refine_top` best then continue to `adam.max_iters`. The lowest final
/// objective wins, ties going to the earlier start.
pub fn localize(ms: &MeasurementSet, search_box: &Aabb, params: &LocalizerParams) -> Result<LocalizationResult> {
    if ms.entries.is_empty() {
        return Err(Error::NoUsableMeasurements);
    }
    params.adam.validate()?;
    if !(params.grid_spacing > 0.0) || params.refine_top == 0 {
        return Err(Error::InvalidParams(
            "grid spacing must be > 0 and refine_top >= 1".into(),
        ));
    }
    let ev = Evaluator::new(ms)?;
    let model = params.offsets;
    let mut f = |x: &[f64]| ev.packed(&model, x);
    let n_off = model.free_parameters();

    let mut starts: Vec<(Vec<f64>, AdamConfig)> = start_grid(search_box, params.grid_spacing)
        .into_iter()
        .map(|s| {
            let mut x0 = vec![s.x, s.y, s.z];
            x0.extend(std::iter::repeat_n(0.0, n_off));
            (x0, params.adam)
        })
        .collect();
    if params.slab_starts > 0 {
        let mut probes: Vec<(f64, Vec<f64>, f64)> = slab_probes(&ms.geometry.medium, search_box, params.grid_spacing)
            .into_iter()
            .filter_map(|(p, scale)| {
                let (v, tail) = ev.profiled(&model, p).ok()?;
                let mut x0 = vec![p.x, p.y, p.z];
                x0.extend(tail);
                v.is_finite().then_some((v, x0, scale))
            })
            .collect();
        // stable sort keeps grid order among equal values
        probes.sort_by(|a, b| a.0.total_cmp(&b.0));
        starts.extend(probes.into_iter().take(params.slab_starts).map(|(_, x0, scale)| {
            let cfg = AdamConfig {
                learn_rate: params.adam.learn_rate / scale,
                ..params.adam
            };
            (x0, cfg)
        }));
    }

    let mut lower = vec![search_box.min.x, search_box.min.y, search_box.min.z];
    let mut upper = vec![search_box.max.x, search_box.max.y, search_box.max.z];
    lower.extend(std::iter::repeat_n(f64::NEG_INFINITY, n_off));
    upper.extend(std::iter::repeat_n(f64::INFINITY, n_off));
    let screen = params.screen_iters.min(params.adam.max_iters);

    let mut screened: Vec<(usize, f64, Adam)> = Vec::with_capacity(starts.len());
    for (i, (x0, cfg)) in starts.iter().enumerate() {
        if !f(x0).is_finite() {
            continue;
        }
        let mut adam = Adam::new(x0, *cfg)?.with_bounds(lower.clone(), upper.clone())?;
        if adam.run(&mut f, screen).is_err() {
            continue;
        }
        let v = f(adam.x());
        if v.is_finite() {
            screened.push((i, v, adam));
        }
    }
    if screened.is_empty() {
        return Err(Error::NoConvergedStart);
    }
    screened.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    screened.truncate(params.refine_top);

    let mut best: Option<(usize, AdamOutcome)> = None;
    for (i, _, mut adam) in screened {
        if adam.run(&mut f, params.adam.max_iters).is_err() {
            continue;
        }
        let Ok(out) = adam.finish(&mut f) else { continue };
        let better = match &best {
            None => true,
            Some((bi, b)) => out.value < b.value || (out.value == b.value && i < *bi),
        };
        if better {
            best = Some((i, out));
        }
    }
    let (_, out) = best.ok_or(Error::NoConvergedStart)?;
    Ok(LocalizationResult {
        position: Position::new(out.x[0], out.x[1], out.x[2]),
        offsets: {
            let o = model.offsets(&out.x[3..]);
            PerHarmonic::new(wrap_2pi(o.low), wrap_2pi(o.high))
        },
        objective: out.value,
        iterations: out.iterations,
        converged: out.converged,
        starts_evaluated: starts.len(),
        error_m: None,
    })
}

/// [`localize`] plus the error against a known position.
pub fn localize_against(
    ms: &MeasurementSet,
    search_box: &Aabb,
    params: &LocalizerParams,
    truth: Position,
) -> Result<LocalizationResult> {
    let mut r = localize(ms, search_box, params)?;
    r.error_m = Some(r.position.distance(truth));
    Ok(r)
}

/// Euclidean distance in centimeters.
pub fn localization_error_cm(est: Position, truth: Position) -> f64 {
    100.0 * est.distance(truth)
}
