//! Forward simulator: scenario in, per-receiver baseband captures out.
//!
//! Each receiver gets one capture per harmonic, centered on that harmonic.
//! The device contributes a complex tone at a fixed baseband offset whose
//! amplitude and phase come from the downlink legs, the diode mixer and the
//! uplink leg. Noise and interference are drawn from a stream keyed on
//! `(seed, rx_id, harmonic)`, so they do not depend on whether the device is
//! present or on the order captures are produced in.

mod capture_file;

pub use capture_file::{decode_cf32, read_capture, sidecar_path, write_capture, CaptureSidecar, SIDECAR_SCHEMA};

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::backscatter::{mix, IncidentTones, Tone};
use crate::error::{Error, Result};
use crate::model::{
    AntennaRole, AntennaSpec, CaptureMetadata, Frequency, Harmonic, IqCapture, Position, Scenario,
};
use crate::phase::wrap_2pi;
use crate::propagation::{effective_distance, path_attenuation_db, path_phase, pattern_gain_db, trace_path};

/// Smallest capture the DSP stage accepts.
pub const MIN_CAPTURE_SAMPLES: usize = 16;

/// One propagation leg between an antenna and the device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkLeg {
    /// Linear amplitude factor, including the transmitter drive for TX legs.
    pub amplitude: f64,
    /// Accrued phase in `[0, 2π)`.
    pub phase: f64,
}

/// Amplitude and phase of the leg between `ant` and `device_pos` at `f`.
pub fn link_budget(
    scenario: &Scenario,
    ant: &AntennaSpec,
    device_pos: Position,
    f: Frequency,
) -> Result<LinkLeg> {
    let segs = trace_path(&scenario.medium, ant.position, device_pos)?;
    let gain_db = ant.chain_gain_db + pattern_gain_db(ant, device_pos) - path_attenuation_db(&segs, f);
    let reference = match ant.role {
        AntennaRole::Transmit => scenario.tx_amplitude(&ant.id),
        AntennaRole::Receive => 1.0,
    };
    Ok(LinkLeg {
        amplitude: 10f64.powf(gain_db / 20.0) * reference,
        phase: path_phase(f, effective_distance(&segs)),
    })
}

/// Ground-truth phasor of one harmonic at one receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct ToneTruth {
    pub rx_id: String,
    pub harmonic: Harmonic,
    pub frequency: Frequency,
    pub amplitude: f64,
    pub phase: f64,
}

fn carrier_tones(scenario: &Scenario, device_pos: Position) -> Result<IncidentTones> {
    let leg = |id: &str, f| -> Result<Tone> {
        let ant = scenario
            .antenna(id)
            .ok_or_else(|| Error::InvalidScenario(format!("no antenna `{id}`")))?;
        let l = link_budget(scenario, ant, device_pos, f)?;
        Ok(Tone {
            amplitude: l.amplitude,
            phase: l.phase,
        })
    };
    Ok(IncidentTones {
        f1: leg(&scenario.tx_f1, scenario.f1)?,
        f2: leg(&scenario.tx_f2, scenario.f2)?,
    })
}

/// Ground truth for a single `(receiver, harmonic)` pair.
pub fn device_tone(scenario: &Scenario, rx_id: &str, harmonic: Harmonic) -> Result<ToneTruth> {
    let device = scenario.device()?;
    let rx = scenario.receiver(rx_id)?;
    let products = mix(&device.diode, &carrier_tones(scenario, device.position)?);
    tone_at(scenario, rx, harmonic, products.get(harmonic))
}

fn tone_at(scenario: &Scenario, rx: &AntennaSpec, harmonic: Harmonic, product: Tone) -> Result<ToneTruth> {
    let device = scenario.device()?;
    let freq = harmonic.frequency(scenario.f1, scenario.f2)?;
    let up = link_budget(scenario, rx, device.position, freq)?;
    Ok(ToneTruth {
        rx_id: rx.id.clone(),
        harmonic,
        frequency: freq,
        amplitude: product.amplitude * up.amplitude,
        phase: wrap_2pi(product.phase + up.phase + device.phase_offsets[harmonic]),
    })
}

/// Ground truth for every receiver (antenna order) and both harmonics.
pub fn device_tone_set(scenario: &Scenario) -> Result<Vec<ToneTruth>> {
    let device = scenario.device()?;
    let products = mix(&device.diode, &carrier_tones(scenario, device.position)?);
    let mut out = Vec::new();
    for rx in scenario.receivers() {
        for h in Harmonic::BOTH {
            out.push(tone_at(scenario, rx, h, products.get(h))?);
        }
    }
    Ok(out)
}

/// Timing of a synthesized capture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaptureSettings {
    pub duration_s: f64,
    pub sample_rate: f64,
    /// Baseband offset of the device tone, Hz.
    pub tone_offset_hz: f64,
}

impl Default for CaptureSettings {
    fn default() -> Self {
        Self {
            duration_s: 0.1,
            sample_rate: 1e6,
            tone_offset_hz: 100e3,
        }
    }
}

impl CaptureSettings {
    pub fn sample_count(&self) -> Result<usize> {
        if !(self.duration_s > 0.0) {
            return Err(Error::EmptyCapture(self.duration_s));
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "sample rate {} must be positive",
                self.sample_rate
            )));
        }
        let nyquist = self.sample_rate / 2.0;
        if !(self.tone_offset_hz.abs() < nyquist) {
            return Err(Error::AliasedTone {
                offset_hz: self.tone_offset_hz,
                nyquist_hz: nyquist,
            });
        }
        let n = (self.duration_s * self.sample_rate).round() as usize;
        if n < MIN_CAPTURE_SAMPLES {
            return Err(Error::TooFewSamples {
                needed: MIN_CAPTURE_SAMPLES,
                got: n,
            });
        }
        Ok(n)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of the noise stream for one `(receiver, harmonic)` capture.
pub fn stream_seed(seed: u64, rx_id: &str, harmonic: Frequency) -> u64 {
    let mut h = splitmix64(seed);
    for b in rx_id.bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    splitmix64(h ^ harmonic.hz().to_bits())
}

/// Adds `amplitude·e^{j(phase + 2π·offset·n/fs)}` to every sample.
fn add_tone(samples: &mut [Complex64], amplitude: f64, phase: f64, offset_hz: f64, fs: f64) {
    if amplitude == 0.0 {
        return;
    }
    let step = offset_hz / fs;
    for (n, s) in samples.iter_mut().enumerate() {
        let cycles = step * n as f64;
        let arg = phase + TAU * (cycles - cycles.floor());
        *s += Complex64::from_polar(amplitude, arg);
    }
}

/// Synthesizes the capture of receiver `rx_id` tuned to `harmonic`.
pub fn synthesize_capture(
    scenario: &Scenario,
    rx_id: &str,
    harmonic: Frequency,
    settings: &CaptureSettings,
) -> Result<IqCapture> {
    let n = settings.sample_count()?;
    let rx = scenario.receiver(rx_id)?;
    let kind = Harmonic::classify(harmonic, scenario.f1, scenario.f2)?;
    let fs = settings.sample_rate;

    let mut samples = vec![Complex64::new(0.0, 0.0); n];

    if scenario.noise_psd_dbfs_hz.is_finite() {
        let sigma = (10f64.powf(scenario.noise_psd_dbfs_hz / 10.0) * fs / 2.0).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(scenario.rng_seed, rx_id, harmonic));
        for s in samples.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *s = Complex64::new(sigma * re, sigma * im);
        }
    }

    for tone in &scenario.interference {
        if tone.rx_id.as_deref().is_none_or(|id| id == rx_id) {
            add_tone(&mut samples, tone.amplitude, tone.phase, tone.offset_hz, fs);
        }
    }

    if scenario.device.is_some() {
        let truth = device_tone(scenario, rx_id, kind)?;
        add_tone(&mut samples, truth.amplitude, truth.phase, settings.tone_offset_hz, fs);
    }

    IqCapture::new(
        harmonic,
        fs,
        samples,
        CaptureMetadata {
            rx_id: rx.id.clone(),
            rx_gain_db: rx.chain_gain_db,
            scenario_hash: scenario.content_hash(),
            seed: scenario.rng_seed,
            timestamp: None,
        },
    )
}

/// One capture per receiver and harmonic, in antenna order, low then high.
pub fn synthesize_all(
    scenario: &Scenario,
    settings: &CaptureSettings,
) -> Result<Vec<(Harmonic, IqCapture)>> {
    let mut out = Vec::new();
    for rx in scenario.receivers() {
        for h in Harmonic::BOTH {
            let f = h.frequency(scenario.f1, scenario.f2)?;
            out.push((h, synthesize_capture(scenario, &rx.id, f, settings)?));
        }
    }
    Ok(out)
}
