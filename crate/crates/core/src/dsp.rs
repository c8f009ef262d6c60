//! Spectral estimates and tone measurement on IQ captures.
//!
//! PSD bins are normalized so that a full-scale complex tone centered on a
//! bin reads 0 dBFS with any window (amplitude-correct), which makes peak
//! readings directly comparable across windows. With a rectangular window
//! the bins also sum to the mean sample power.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::model::{Frequency, IqCapture};
use crate::phase::wrap_2pi;

/// Floor reported for bins with zero power, dB.
pub const POWER_FLOOR_DB: f64 = -300.0;
/// Tones below this SNR are rejected by [`extract_tone_phasor`], dB.
pub const DEFAULT_SNR_FLOOR_DB: f64 = -10.0;

pub const DEFAULT_FFT_SIZE: usize = 4096;
pub const DEFAULT_OVERLAP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Rectangular,
    Hann,
}

impl Window {
    pub fn name(self) -> &'static str {
        match self {
            Window::Rectangular => "rectangular",
            Window::Hann => "hann",
        }
    }

    /// Periodic (DFT-even) coefficients.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (TAU * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchConfig {
    pub fft_size: usize,
    /// Fraction of each segment shared with the next, in `[0, 1)`.
    pub overlap: f64,
    pub window: Window,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self {
            fft_size: DEFAULT_FFT_SIZE,
            overlap: DEFAULT_OVERLAP,
            window: Window::Hann,
        }
    }
}

impl WelchConfig {
    pub fn hop(&self) -> usize {
        ((self.fft_size as f64 * (1.0 - self.overlap)).round() as usize).max(1)
    }

    fn validate(&self) -> Result<()> {
        if !self.fft_size.is_power_of_two() || self.fft_size < 2 {
            return Err(Error::InvalidParams(format!(
                "fft size {} must be a power of two >= 2",
                self.fft_size
            )));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(Error::InvalidParams(format!(
                "overlap {} must be in [0, 1)",
                self.overlap
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsdEstimate {
    pub center_frequency: Frequency,
    pub sample_rate: f64,
    /// Absolute bin frequencies, ascending, Hz.
    pub bin_frequencies: Vec<f64>,
    /// dBFS per bin.
    pub power_db: Vec<f64>,
    pub fft_size: usize,
    pub window: Window,
    pub segment_count: usize,
}

impl PsdEstimate {
    pub fn bin_width(&self) -> f64 {
        self.sample_rate / self.fft_size as f64
    }

    /// Index of the bin nearest `f`, or an error if `f` is outside the span.
    pub fn bin_of(&self, f: f64) -> Result<usize> {
        let df = self.bin_width();
        let first = self.bin_frequencies[0];
        let last = self.bin_frequencies[self.fft_size - 1];
        if !(f >= first - df / 2.0 && f <= last + df / 2.0) {
            return Err(Error::FrequencyOutOfSpan(f));
        }
        Ok((((f - first) / df).round() as usize).min(self.fft_size - 1))
    }
}

pub fn to_db(linear: f64) -> f64 {
    if linear > 0.0 {
        (10.0 * linear.log10()).max(POWER_FLOOR_DB)
    } else {
        POWER_FLOOR_DB
    }
}

/// Windowed periodograms of consecutive segments, natural FFT order, linear.
struct Periodograms {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    scale: f64,
}

impl Periodograms {
    fn new(fft_size: usize, window: Window) -> Self {
        let w = window.coefficients(fft_size);
        let sum: f64 = w.iter().sum();
        Self {
            fft: FftPlanner::new().plan_fft_forward(fft_size),
            window: w,
            scale: 1.0 / (sum * sum),
        }
    }

    /// Periodogram of one segment, rearranged to ascending frequency.
    fn segment(&self, seg: &[Complex64], buf: &mut Vec<Complex64>) -> Vec<f64> {
        buf.clear();
        buf.extend(seg.iter().zip(&self.window).map(|(x, w)| x * *w));
        self.fft.process(buf);
        let n = buf.len();
        let half = n / 2;
        (0..n)
            .map(|j| buf[(j + half) % n].norm_sqr() * self.scale)
            .collect()
    }
}

fn segment_count(n: usize, fft_size: usize, hop: usize) -> Result<usize> {
    if n < fft_size {
        return Err(Error::CaptureTooShort {
            needed: fft_size,
            got: n,
        });
    }
    Ok((n - fft_size) / hop + 1)
}

fn bin_frequencies(c: &IqCapture, fft_size: usize) -> Vec<f64> {
    let df = c.sample_rate / fft_size as f64;
    let half = (fft_size / 2) as f64;
    (0..fft_size)
        .map(|j| c.center_frequency.hz() + (j as f64 - half) * df)
        .collect()
}

/// Welch PSD with a Hann window.
pub fn welch_psd(c: &IqCapture, fft_size: usize, overlap: f64) -> Result<PsdEstimate> {
    welch_psd_with(
        c,
        &WelchConfig {
            fft_size,
            overlap,
            window: Window::Hann,
        },
    )
}

/// Welch PSD: averaged windowed periodograms of overlapping segments.
pub fn welch_psd_with(c: &IqCapture, cfg: &WelchConfig) -> Result<PsdEstimate> {
    cfg.validate()?;
    let hop = cfg.hop();
    let count = segment_count(c.samples.len(), cfg.fft_size, hop)?;
    let pg = Periodograms::new(cfg.fft_size, cfg.window);
    let mut acc = vec![0.0; cfg.fft_size];
    let mut buf = Vec::with_capacity(cfg.fft_size);
    for k in 0..count {
        let seg = &c.samples[k * hop..k * hop + cfg.fft_size];
        for (a, p) in acc.iter_mut().zip(pg.segment(seg, &mut buf)) {
            *a += p;
        }
    }
    Ok(PsdEstimate {
        center_frequency: c.center_frequency,
        sample_rate: c.sample_rate,
        bin_frequencies: bin_frequencies(c, cfg.fft_size),
        power_db: acc.into_iter().map(|p| to_db(p / count as f64)).collect(),
        fft_size: cfg.fft_size,
        window: cfg.window,
        segment_count: count,
    })
}

/// Time-frequency power matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub bin_frequencies: Vec<f64>,
    /// Start time of each column, seconds.
    pub times: Vec<f64>,
    /// `columns[t][f]`, dBFS per bin.
    pub columns: Vec<Vec<f64>>,
}

pub fn spectrogram(c: &IqCapture, fft_size: usize, hop: usize, window: Window) -> Result<Spectrogram> {
    WelchConfig {
        fft_size,
        overlap: 0.0,
        window,
    }
    .validate()?;
    if hop == 0 {
        return Err(Error::InvalidParams("hop must be >= 1".into()));
    }
    let count = segment_count(c.samples.len(), fft_size, hop)?;
    let pg = Periodograms::new(fft_size, window);
    let mut buf = Vec::with_capacity(fft_size);
    let columns = (0..count)
        .map(|k| {
            pg.segment(&c.samples[k * hop..k * hop + fft_size], &mut buf)
                .into_iter()
                .map(to_db)
                .collect()
        })
        .collect();
    Ok(Spectrogram {
        bin_frequencies: bin_frequencies(c, fft_size),
        times: (0..count).map(|k| (k * hop) as f64 / c.sample_rate).collect(),
        columns,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakPower {
    pub power_db: f64,
    pub bin_index: usize,
    pub frequency_hz: f64,
}

/// Strongest bin within `±search_bins` of the bin nearest `f`.
pub fn peak_power_db(psd: &PsdEstimate, f: Frequency, search_bins: usize) -> Result<PeakPower> {
    let center = psd.bin_of(f.hz())?;
    let lo = center.saturating_sub(search_bins);
    let hi = (center + search_bins).min(psd.fft_size - 1);
    let mut best = lo;
    for i in lo..=hi {
        if psd.power_db[i] > psd.power_db[best] {
            best = i;
        }
    }
    Ok(PeakPower {
        power_db: psd.power_db[best],
        bin_index: best,
        frequency_hz: psd.bin_frequencies[best],
    })
}

/// Bins either side of the target searched by [`relative_gain_db`].
pub const RELATIVE_GAIN_SEARCH_BINS: usize = 1;

/// Difference of two peak levels; positive means the first is stronger.
pub fn level_difference_db(with_db: f64, without_db: f64) -> f64 {
    with_db - without_db
}

/// Peak level with the device minus peak level without it, at `f`.
pub fn relative_gain_db(psd_with: &PsdEstimate, psd_without: &PsdEstimate, f: Frequency) -> Result<f64> {
    if psd_with.center_frequency != psd_without.center_frequency {
        return Err(Error::IncompatiblePsds(format!(
            "center {} vs {}",
            psd_with.center_frequency, psd_without.center_frequency
        )));
    }
    if psd_with.sample_rate != psd_without.sample_rate {
        return Err(Error::IncompatiblePsds(format!(
            "sample rate {} vs {}",
            psd_with.sample_rate, psd_without.sample_rate
        )));
    }
    if psd_with.fft_size != psd_without.fft_size {
        return Err(Error::IncompatiblePsds(format!(
            "fft size {} vs {}",
            psd_with.fft_size, psd_without.fft_size
        )));
    }
    let with = peak_power_db(psd_with, f, RELATIVE_GAIN_SEARCH_BINS)?;
    let without = peak_power_db(psd_without, f, RELATIVE_GAIN_SEARCH_BINS)?;
    Ok(level_difference_db(with.power_db, without.power_db))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TonePhasor {
    /// Absolute frequency of the tone.
    pub frequency: Frequency,
    pub amplitude: f64,
    /// Radians in `[0, 2π)`.
    pub phase: f64,
    /// Tone power over residual power per sample; `-inf` when no tone.
    pub snr_db: f64,
}

/// Correlates the capture against `e^{j2π·offset·n/fs}` without any SNR check.
pub fn estimate_tone(c: &IqCapture, offset_hz: f64) -> Result<TonePhasor> {
    let n = c.samples.len();
    if n < crate::synthesis::MIN_CAPTURE_SAMPLES {
        return Err(Error::CaptureTooShort {
            needed: crate::synthesis::MIN_CAPTURE_SAMPLES,
            got: n,
        });
    }
    let nyquist = c.sample_rate / 2.0;
    if !(offset_hz.abs() < nyquist) {
        return Err(Error::AliasedTone {
            offset_hz,
            nyquist_hz: nyquist,
        });
    }
    let step = offset_hz / c.sample_rate;
    let reference = |k: usize| {
        let cycles = step * k as f64;
        Complex64::from_polar(1.0, TAU * (cycles - cycles.floor()))
    };
    let phasor = c
        .samples
        .iter()
        .enumerate()
        .map(|(k, x)| x * reference(k).conj())
        .sum::<Complex64>()
        / n as f64;
    let residual = c
        .samples
        .iter()
        .enumerate()
        .map(|(k, x)| (x - phasor * reference(k)).norm_sqr())
        .sum::<f64>()
        / n as f64;

    let amplitude = phasor.norm();
    let snr_db = if amplitude == 0.0 {
        f64::NEG_INFINITY
    } else if residual == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (amplitude * amplitude / residual).log10()
    };
    Ok(TonePhasor {
        frequency: Frequency::from_hz(c.center_frequency.hz() + offset_hz)?,
        amplitude,
        phase: wrap_2pi(phasor.arg()),
        snr_db,
    })
}

/// Tone phasor at `offset_hz`, rejected below the default SNR floor.
pub fn extract_tone_phasor(c: &IqCapture, offset_hz: f64) -> Result<TonePhasor> {
    extract_tone_phasor_with_floor(c, offset_hz, DEFAULT_SNR_FLOOR_DB)
}

pub fn extract_tone_phasor_with_floor(c: &IqCapture, offset_hz: f64, floor_db: f64) -> Result<TonePhasor> {
    let t = estimate_tone(c, offset_hz)?;
    if t.snr_db.is_nan() || t.snr_db < floor_db {
        return Err(Error::InsufficientSignal {
            snr_db: t.snr_db,
            floor_db,
        });
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CaptureMetadata;
    use std::f64::consts::FRAC_PI_4;

    fn capture(samples: Vec<Complex64>) -> IqCapture {
        IqCapture::new(
            Frequency::from_mhz(910.0).unwrap(),
            1e6,
            samples,
            CaptureMetadata {
                rx_id: "RX1".into(),
                rx_gain_db: 0.0,
                scenario_hash: String::new(),
                seed: 0,
                timestamp: None,
            },
        )
        .unwrap()
    }

    fn tone(n: usize, amp: f64, phase: f64, cycles_per_sample: f64) -> Vec<Complex64> {
        (0..n)
            .map(|k| Complex64::from_polar(amp, phase + TAU * cycles_per_sample * k as f64))
            .collect()
    }

    #[test]
    fn on_bin_tone_rectangular() {
        let n = 256;
        let c = capture(tone(n, 1.0, 0.3, 10.0 / n as f64));
        let cfg = WelchConfig {
            fft_size: n,
            overlap: 0.0,
            window: Window::Rectangular,
        };
        let psd = welch_psd_with(&c, &cfg).unwrap();
        let peak = psd.bin_of(910e6 + 10.0 * 1e6 / n as f64).unwrap();
        assert!(psd.power_db[peak].abs() < 1e-9);
        for (i, p) in psd.power_db.iter().enumerate() {
            if i != peak {
                assert!(*p < -200.0, "bin {i}: {p}");
            }
        }
        assert!(psd.bin_frequencies.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn silence_hits_floor() {
        let c = capture(vec![Complex64::new(0.0, 0.0); 1024]);
        let psd = welch_psd(&c, 256, 0.5).unwrap();
        assert!(psd.power_db.iter().all(|p| *p == POWER_FLOOR_DB));
    }

    #[test]
    fn short_capture_rejected() {
        let c = capture(vec![Complex64::new(1.0, 0.0); 100]);
        assert!(matches!(welch_psd(&c, 256, 0.5), Err(Error::CaptureTooShort { .. })));
        assert!(matches!(
            spectrogram(&c, 256, 128, Window::Hann),
            Err(Error::CaptureTooShort { .. })
        ));
        assert!(welch_psd(&capture(vec![Complex64::new(1.0, 0.0); 1000]), 300, 0.5).is_err());
    }

    #[test]
    fn spectrogram_columns() {
        let c = capture(tone(1024, 1.0, 0.0, 0.1));
        let s = spectrogram(&c, 256, 128, Window::Hann).unwrap();
        assert_eq!(s.columns.len(), 7);
    }

    #[test]
    fn stationary_tone_constant_peak() {
        let c = capture(tone(8192, 0.5, 1.0, 37.0 / 512.0));
        let s = spectrogram(&c, 512, 256, Window::Hann).unwrap();
        let peaks: Vec<f64> = s
            .columns
            .iter()
            .map(|col| col.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let first = peaks[0];
        assert!(peaks.iter().all(|p| (p - first).abs() < 0.1));
    }

    #[test]
    fn late_tone_shows_late() {
        let n = 8192;
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        for (k, v) in tone(n, 1.0, 0.0, 0.125).into_iter().enumerate().skip(n / 2) {
            x[k] = v;
        }
        let s = spectrogram(&capture(x), 512, 512, Window::Hann).unwrap();
        let bin = s.bin_frequencies.iter().position(|f| (*f - 910e6 - 125e3).abs() < 1.0).unwrap();
        for (t, col) in s.columns.iter().enumerate() {
            if t < 8 {
                assert!(col[bin] <= POWER_FLOOR_DB + 1.0);
            } else {
                assert!(col[bin] > -1.0);
            }
        }
    }

    #[test]
    fn peak_search() {
        let n = 1024;
        let c = capture(tone(n, 1.0, 0.0, 100.0 / n as f64));
        let psd = welch_psd_with(
            &c,
            &WelchConfig {
                fft_size: n,
                overlap: 0.0,
                window: Window::Rectangular,
            },
        )
        .unwrap();
        let f = Frequency::from_hz(910e6 + 100.0 * 1e6 / n as f64).unwrap();
        let p = peak_power_db(&psd, f, 0).unwrap();
        assert_eq!(p.power_db, psd.power_db[p.bin_index]);
        assert!(p.power_db.abs() < 1e-9);
        let outside = Frequency::from_hz(912e6).unwrap();
        assert!(matches!(peak_power_db(&psd, outside, 1), Err(Error::FrequencyOutOfSpan(_))));
    }

    #[test]
    fn scalloping_bound() {
        let n = 1024;
        let c = capture(tone(8 * n, 1.0, 0.0, 100.5 / n as f64));
        let psd = welch_psd(&c, n, 0.5).unwrap();
        let f = Frequency::from_hz(910e6 + 100.5 * 1e6 / n as f64).unwrap();
        let p = peak_power_db(&psd, f, 1).unwrap();
        assert!(p.power_db > -1.5 && p.power_db <= 0.0, "{}", p.power_db);
    }

    #[test]
    fn relative_gain_rules() {
        let n = 512;
        let c = capture(tone(n * 4, 0.1, 0.0, 0.25));
        let psd = welch_psd(&c, n, 0.5).unwrap();
        let f = Frequency::from_hz(910e6 + 250e3).unwrap();
        assert_eq!(relative_gain_db(&psd, &psd, f).unwrap(), 0.0);
        let other = welch_psd(&c, n / 2, 0.5).unwrap();
        assert!(matches!(relative_gain_db(&psd, &other, f), Err(Error::IncompatiblePsds(_))));
        assert!((level_difference_db(-58.71, -66.76) - 8.05).abs() < 0.005);
        assert!((level_difference_db(-77.6, -75.24) + 2.36).abs() < 0.005);
    }

    #[test]
    fn noise_free_phasor() {
        let n = 10_000;
        let c = capture(tone(n, 0.5, FRAC_PI_4, 100e3 / 1e6));
        let t = extract_tone_phasor(&c, 100e3).unwrap();
        assert!((t.amplitude - 0.5).abs() < 1e-9);
        assert!((t.phase - FRAC_PI_4).abs() < 1e-9);
        assert_eq!(t.frequency.hz(), 910.1e6);
    }

    #[test]
    fn silence_has_no_phasor() {
        let c = capture(vec![Complex64::new(0.0, 0.0); 64]);
        assert!(matches!(extract_tone_phasor(&c, 1e3), Err(Error::InsufficientSignal { .. })));
        assert!(matches!(estimate_tone(&c, 6e5), Err(Error::AliasedTone { .. })));
    }

    #[test]
    fn phasor_scales_linearly() {
        let n = 4096;
        let x: Vec<Complex64> = tone(n, 0.3, 2.0, 0.0123)
            .into_iter()
            .zip(tone(n, 0.05, 0.4, 0.31))
            .map(|(a, b)| a + b)
            .collect();
        let base = estimate_tone(&capture(x.clone()), 12_300.0).unwrap();
        let scaled = estimate_tone(&capture(x.iter().map(|v| v * 3.5).collect()), 12_300.0).unwrap();
        assert!((scaled.amplitude - 3.5 * base.amplitude).abs() < 1e-12);
        assert!((scaled.phase - base.phase).abs() < 1e-12);
    }
}
