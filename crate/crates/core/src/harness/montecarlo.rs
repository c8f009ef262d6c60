//! Localization error distributions over noise realizations.

use crate::error::{Error, Result};
use crate::localizer::{localize, Geometry, LocalizerParams, MeasurementSet, OffsetModel};
use crate::model::{Aabb, Position, Scenario};
use crate::synthesis::{synthesize_all, CaptureSettings};

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSpec {
    pub scenario: Scenario,
    pub n_trials: usize,
    /// Noise PSDs to test, dBFS/Hz; `-inf` switches noise off.
    pub noise_levels: Vec<f64>,
    pub rx_subsets: Vec<Vec<String>>,
    pub capture: CaptureSettings,
    pub snr_floor_db: f64,
    pub localizer: LocalizerParams,
    pub search_box: Aabb,
    pub seed: u64,
}

impl MonteCarloSpec {
    /// Defaults: offsets calibrated from the scenario's device, the default
    /// SNR floor and a 70 × 70 × 20 cm search box.
    pub fn new(scenario: Scenario, n_trials: usize, noise_levels: Vec<f64>, rx_subsets: Vec<Vec<String>>) -> Self {
        let offsets = scenario
            .device
            .as_ref()
            .map(|d| OffsetModel::calibrated(d.phase_offsets))
            .unwrap_or_default();
        Self {
            seed: scenario.rng_seed,
            scenario,
            n_trials,
            noise_levels,
            rx_subsets,
            capture: CaptureSettings::default(),
            snr_floor_db: crate::dsp::DEFAULT_SNR_FLOOR_DB,
            localizer: LocalizerParams {
                offsets,
                ..Default::default()
            },
            search_box: default_search_box(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.scenario.device()?;
        if self.n_trials == 0 {
            return Err(Error::InvalidParams("n_trials must be >= 1".into()));
        }
        if self.noise_levels.is_empty() || self.noise_levels.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(Error::InvalidParams("noise levels must be non-empty and below +inf".into()));
        }
        if self.rx_subsets.is_empty() {
            return Err(Error::InvalidParams("at least one receiver subset is required".into()));
        }
        for subset in &self.rx_subsets {
            if subset.is_empty() {
                return Err(Error::InvalidParams("receiver subsets must be non-empty".into()));
            }
            for id in subset {
                self.scenario.receiver(id)?;
            }
        }
        self.capture.sample_count()?;
        Ok(())
    }
}

/// The 70 × 70 × 20 cm volume above the reference grid.
pub fn default_search_box() -> Aabb {
    Aabb::new(Position::new(0.0, 0.0, 0.0), Position::new(0.7, 0.7, 0.2)).expect("positive box")
}

/// Estimate minus truth, cm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialError {
    pub error_cm: f64,
    pub dx_cm: f64,
    pub dy_cm: f64,
    pub dz_cm: f64,
}

impl TrialError {
    fn between(est: Position, truth: Position) -> Self {
        let d = (est - truth) * 100.0;
        Self {
            error_cm: d.norm(),
            dx_cm: d.x,
            dy_cm: d.y,
            dz_cm: d.z,
        }
    }

    /// Index (0 = x, 1 = y, 2 = z) of the largest absolute component.
    pub fn dominant_axis(&self) -> usize {
        let a = [self.dx_cm.abs(), self.dy_cm.abs(), self.dz_cm.abs()];
        let mut best = 0;
        for i in 1..3 {
            if a[i] > a[best] {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub index: usize,
    pub seed: u64,
    pub outcome: std::result::Result<TrialError, String>,
}

/// All trials for one `(noise level, receiver subset)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct McCell {
    pub noise_level: f64,
    pub subset: Vec<String>,
    pub trials: Vec<Trial>,
}

/// Linear-interpolated percentile of sorted data, `q` in `[0, 100]`.
pub fn percentile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo]))
}

impl McCell {
    pub fn errors(&self) -> Vec<TrialError> {
        self.trials.iter().filter_map(|t| t.outcome.as_ref().ok().copied()).collect()
    }

    pub fn failed(&self) -> usize {
        self.trials.iter().filter(|t| t.outcome.is_err()).count()
    }

    fn sorted(&self, key: impl Fn(&TrialError) -> f64) -> Vec<f64> {
        let mut v: Vec<f64> = self.errors().iter().map(key).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    pub fn median_cm(&self) -> Option<f64> {
        percentile(&self.sorted(|e| e.error_cm), 50.0)
    }

    pub fn p90_cm(&self) -> Option<f64> {
        percentile(&self.sorted(|e| e.error_cm), 90.0)
    }

    /// Median absolute error per axis.
    pub fn median_abs_axis_cm(&self) -> [Option<f64>; 3] {
        [
            percentile(&self.sorted(|e| e.dx_cm.abs()), 50.0),
            percentile(&self.sorted(|e| e.dy_cm.abs()), 50.0),
            percentile(&self.sorted(|e| e.dz_cm.abs()), 50.0),
        ]
    }

    /// Fraction of successful trials whose largest component is each axis.
    pub fn dominance(&self) -> [f64; 3] {
        let errs = self.errors();
        let mut counts = [0usize; 3];
        for e in &errs {
            counts[e.dominant_axis()] += 1;
        }
        let n = errs.len().max(1) as f64;
        counts.map(|c| c as f64 / n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub title: String,
    pub cells: Vec<McCell>,
}

impl MonteCarloReport {
    pub fn cell(&self, noise_level: f64, subset: &[String]) -> Option<&McCell> {
        self.cells
            .iter()
            .find(|c| c.noise_level.total_cmp(&noise_level).is_eq() && c.subset == subset)
    }

    pub fn failed_trials(&self) -> usize {
        self.cells.iter().map(McCell::failed).sum()
    }
}

/// Seed of trial `index`; shared by every noise level and subset.
pub fn trial_seed(seed: u64, index: usize) -> u64 {
    let mut x = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Runs all trials. Each trial synthesizes one set of captures that every
/// receiver subset then localizes from, so subsets see identical noise.
pub fn run_montecarlo(spec: &MonteCarloSpec) -> Result<MonteCarloReport> {
    spec.validate()?;
    let truth = spec.scenario.device()?.position;
    let geometry = Geometry::from_scenario(&spec.scenario);
    let mut cells: Vec<McCell> = spec
        .noise_levels
        .iter()
        .flat_map(|&noise_level| {
            spec.rx_subsets.iter().map(move |subset| McCell {
                noise_level,
                subset: subset.clone(),
                trials: Vec::with_capacity(spec.n_trials),
            })
        })
        .collect();
    for (li, &noise) in spec.noise_levels.iter().enumerate() {
        for index in 0..spec.n_trials {
            let seed = trial_seed(spec.seed, index);
            let mut s = spec.scenario.clone();
            s.noise_psd_dbfs_hz = noise;
            s.rng_seed = seed;
            let measured = synthesize_all(&s, &spec.capture).and_then(|caps| {
                let caps: Vec<_> = caps.into_iter().map(|(_, c)| c).collect();
                MeasurementSet::from_captures(geometry.clone(), &caps, spec.capture.tone_offset_hz, spec.snr_floor_db)
            });
            for (si, subset) in spec.rx_subsets.iter().enumerate() {
                let outcome = match &measured {
                    Err(e) => Err(e.to_string()),
                    Ok((ms, _)) => {
                        let sub = ms.restricted_to(subset);
                        localize(&sub, &spec.search_box, &spec.localizer)
                            .map(|r| TrialError::between(r.position, truth))
                            .map_err(|e| e.to_string())
                    }
                };
                cells[li * spec.rx_subsets.len() + si].trials.push(Trial { index, seed, outcome });
            }
        }
    }
    Ok(MonteCarloReport {
        title: format!("{} localization error", spec.scenario.name),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn percentiles() {
        assert_eq!(percentile(&[], 50.0), None);
        assert_eq!(percentile(&[3.0], 90.0), Some(3.0));
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0], 50.0), Some(2.5));
        assert!((percentile(&[0.0, 10.0], 90.0).unwrap() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn noiseless_three_receivers() {
        let s = presets::with_third_receiver(presets::air_c1());
        let mut spec = MonteCarloSpec::new(s, 1, vec![f64::NEG_INFINITY], vec![ids(&["RX1", "RX2", "RX3"])]);
        spec.capture.duration_s = 1e-3;
        let r = run_montecarlo(&spec).unwrap();
        assert_eq!(r.cells.len(), 1);
        let c = &r.cells[0];
        assert_eq!(c.trials.len(), 1);
        assert!(c.median_cm().unwrap() < 0.1, "{:?}", c.trials);
        assert_eq!(c.median_cm(), c.p90_cm());
    }

    #[test]
    fn unusable_subset_recorded() {
        let s = presets::air_c1();
        let mut spec = MonteCarloSpec::new(s, 2, vec![-20.0], vec![ids(&["RX1"])]);
        spec.capture.duration_s = 1e-3;
        let r = run_montecarlo(&spec).unwrap();
        assert_eq!(r.failed_trials(), 2);
        assert!(r.cells[0].trials[0].outcome.as_ref().unwrap_err().contains("measurement"));
    }

    #[test]
    fn spec_validation() {
        let s = presets::air_c1();
        assert!(run_montecarlo(&MonteCarloSpec::new(s.clone(), 0, vec![-80.0], vec![ids(&["RX1"])])).is_err());
        assert!(run_montecarlo(&MonteCarloSpec::new(s.clone(), 1, vec![-80.0], vec![vec![]])).is_err());
        assert!(matches!(
            run_montecarlo(&MonteCarloSpec::new(s, 1, vec![-80.0], vec![ids(&["RX7"])])),
            Err(Error::UnknownReceiver(_))
        ));
    }
}
