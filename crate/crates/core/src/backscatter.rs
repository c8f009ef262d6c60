//! Behavioral model of the diode tag.
//!
//! The diode is treated as a memoryless polynomial `y = a2·x² + a3·x³` driven
//! by two incident tones. Expanding the square and cube gives the products
//! the receivers listen for:
//!
//! * `f1 + f2` from `x²`, amplitude `a2·A1·A2`, phase `φ1 + φ2`
//! * `2·f2 − f1` from `x³`, amplitude `(3/4)·a3·A1·A2²`, phase `2·φ2 − φ1`
//!
//! Both are then reduced by the re-radiation loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Harmonic;
use crate::phase::wrap_2pi;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiodeModel {
    /// Second-order coefficient.
    pub a2: f64,
    /// Third-order coefficient.
    pub a3: f64,
    pub reradiation_loss_db: f64,
}

impl Default for DiodeModel {
    /// Calibration defaults, not measured device parameters.
    fn default() -> Self {
        Self {
            a2: 0.1,
            a3: 0.05,
            reradiation_loss_db: 10.0,
        }
    }
}

impl DiodeModel {
    pub fn validate(&self) -> Result<()> {
        if !self.a2.is_finite() || !self.a3.is_finite() {
            return Err(Error::InvalidScenario("diode coefficients must be finite".into()));
        }
        if !(self.reradiation_loss_db >= 0.0 && self.reradiation_loss_db.is_finite()) {
            return Err(Error::InvalidScenario("re-radiation loss must be >= 0 dB".into()));
        }
        Ok(())
    }

    fn loss_factor(&self) -> f64 {
        10f64.powf(-self.reradiation_loss_db / 20.0)
    }
}

/// A single real sinusoid `amplitude·cos(2πft + phase)` as seen by the tag.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Tone {
    pub amplitude: f64,
    pub phase: f64,
}

/// The two carriers arriving at the device.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IncidentTones {
    pub f1: Tone,
    pub f2: Tone,
}

/// The intermodulation products re-radiated by the device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixProducts {
    /// `2·f2 − f1`.
    pub low: Tone,
    /// `f1 + f2`.
    pub high: Tone,
}

impl MixProducts {
    pub fn get(&self, h: Harmonic) -> Tone {
        match h {
            Harmonic::Low => self.low,
            Harmonic::High => self.high,
        }
    }
}

/// Closed-form small-signal intermodulation of two tones.
pub fn mix(diode: &DiodeModel, tones: &IncidentTones) -> MixProducts {
    let (a1, p1) = (tones.f1.amplitude, tones.f1.phase);
    let (a2, p2) = (tones.f2.amplitude, tones.f2.phase);
    let loss = diode.loss_factor();
    MixProducts {
        low: Tone {
            amplitude: (0.75 * diode.a3 * a1 * a2 * a2).abs() * loss,
            phase: wrap_2pi(2.0 * p2 - p1 + sign_phase(diode.a3)),
        },
        high: Tone {
            amplitude: (diode.a2 * a1 * a2).abs() * loss,
            phase: wrap_2pi(p1 + p2 + sign_phase(diode.a2)),
        },
    }
}

// a negative coefficient flips the product, i.e. adds π
fn sign_phase(coef: f64) -> f64 {
    if coef < 0.0 {
        std::f64::consts::PI
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn tones(a1: f64, p1: f64, a2: f64, p2: f64) -> IncidentTones {
        IncidentTones {
            f1: Tone { amplitude: a1, phase: p1 },
            f2: Tone { amplitude: a2, phase: p2 },
        }
    }

    const UNIT: DiodeModel = DiodeModel {
        a2: 1.0,
        a3: 1.0,
        reradiation_loss_db: 0.0,
    };

    #[test]
    fn no_second_tone_no_products() {
        let p = mix(&DiodeModel::default(), &tones(1.0, 0.3, 0.0, 1.0));
        assert_eq!(p.low.amplitude, 0.0);
        assert_eq!(p.high.amplitude, 0.0);
    }

    #[test]
    fn unit_coefficients() {
        let p = mix(&UNIT, &tones(1.0, 0.0, 1.0, 0.0));
        assert_eq!(p.high.amplitude, 1.0);
        assert_eq!(p.high.phase, 0.0);
        assert_eq!(p.low.amplitude, 0.75);
        assert_eq!(p.low.phase, 0.0);
    }

    #[test]
    fn phase_law() {
        let p = mix(&UNIT, &tones(1.0, 0.0, 1.0, FRAC_PI_2));
        assert!((p.low.phase - PI).abs() < 1e-15);
        assert!((p.high.phase - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn reradiation_loss_applies_to_both() {
        let d = DiodeModel {
            reradiation_loss_db: 20.0,
            ..UNIT
        };
        let p = mix(&d, &tones(1.0, 0.0, 1.0, 0.0));
        assert!((p.high.amplitude - 0.1).abs() < 1e-15);
        assert!((p.low.amplitude - 0.075).abs() < 1e-15);
    }

    proptest::proptest! {
        #[test]
        fn amplitude_scaling(a1 in 0.01f64..2.0, a2 in 0.01f64..2.0, p1 in 0.0f64..6.2, p2 in 0.0f64..6.2) {
            let d = DiodeModel::default();
            let base = mix(&d, &tones(a1, p1, a2, p2));
            let doubled = mix(&d, &tones(a1, p1, 2.0 * a2, p2));
            proptest::prop_assert!((doubled.low.amplitude - 4.0 * base.low.amplitude).abs() <= 1e-12 * base.low.amplitude.max(1e-300) * 4.0);
            proptest::prop_assert!((doubled.high.amplitude - 2.0 * base.high.amplitude).abs() <= 1e-12 * base.high.amplitude * 2.0);
            proptest::prop_assert!(crate::phase::circular_diff(base.low.phase, 2.0 * p2 - p1).abs() < 1e-12);
            proptest::prop_assert!(crate::phase::circular_diff(base.high.phase, p1 + p2).abs() < 1e-12);
        }
    }
}
