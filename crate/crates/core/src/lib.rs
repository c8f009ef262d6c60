//! Harmonic backscatter localization toolkit.
//!
//! A passive diode tag embedded in layered tissue is illuminated by two
//! carriers `f1` and `f2`. Its nonlinearity re-radiates intermodulation
//! products at `2·f2 − f1` and `f1 + f2`, which receivers capture as complex
//! baseband IQ. This crate simulates that chain end to end and recovers the
//! tag position from the harmonic phases:
//!
//! * [`model`]: shared domain types (frequencies, positions, antennas, tissue
//!   slabs, scenarios, IQ captures) in SI units.
//! * [`scenario_file`]: the versioned JSON scenario format (cm / MHz / dB).
//! * [`propagation`]: straight-ray layered-medium path model.
//! * [`backscatter`]: closed-form small-signal diode intermodulation.
//! * [`synthesis`]: forward simulator and the `.cf32` capture format.
//! * [`dsp`]: Welch PSD, spectrogram, peak power, relative gain, tone phasors.
//! * [`localizer`]: wrapped-phase objective minimized by multi-start Adam.
//! * [`harness`]: sweeps, Monte Carlo studies and report emission.

// NaN must fail validation, so checks are written as negated comparisons
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backscatter;
pub mod dsp;
pub mod error;
pub mod harness;
pub mod localizer;
pub mod model;
pub mod phase;
pub mod presets;
pub mod propagation;
pub mod scenario_file;
pub mod synthesis;

pub use error::{Error, Result};
pub use model::{
    harmonics_of, material_at, Aabb, AntennaPattern, AntennaRole, AntennaSpec, CaptureMetadata,
    DevicePlacement, Frequency, Harmonic, InterferenceTone, IqCapture, MediumStack, PerHarmonic,
    Position, Scenario, TissueSlab, SPEED_OF_LIGHT,
};
