use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("frequency must be positive and finite, got {0} Hz")]
    InvalidFrequency(f64),
    #[error("carrier frequencies must differ (both {0} Hz)")]
    EqualCarriers(f64),
    #[error("2·f2 − f1 is not positive for f1 = {f1} Hz, f2 = {f2} Hz")]
    NonPositiveHarmonic { f1: f64, f2: f64 },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("path endpoints coincide")]
    DegeneratePath,
    #[error("scenario has no backscatter device")]
    MissingDevice,
    #[error("unknown receiver `{0}`")]
    UnknownReceiver(String),
    #[error("capture would be empty (duration {0} s)")]
    EmptyCapture(f64),
    #[error("capture needs at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("tone offset {offset_hz} Hz is beyond Nyquist ({nyquist_hz} Hz)")]
    AliasedTone { offset_hz: f64, nyquist_hz: f64 },
    #[error("capture file has {len} bytes, not a whole number of cf32 samples")]
    TruncatedFile { len: u64 },
    #[error("missing sidecar metadata {0}")]
    MissingSidecar(PathBuf),
    #[error("sidecar schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("capture has {got} samples, need at least {needed}")]
    CaptureTooShort { needed: usize, got: usize },
    #[error("frequency {0} Hz is outside the PSD span")]
    FrequencyOutOfSpan(f64),
    #[error("incompatible PSDs: {0}")]
    IncompatiblePsds(String),
    #[error("tone SNR {snr_db:.1} dB is below the {floor_db:.1} dB floor")]
    InsufficientSignal { snr_db: f64, floor_db: f64 },
    #[error("objective became non-finite")]
    NonFiniteObjective,
    #[error("no usable measurements")]
    NoUsableMeasurements,
    #[error("every start hit a non-finite objective")]
    NoConvergedStart,
    #[error("report has no rows")]
    EmptyReport,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
