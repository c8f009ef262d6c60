//! Sweeps, Monte Carlo trials and reports.

pub mod montecarlo;
pub mod report;
pub mod svg;
pub mod sweep;

pub use montecarlo::{run_montecarlo, McCell, MonteCarloReport, MonteCarloSpec, Trial, TrialError};
pub use report::{emit_report, Report, ReportFormat};
pub use sweep::{run_sweep, CellResult, ExperimentReport, SweepAxis, SweepRow, SweepSpec};
