//! Configuration, time stepping, experiment harnesses and file output.

mod audit;
pub mod bench;
mod config;
mod experiments;
mod run;

pub use audit::{audit_run, AuditReport, MARGIN_TOL, MASS_DRIFT_TOL};
pub use config::{Bump, DiagnosticsToggles, FieldSpec, InitialSpec, Patch, RunConfig};
pub use experiments::{
    compare_schemes, convergence_study, interpolate, output_times, restrict, stability_experiment, Comparison,
    ConvergenceTable, LevelError, StabilityReport,
};
pub use run::{
    advance, diagnostics_csv, initial_datum, manifest, run_setup, BoundReport, DiagnosticsRow, RunReport, SeriesPoint,
    Setup, Simulation, StepRecord, Timings, CSV_HEADER,
};
