//! End-to-end orchestration: ingestion, configuration, the rolling-window
//! experiment, synthetic data and report files.

pub mod config;
pub mod ingest;
pub mod report;
pub mod run;
pub mod synth;
pub mod verify;

pub use config::{RunConfig, SlpSelection, DEFAULT_AR_TRAINING_LENGTH};
pub use ingest::{parse_dataset, read_dataset, write_dataset, Dataset, Rejection};
pub use report::{emit_report, write_grid_table, ScoreRow, VerificationReport, AR_EMOS, EMOS, SLP};
pub use run::{
    assemble_report, pooled_grid, run_dataset, run_experiment, run_station, run_stations, sweep_t1, StationRun,
    SweepRow,
};
pub use synth::{generate_synthetic, SyntheticSpec};
pub use verify::{parse_forecasts, read_forecasts, verify_forecasts};
