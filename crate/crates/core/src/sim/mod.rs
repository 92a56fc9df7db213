//! Monte Carlo harness: configuration, deterministic seeding, parallel
//! drops over an SNR grid and result files.

pub mod config;
pub mod driver;
pub mod output;

pub use config::{parse_schemes, snr_grid, Scheme, SimConfig};
pub use driver::{
    drop_rng, run_drop, run_point, run_sweep, AuditTotals, DropOutcome, PointResult, Purpose,
    SweepContext, SweepResult,
};
pub use output::{emit_plot_data, emit_results, read_csv, read_json, render, OutputFormat, ResultRow};
