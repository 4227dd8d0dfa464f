//! Monte Carlo experiment driver: config files, per-point evaluation, sweeps and
//! the invariant suite behind `validate`.

mod config;
mod run;
mod validate;

pub use config::{db_to_linear, parse_values, ConfigFile, ExperimentSpec, Scheme, SweepVar};
pub use run::{
    average_rate, run_point, run_point_schemes, run_sweep, trial_rng, write_rows, PointDesign, PointResult, ResultRow,
    Sample, SweepOutput,
};
pub use validate::{validate_config, Check};
