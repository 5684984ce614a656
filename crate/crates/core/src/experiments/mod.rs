//! Experiment drivers behind the `weakdyn` command line tool.

pub mod compare;
pub mod metrics;
pub mod run;
pub mod spec;
pub mod sweeps;

pub use compare::{rollouts, train_compare, CompareConfig, CompareData, CompareOutcome, ModelOutcome};
pub use metrics::{calibrate_affine, rel_l2_error, Calibration};
pub use run::{error_record, exit_code, run, RunRecord};
pub use spec::{parse_values, ConfigFile, Experiment, ExperimentSpec};
pub use sweeps::Table;
