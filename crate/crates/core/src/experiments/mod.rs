//! Seeded Monte-Carlo harness: config parsing, sweeps over RIS size, distance
//! and jamming power, and CSV/JSON result files.

mod config;
mod run;

pub use config::{validate_config, ConfigErrors, ConfigIssue, ExperimentConfig, Scheme, SweepKind, DESK_SCALE_MAX_L};
pub use run::{aggregate, raw_csv, run_experiment, scenario_at, trial_channels, trial_seed, AggregateRow, ResultRecord, RunOutput, TrialChannels};
