//! Configured runs, tolerance sweeps and their CSV and summary outputs.

mod commands;
mod config;
mod sweep;
mod validated;

pub use self::commands::{
    execute_run, execute_sweep, execute_verify, parse_tolerances, tip_from_summary, verify_files,
    write_run, write_sweep, RunArtifacts, VerifyOutcome, CHAIN_FILE, COSTS_FILE, PRECISION_FILE,
    SUMMARY_FILE,
};
pub use self::config::{
    ComputationConfig, ExperimentSection, NetworkSection, OutputSection, RandomizedSection,
    ResolvedRun, RunConfig, Scenario, ValidationSection,
};
pub use self::sweep::{run_sweep, sweep_scenarios, CostRow, PrecisionRow, SweepOutput};
pub use self::validated::{run_validated, run_validated_with, vanilla_run, ExperimentRun};
