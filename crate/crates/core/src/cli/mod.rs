//! Experiment configuration and scenario runners behind the `voi` binary.
//!
//! A run is fully described by an [`ExperimentConfig`]: a scenario name, a
//! seed, an episode count, an output directory and dotted-path overrides
//! applied to [`ModuleConfigs`]. The effective configuration is written
//! next to the artifacts, and `(config, seed)` fixes every emitted byte.

mod config;
mod plot;
mod scenarios;

pub use config::{
    parse_override, Controller, ExperimentConfig, ModuleConfigs, Scenario, ValidationReport,
};
pub use plot::{emit_plotdata, write_tidy, Figure, TidyRow, TIDY_HEADER};
pub use scenarios::{
    augmentation_dominance, case11_comm, case11_with_model, case8_voi, case8_with_model, control_side, decomposition_gap,
    free_decay_error, itvoi_coupled_model, itvoi_independent_model, lemma2_identity, queue_delay_mismatches, run,
    tabular_properties, Case11Artifacts, Case11Run, Case11Summary, Case8Artifacts, Case8Summary, PolicyStats,
    PropertiesSummary, RunOutcome, SuiteResult,
};

const MODULE: &str = "cli";
