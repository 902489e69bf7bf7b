//! Scenario files, the bundled scenario library, and the batch runner.

pub mod library;
pub mod run;
pub mod scenario;

pub use run::{run_scenario, run_suite, Report, RunMetrics, RunOptions, ScenarioRun, TaskRunner};
pub use scenario::{
    load_scenario, save_scenario, target_of, PlannerKind, Scenario, ScenarioError, SuiteManifest,
};
