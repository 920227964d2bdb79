//! Experiment configuration, seeded execution, traces and reports.

pub mod config;
pub mod exec;
pub mod report;
pub mod trace;

pub use config::{load_config, paper_suite, ConfigError, ExperimentConfig, PAPER_SUITE};
pub use exec::{run_scenario, RunSettings, ScenarioRuns};
pub use report::{render_report, report_from_traces, run_experiment, ExperimentReport, ReportFormat, RunError, ScenarioReport};
pub use trace::{replay, EventKind, ReplayedRun, TraceEvent};
