//! Scenario-driven benchmark harness: load scenario files, run every
//! (scenario, mode, seed) cell, score the clean samples and write reports.

mod config;
mod report;
mod runner;
mod scenario;

pub use config::{RunConfig, ScheduleConfig, SweepKnob, CONFIG_SCHEMA_VERSION};
pub use report::{
    emit_trajectory_csv, trajectory_csv_string, write_report, write_sweep, Aggregate, BenchReport,
    CellResult, SweepReport, SweepRow, REPORT_COLUMNS,
};
pub use runner::{cell_seed, run_benchmark, run_cell, run_scenario_mode, run_sweep, ScenarioRuntime};
pub use scenario::{load_scenarios, parse_scenarios, Category, ScenarioSpec, SCENARIO_SCHEMA_VERSION};
