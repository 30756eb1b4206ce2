//! Monte Carlo studies of trend-model choice: simulated panels with and
//! without parallel-trend violations, analysed by six trend models, with power,
//! bias, mean-squared error and rule-out power aggregated per scenario.

mod config;
mod dgp;
mod grid;
mod scenario;

pub use config::{standard_grid, ScenarioConfig, Violation, DEFAULT_TRIALS, DEFAULT_VIOLATION_SLOPE};
pub use dgp::{generate_panel, violation_term};
pub use grid::{csv_rows, run_grid, write_csv, CsvRow, CsvSink, NullSink, ResultSink};
pub use scenario::{
    run_scenario, standard_models, ModelSummary, ScenarioResult, SimOptions, DEFAULT_SIM_RANDOMIZATIONS,
};
