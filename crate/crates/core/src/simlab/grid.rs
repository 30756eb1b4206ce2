use std::io::Write;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::simlab::config::ScenarioConfig;
use crate::simlab::scenario::{run_scenario, ScenarioResult, SimOptions};

/// Receives scenario results as they complete, in completion order.
pub trait ResultSink: Send {
    fn accept(&mut self, result: &ScenarioResult) -> std::io::Result<()>;
}

impl ResultSink for Vec<ScenarioResult> {
    fn accept(&mut self, result: &ScenarioResult) -> std::io::Result<()> {
        self.push(result.clone());
        Ok(())
    }
}

/// Discards results.
pub struct NullSink;

impl ResultSink for NullSink {
    fn accept(&mut self, _: &ScenarioResult) -> std::io::Result<()> {
        Ok(())
    }
}

/// Appends CSV rows for each completed scenario and flushes after each one.
pub struct CsvSink<W: Write + Send> {
    writer: csv::Writer<W>,
}

impl<W: Write + Send> CsvSink<W> {
    pub fn new(inner: W) -> Self {
        Self {
            writer: csv::Writer::from_writer(inner),
        }
    }
}

impl<W: Write + Send> ResultSink for CsvSink<W> {
    fn accept(&mut self, result: &ScenarioResult) -> std::io::Result<()> {
        for row in csv_rows(result) {
            self.writer.serialize(row)?;
        }
        self.writer.flush()
    }
}

/// Runs scenarios on `parallelism` threads (all logical cores when `None`).
///
/// Each scenario draws from streams keyed by its own parameters, so the
/// returned results, sorted by scenario, do not depend on the thread count.
pub fn run_grid(
    scenarios: &[ScenarioConfig],
    options: &SimOptions,
    parallelism: Option<usize>,
    sink: &mut dyn ResultSink,
) -> Result<Vec<ScenarioResult>> {
    for s in scenarios {
        s.validate()?;
    }
    options.validate()?;
    if scenarios.is_empty() {
        return Ok(Vec::new());
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(p) = parallelism {
        builder = builder.num_threads(p.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Computation(format!("cannot start worker threads: {e}")))?;
    let sink = Mutex::new(sink);
    let mut results: Vec<ScenarioResult> = pool.install(|| {
        scenarios
            .par_iter()
            .map(|config| {
                let result = run_scenario(config, options)?;
                let mut guard = sink.lock().unwrap_or_else(|p| p.into_inner());
                guard.accept(&result).map_err(|source| Error::Io {
                    context: format!("writing results of scenario {}", result.key),
                    source,
                })?;
                Ok(result)
            })
            .collect::<Result<_>>()
    })?;
    results.sort_by(|a, b| a.config.sort_cmp(&b.config));
    Ok(results)
}

/// One output row: a scenario and one fitted model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRow<'a> {
    pub scenario: &'a str,
    pub n_treated: usize,
    pub n_comparison: usize,
    pub n_pre: u32,
    pub n_post: u32,
    pub violation: &'static str,
    pub effect_sd: f64,
    pub violation_slope: f64,
    pub jump: f64,
    pub trials: usize,
    pub seed: u64,
    pub model: &'a str,
    pub excluded_trials: usize,
    pub power: f64,
    pub power_mc_se: f64,
    pub bias: f64,
    pub bias_mc_se: f64,
    pub mse: f64,
    pub rule_out_power: Option<f64>,
}

pub fn csv_rows(result: &ScenarioResult) -> Vec<CsvRow<'_>> {
    let c = &result.config;
    result
        .models
        .iter()
        .map(|m| CsvRow {
            scenario: &result.key,
            n_treated: c.n_treated,
            n_comparison: c.n_comparison,
            n_pre: c.n_pre,
            n_post: c.n_post,
            violation: c.violation.as_str(),
            effect_sd: c.effect_sd,
            violation_slope: c.violation_slope,
            jump: c.jump_size(),
            trials: c.trials,
            seed: c.seed,
            model: &m.model,
            excluded_trials: result.excluded_trials,
            power: m.power,
            power_mc_se: m.power_mc_se,
            bias: m.bias,
            bias_mc_se: m.bias_mc_se,
            mse: m.mse,
            rule_out_power: m.rule_out_power,
        })
        .collect()
}

/// Writes results as CSV, one row per scenario and model.
pub fn write_csv<W: Write>(results: &[ScenarioResult], out: W) -> Result<()> {
    let io = |source| Error::Io {
        context: "writing simulation CSV".into(),
        source,
    };
    let mut writer = csv::Writer::from_writer(out);
    for r in results {
        for row in csv_rows(r) {
            writer.serialize(row).map_err(|e| io(e.into()))?;
        }
    }
    writer.flush().map_err(io)
}
