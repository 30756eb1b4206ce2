use std::path::Path;

use anyhow::{Context, Result};
use nidid::nicompare::Sided;
use nidid::panelspec::TrendSpec;
use nidid::simlab::{
    standard_grid, standard_models, ScenarioConfig, SimOptions, Violation, DEFAULT_SIM_RANDOMIZATIONS,
    DEFAULT_TRIALS, DEFAULT_VIOLATION_SLOPE,
};
use serde::{Deserialize, Serialize};

use crate::report::UsageError;

/// One `[[scenario]]` block; unset fields inherit the file-level defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioBlock {
    pub n_treated: usize,
    pub n_comparison: usize,
    pub n_pre: u32,
    pub n_post: u32,
    pub violation: Violation,
    pub effect_sd: f64,
    pub violation_slope: Option<f64>,
    pub jump: Option<f64>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
}

/// Scenario configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimFile {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_slope")]
    pub violation_slope: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub sided: Sided,
    /// Rule-out threshold; defaults to each scenario's effect size.
    pub delta: Option<f64>,
    #[serde(default = "default_randomizations")]
    pub randomizations: usize,
    /// Trend models by name; defaults to all six.
    pub models: Option<Vec<String>>,
    /// Adds every cell of the standard 288-scenario grid.
    #[serde(default)]
    pub standard_grid: bool,
    /// Requires every scenario to use the standard grid's values.
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub scenario: Vec<ScenarioBlock>,
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn default_slope() -> f64 {
    DEFAULT_VIOLATION_SLOPE
}

fn default_alpha() -> f64 {
    0.05
}

fn default_randomizations() -> usize {
    DEFAULT_SIM_RANDOMIZATIONS
}

impl SimFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid scenario file {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Expands the grid and blocks into scenarios, with `seed` overriding the file seed.
    pub fn scenarios(&self, seed: Option<u64>) -> Result<Vec<ScenarioConfig>> {
        let seed = seed.unwrap_or(self.seed);
        let mut out = if self.standard_grid {
            standard_grid(self.trials, seed)
                .into_iter()
                .map(|c| c.with_slope(self.violation_slope))
                .collect()
        } else {
            Vec::new()
        };
        for b in &self.scenario {
            out.push(ScenarioConfig {
                n_treated: b.n_treated,
                n_comparison: b.n_comparison,
                n_pre: b.n_pre,
                n_post: b.n_post,
                violation: b.violation,
                effect_sd: b.effect_sd,
                violation_slope: b.violation_slope.unwrap_or(self.violation_slope),
                jump: b.jump,
                trials: b.trials.unwrap_or(self.trials),
                seed: b.seed.unwrap_or(seed),
            });
        }
        if out.is_empty() {
            return Err(UsageError("scenario file defines no scenarios".into()).into());
        }
        for c in &out {
            if self.strict {
                c.validate_standard()?;
            } else {
                c.validate()?;
            }
        }
        Ok(out)
    }

    pub fn options(&self) -> Result<SimOptions> {
        let models = match &self.models {
            Some(names) => names
                .iter()
                .map(|n| n.parse::<TrendSpec>())
                .collect::<nidid::Result<Vec<_>>>()?,
            None => standard_models(),
        };
        let options = SimOptions {
            models,
            alpha: self.alpha,
            delta: self.delta,
            sided: self.sided,
            randomizations: self.randomizations,
            keep_estimates: false,
        };
        options.validate()?;
        Ok(options)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_inherit_defaults() {
        let f = SimFile::parse(
            r#"
seed = 7
trials = 20
models = ["none", "linear"]

[[scenario]]
n_treated = 5
n_comparison = 10
n_pre = 5
n_post = 5
violation = "linear"
effect_sd = 1.0

[[scenario]]
n_treated = 10
n_comparison = 10
n_pre = 5
n_post = 5
violation = "midpoint_change"
effect_sd = 0.5
trials = 3
violation_slope = 0.1
"#,
        )
        .unwrap();
        let s = f.scenarios(None).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!((s[0].trials, s[0].seed, s[0].violation_slope), (20, 7, 0.05));
        assert_eq!((s[1].trials, s[1].violation_slope), (3, 0.1));
        assert_eq!(f.scenarios(Some(9)).unwrap()[0].seed, 9);
        assert_eq!(f.options().unwrap().models.len(), 2);
    }

    #[test]
    fn standard_grid_and_errors() {
        let f = SimFile::parse("standard_grid = true\ntrials = 2\n").unwrap();
        assert_eq!(f.scenarios(None).unwrap().len(), 288);
        assert!(SimFile::parse("bogus = 1\n").is_err());
        assert!(SimFile::parse("").unwrap().scenarios(None).is_err());
        let f = SimFile::parse("models = [\"spline9\"]\n").unwrap();
        assert!(f.options().is_err());
    }
}
