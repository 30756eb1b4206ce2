use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::norm_cdf;
use crate::error::{validation, Error, Result};
use crate::linmod::FitResult;
use crate::nicompare::{compare_variance_difference, randomization_effect_test, Sided};
use crate::panelspec::{ContrastModel, DesignLayout, DidModelSpec, PanelContrast, PreparedContrast, TrendSpec};
use crate::seeding::substream_seed;
use crate::simlab::config::ScenarioConfig;
use crate::simlab::dgp::generate_panel;

/// Randomization replications for penalized-trend significance inside simulations.
pub const DEFAULT_SIM_RANDOMIZATIONS: usize = 199;

/// The six trend models fitted in each trial.
pub fn standard_models() -> Vec<TrendSpec> {
    vec![
        TrendSpec::None,
        TrendSpec::Poly { degree: 1 },
        TrendSpec::Poly { degree: 2 },
        TrendSpec::Poly { degree: 3 },
        TrendSpec::Rcs,
        TrendSpec::pspline(),
    ]
}

/// How each trial is analysed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub models: Vec<TrendSpec>,
    pub alpha: f64,
    /// Threshold for ruling out a model-versus-no-trend difference; defaults
    /// to the scenario's effect size.
    pub delta: Option<f64>,
    /// `One` tests for a positive effect and rules out differences above
    /// `delta`; `Two` uses two-sided detection and equivalence tests.
    pub sided: Sided,
    /// Randomization replications for penalized models.
    pub randomizations: usize,
    /// Keep every trial's estimates in the result.
    pub keep_estimates: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            models: standard_models(),
            alpha: 0.05,
            delta: None,
            sided: Sided::One,
            randomizations: DEFAULT_SIM_RANDOMIZATIONS,
            keep_estimates: false,
        }
    }
}

impl SimOptions {
    pub fn with_models(mut self, models: Vec<TrendSpec>) -> Self {
        self.models = models;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return validation("at least one model is needed");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return validation(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if let Some(d) = self.delta {
            if !d.is_finite() || (self.sided == Sided::Two && d <= 0.0) {
                return validation(format!("invalid threshold {d}"));
            }
        }
        for m in &self.models {
            m.validate()?;
        }
        if self.models.iter().any(TrendSpec::is_penalized) && self.randomizations < 19 {
            return validation("penalized models need at least 19 randomizations");
        }
        Ok(())
    }
}

/// Aggregates for one model in one scenario. Bias and MSE are in outcome sd units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: String,
    pub trials: usize,
    /// Share of trials with a significant average effect.
    pub power: f64,
    pub power_mc_se: f64,
    pub bias: f64,
    pub bias_mc_se: f64,
    pub mse: f64,
    /// Share of trials ruling out a difference from the no-trend model of
    /// `delta` or more; absent for the no-trend model itself and for
    /// penalized trends.
    pub rule_out_power: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimates: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub key: String,
    pub config: ScenarioConfig,
    pub alpha: f64,
    pub delta: f64,
    pub sided: Sided,
    pub excluded_trials: usize,
    pub models: Vec<ModelSummary>,
}

impl ScenarioResult {
    pub fn model(&self, name: &str) -> Option<&ModelSummary> {
        self.models.iter().find(|m| m.model == name)
    }
}

enum Runner {
    Parametric(PreparedContrast),
    Penalized(DidModelSpec),
}

struct TrialRecord {
    estimate: f64,
    significant: bool,
    ruled_out: Option<bool>,
}

fn average_se(fit: &FitResult, n_effects: usize) -> f64 {
    let w = 1.0 / n_effects as f64;
    let block = fit.vcov.view((0, 0), (n_effects, n_effects));
    (block.sum() * w * w).max(0.0).sqrt()
}

fn significant(estimate: f64, se: f64, alpha: f64, sided: Sided) -> bool {
    if se == 0.0 {
        return estimate != 0.0 && (sided == Sided::Two || estimate > 0.0);
    }
    let z = estimate / se;
    let p = match sided {
        Sided::One => norm_cdf(-z),
        Sided::Two => 2.0 * norm_cdf(-z.abs()),
    };
    p < alpha
}

struct Plan<'a> {
    config: &'a ScenarioConfig,
    options: &'a SimOptions,
    delta: f64,
    key: String,
    effect_names: Vec<String>,
    baseline: PreparedContrast,
    runners: Vec<Runner>,
}

impl Plan<'_> {
    fn trial(&self, index: u64) -> Result<Vec<TrialRecord>> {
        let data = generate_panel(self.config, index)?;
        let series = PanelContrast::from_panel(&data, data.t_max())?;
        let n_effects = self.effect_names.len();
        let baseline = self.baseline.fit(&series)?;
        let alpha = self.options.alpha;
        let sided = self.options.sided;
        let mut out = Vec::with_capacity(self.runners.len());
        for (m, runner) in self.runners.iter().enumerate() {
            let record = match runner {
                Runner::Parametric(prepared) => {
                    let fit = prepared.fit(&series)?;
                    let estimate = fit.coefficients[..n_effects].iter().sum::<f64>() / n_effects as f64;
                    let se = average_se(&fit, n_effects);
                    let ruled_out = if self.options.models[m] == TrendSpec::None {
                        None
                    } else {
                        let cmp = compare_variance_difference(&baseline, &fit, &self.effect_names, alpha)?;
                        Some(cmp.ni_test(self.delta, sided)?.reject_h0)
                    };
                    TrialRecord {
                        estimate,
                        significant: significant(estimate, se, alpha, sided),
                        ruled_out,
                    }
                }
                Runner::Penalized(spec) => {
                    let seed = substream_seed(self.config.seed, &format!("{}/randomization/{m}", self.key), index);
                    let ri = randomization_effect_test(&data, spec, self.options.randomizations, seed, alpha)?;
                    let p = match sided {
                        Sided::One => ri.p_lower_at(0.0)?,
                        Sided::Two => ri.p_value(),
                    };
                    TrialRecord {
                        estimate: ri.statistic,
                        significant: p < alpha,
                        ruled_out: None,
                    }
                }
            };
            if !record.estimate.is_finite() {
                return Err(Error::Computation("non-finite estimate".into()));
            }
            out.push(record);
        }
        Ok(out)
    }
}

fn mean_and_se(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs every trial of a scenario and aggregates per model.
///
/// Trials whose fits fail are excluded and counted; the scenario fails when
/// exclusions reach 1% of trials.
pub fn run_scenario(config: &ScenarioConfig, options: &SimOptions) -> Result<ScenarioResult> {
    config.validate()?;
    options.validate()?;
    let delta = options.delta.unwrap_or(config.effect_sd);
    if options.sided == Sided::Two && delta <= 0.0 {
        return validation("two-sided rule-out tests need a positive threshold");
    }
    let (t0, t_max) = (config.t0(), config.t_max());
    let base_layout = DesignLayout::new(&DidModelSpec::post(TrendSpec::None), t0, t_max)?;
    let weight = (config.n_treated * config.n_comparison) as f64 / config.n_units() as f64;
    let runners = options
        .models
        .iter()
        .map(|trend| {
            let spec = DidModelSpec::post(trend.clone());
            if trend.is_penalized() {
                DesignLayout::new(&spec, t0, t_max)?;
                Ok(Runner::Penalized(spec))
            } else {
                let layout = DesignLayout::new(&spec, t0, t_max)?;
                Ok(Runner::Parametric(ContrastModel::new(&layout)?.prepare(weight)?))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let plan = Plan {
        config,
        options,
        delta,
        key: config.key(),
        effect_names: base_layout.effect_names(),
        baseline: ContrastModel::new(&base_layout)?.prepare(weight)?,
        runners,
    };

    let outcomes: Vec<Option<Vec<TrialRecord>>> = (0..config.trials as u64)
        .into_par_iter()
        .map(|i| match plan.trial(i) {
            Ok(r) => Ok(Some(r)),
            Err(e) if e.is_validation() => Err(e),
            Err(e) => {
                log::debug!("scenario {} trial {i} excluded: {e}", plan.key);
                Ok(None)
            }
        })
        .collect::<Result<_>>()?;
    let kept: Vec<&Vec<TrialRecord>> = outcomes.iter().flatten().collect();
    let excluded = outcomes.len() - kept.len();
    if excluded * 100 >= config.trials {
        return Err(Error::Computation(format!(
            "scenario {}: {excluded} of {} trials failed to fit",
            plan.key, config.trials
        )));
    }

    let truth = config.effect_sd;
    let models = options
        .models
        .iter()
        .enumerate()
        .map(|(m, trend)| {
            let records = || kept.iter().map(move |r| &r[m]);
            let (power, power_mc_se) = mean_and_se(records().map(|r| f64::from(u8::from(r.significant))));
            let (bias, bias_mc_se) = mean_and_se(records().map(|r| r.estimate - truth));
            let mse = records().map(|r| (r.estimate - truth).powi(2)).sum::<f64>() / kept.len() as f64;
            let rule_out_power = records()
                .map(|r| r.ruled_out)
                .collect::<Option<Vec<bool>>>()
                .map(|v| v.iter().filter(|&&b| b).count() as f64 / v.len() as f64);
            ModelSummary {
                model: trend.to_string(),
                trials: kept.len(),
                power,
                power_mc_se,
                bias,
                bias_mc_se,
                mse,
                rule_out_power,
                estimates: options.keep_estimates.then(|| records().map(|r| r.estimate).collect()),
            }
        })
        .collect();
    Ok(ScenarioResult {
        key: plan.key.clone(),
        config: config.clone(),
        alpha: options.alpha,
        delta,
        sided: options.sided,
        excluded_trials: excluded,
        models,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simlab::config::Violation;

    #[test]
    fn small_scenario_runs_and_is_deterministic() {
        let c = ScenarioConfig::new(5, 10, 5, 5, Violation::None, 1.0)
            .with_trials(20)
            .with_seed(11);
        let opts = SimOptions {
            randomizations: 39,
            ..SimOptions::default()
        };
        let a = run_scenario(&c, &opts).unwrap();
        let b = run_scenario(&c, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.models.len(), 6);
        assert_eq!(a.excluded_trials, 0);
        for m in &a.models {
            assert!((0.0..=1.0).contains(&m.power));
            assert!(m.mse >= m.bias * m.bias - 1e-12);
            assert_eq!(m.rule_out_power.is_none(), m.model == "none" || m.model == "pspline");
        }
    }

    #[test]
    fn rejects_empty_model_list() {
        let c = ScenarioConfig::new(5, 10, 5, 5, Violation::None, 1.0);
        let opts = SimOptions::default().with_models(vec![]);
        assert!(run_scenario(&c, &opts).unwrap_err().is_validation());
    }
}
