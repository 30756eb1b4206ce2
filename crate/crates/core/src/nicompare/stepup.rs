use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::linmod::VcovKind;
use crate::nicompare::compare::{compare_did_fits, compare_scale_factor, ComparisonResult};
use crate::nicompare::resample::{cluster_bootstrap, randomization_inference, RandomizationInference};
use crate::nicompare::verdict::{check_alpha, NiVerdict, Sided};
use crate::panelspec::{fit_did, DidModelSpec, PanelDataset, TrendSpec};

/// How the difference between the two models is assessed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StepMethod {
    /// Scale factor for linear versus no trend, variance difference otherwise,
    /// randomization whenever a penalized trend is involved.
    #[default]
    Auto,
    ScaleFactor,
    VarianceDifference,
    ClusterBootstrap,
    Randomization,
}

impl std::str::FromStr for StepMethod {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(StepMethod::Auto),
            "scale" | "scale_factor" => Ok(StepMethod::ScaleFactor),
            "vardiff" | "variance_difference" => Ok(StepMethod::VarianceDifference),
            "boot" | "bootstrap" | "cluster_bootstrap" => Ok(StepMethod::ClusterBootstrap),
            "ri" | "randomization" => Ok(StepMethod::Randomization),
            other => validation(format!(
                "unknown comparison method `{other}` (expected scale, vardiff, boot or ri)"
            )),
        }
    }
}

/// Settings for [`one_step_up`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepUpOptions {
    pub alpha: f64,
    pub sided: Sided,
    pub method: StepMethod,
    pub replications: usize,
    pub seed: u64,
}

impl Default for StepUpOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            sided: Sided::One,
            method: StepMethod::Auto,
            replications: 999,
            seed: 1,
        }
    }
}

/// Strength of evidence about the trend assumption.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepOutcome {
    /// The difference is too imprecise to say either way.
    Unclear,
    /// Differences of at least `delta` are ruled out.
    NoChange,
    /// The difference is precisely nonzero and large differences cannot be ruled out.
    Change,
}

/// One comparison between a richer base model and a simpler model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepUpReport {
    pub base_trend: TrendSpec,
    pub simpler_trend: TrendSpec,
    pub outcome: StepOutcome,
    pub comparison: ComparisonResult,
    pub verdict: NiVerdict,
    /// Level used for this step.
    pub alpha: f64,
    pub recommendation: String,
    /// Level to use for the next, more complex comparison.
    pub next_alpha: Option<f64>,
}

fn involves_penalty(a: &TrendSpec, b: &TrendSpec) -> bool {
    a.is_penalized() || b.is_penalized()
}

enum Assessment {
    Normal(ComparisonResult),
    Randomization(RandomizationInference),
}

fn assess(
    data: &PanelDataset,
    base_trend: &TrendSpec,
    simpler_trend: &TrendSpec,
    options: &StepUpOptions,
) -> Result<Assessment> {
    check_alpha(options.alpha)?;
    let expanded = DidModelSpec::post(base_trend.clone());
    let reduced = DidModelSpec::post(simpler_trend.clone());
    let alpha = options.alpha;
    let mut method = options.method;
    if involves_penalty(base_trend, simpler_trend)
        && !matches!(method, StepMethod::Randomization | StepMethod::ClusterBootstrap)
    {
        if method != StepMethod::Auto {
            log::warn!("penalized trends are compared by randomization inference only");
        }
        method = StepMethod::Randomization;
    }
    let scale_applicable = *base_trend == TrendSpec::linear() && *simpler_trend == TrendSpec::None;
    if method == StepMethod::Auto {
        method = if scale_applicable {
            StepMethod::ScaleFactor
        } else {
            StepMethod::VarianceDifference
        };
    }
    Ok(match method {
        StepMethod::ScaleFactor => {
            if !scale_applicable {
                return validation("the scale-factor method applies to linear versus no trend only");
            }
            let fit = fit_did(data, &expanded, VcovKind::Iid)?;
            Assessment::Normal(compare_scale_factor(&fit, alpha)?)
        }
        StepMethod::VarianceDifference => {
            let fr = fit_did(data, &reduced, VcovKind::Iid)?;
            let fe = fit_did(data, &expanded, VcovKind::Iid)?;
            Assessment::Normal(compare_did_fits(&fr, &fe, alpha)?)
        }
        StepMethod::ClusterBootstrap => Assessment::Normal(cluster_bootstrap(
            data,
            &reduced,
            &expanded,
            options.replications,
            options.seed,
            alpha,
        )?),
        StepMethod::Randomization => Assessment::Randomization(randomization_inference(
            data,
            &reduced,
            &expanded,
            options.replications,
            options.seed,
            alpha,
        )?),
        StepMethod::Auto => unreachable!("resolved above"),
    })
}

/// Difference between the `simpler_trend` and `base_trend` average effects,
/// with its standard error and confidence interval, without a threshold test.
pub fn compare_trends(
    data: &PanelDataset,
    base_trend: &TrendSpec,
    simpler_trend: &TrendSpec,
    options: &StepUpOptions,
) -> Result<ComparisonResult> {
    match assess(data, base_trend, simpler_trend, options)? {
        Assessment::Normal(c) => Ok(c),
        Assessment::Randomization(ri) => ri.into_comparison(None),
    }
}

/// Compares the effect from `base_trend` with that from `simpler_trend`.
pub fn compare_step(
    data: &PanelDataset,
    base_trend: &TrendSpec,
    simpler_trend: &TrendSpec,
    delta: f64,
    options: &StepUpOptions,
) -> Result<StepUpReport> {
    check_alpha(options.alpha)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return validation(format!("threshold delta must be positive, got {delta}"));
    }
    let alpha = options.alpha;
    let (comparison, verdict) = match assess(data, base_trend, simpler_trend, options)? {
        Assessment::Normal(c) => {
            let v = c.ni_test(delta, options.sided)?;
            (c, v)
        }
        Assessment::Randomization(ri) => {
            let v = ri.ni_verdict(delta, options.sided)?;
            (ri.into_comparison(None)?, v)
        }
    };
    let outcome = if verdict.reject_h0 {
        StepOutcome::NoChange
    } else if comparison.ci_excludes_zero() {
        StepOutcome::Change
    } else {
        StepOutcome::Unclear
    };
    let (recommendation, next_alpha) = match outcome {
        StepOutcome::NoChange => (
            format!(
                "differences of {delta} or more are ruled out; the {base_trend} and {simpler_trend} \
                 specifications agree. A more flexible trend can serve as a sensitivity analysis."
            ),
            None,
        ),
        StepOutcome::Change => (
            format!(
                "the {base_trend} and {simpler_trend} effects differ and differences of {delta} cannot be \
                 ruled out; fit a more flexible trend (rcs or pspline) and compare it with {base_trend} \
                 at level {} (Bonferroni)",
                alpha / 2.0
            ),
            Some(alpha / 2.0),
        ),
        StepOutcome::Unclear => (
            "the difference is too imprecise to assess the trend assumption".to_string(),
            None,
        ),
    };
    Ok(StepUpReport {
        base_trend: base_trend.clone(),
        simpler_trend: simpler_trend.clone(),
        outcome,
        comparison,
        verdict,
        alpha,
        recommendation,
        next_alpha,
    })
}

/// Base linear-trend model against the no-trend model.
pub fn one_step_up(data: &PanelDataset, delta: f64, options: &StepUpOptions) -> Result<StepUpReport> {
    compare_step(data, &TrendSpec::linear(), &TrendSpec::None, delta, options)
}

/// Runs [`one_step_up`] and, when it finds a change, compares `next_trend`
/// with the linear model at the Bonferroni-corrected level.
pub fn stepwise(
    data: &PanelDataset,
    delta: f64,
    next_trend: &TrendSpec,
    options: &StepUpOptions,
) -> Result<Vec<StepUpReport>> {
    let first = one_step_up(data, delta, options)?;
    let mut reports = vec![first];
    if let Some(next_alpha) = reports[0].next_alpha {
        let mut step2 = options.clone();
        step2.alpha = next_alpha;
        if step2.method == StepMethod::ScaleFactor {
            step2.method = StepMethod::Auto;
        }
        let second = compare_step(data, next_trend, &TrendSpec::linear(), delta, &step2)?;
        reports.push(second);
    }
    Ok(reports)
}
