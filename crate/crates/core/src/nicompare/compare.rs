use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::dist::norm_quantile;
use crate::error::{validation, Error, Result};
use crate::linmod::{FitResult, VcovKind};
use crate::nicompare::verdict::{check_alpha, ni_test, NiVerdict, Sided};
use crate::panelspec::{DidFit, TrendSpec};

/// Estimated effect at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodEffect {
    pub time: u32,
    pub estimate: f64,
    /// Absent for penalized fits, whose model-based variance is not used for inference.
    pub se: Option<f64>,
}

/// Per-period effects and their equal-weight average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSummary {
    pub per_period: Vec<PeriodEffect>,
    pub average: f64,
    pub average_se: Option<f64>,
    pub window: Vec<u32>,
}

impl EffectSummary {
    pub fn from_fit(fit: &DidFit) -> Result<Self> {
        let inferential = !fit.is_penalized();
        let mut per_period = Vec::with_capacity(fit.layout.effect_times.len());
        for &k in &fit.layout.effect_times {
            let name = crate::panelspec::effect_name(k);
            let estimate = fit
                .fit
                .coef(&name)
                .ok_or_else(|| Error::Validation(format!("fit has no coefficient `{name}`")))?;
            per_period.push(PeriodEffect {
                time: k,
                estimate,
                se: if inferential { fit.fit.se(&name) } else { None },
            });
        }
        let (average, var) = fit.average_effect()?;
        Ok(Self {
            per_period,
            average,
            average_se: inferential.then(|| var.max(0.0).sqrt()),
            window: fit.layout.effect_times.clone(),
        })
    }
}

/// How the sampling distribution of a difference in effects was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonMethod {
    ScaleFactor,
    VarianceDifference,
    ClusterBootstrap,
    Randomization,
}

impl std::fmt::Display for ComparisonMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ComparisonMethod::ScaleFactor => "scale_factor",
            ComparisonMethod::VarianceDifference => "variance_difference",
            ComparisonMethod::ClusterBootstrap => "cluster_bootstrap",
            ComparisonMethod::Randomization => "randomization",
        })
    }
}

/// Difference `kappa` between the average effects of a simpler and a richer model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonResult {
    /// Average effect of the simpler model minus that of the richer model.
    pub kappa: f64,
    pub se_kappa: f64,
    pub method: ComparisonMethod,
    pub alpha: f64,
    /// Two-sided `1 - alpha` confidence interval.
    pub ci: (f64, f64),
    pub scale_factor_w: Option<f64>,
    pub reduced_average: f64,
    pub expanded_average: f64,
    pub replications: Option<usize>,
    pub warnings: Vec<String>,
}

impl ComparisonResult {
    fn normal(
        kappa: f64,
        se: f64,
        method: ComparisonMethod,
        alpha: f64,
        reduced_average: f64,
        expanded_average: f64,
    ) -> Self {
        let z = norm_quantile(1.0 - alpha / 2.0);
        Self {
            kappa,
            se_kappa: se,
            method,
            alpha,
            ci: (kappa - z * se, kappa + z * se),
            scale_factor_w: None,
            reduced_average,
            expanded_average,
            replications: None,
            warnings: Vec::new(),
        }
    }

    /// Normal-approximation non-inferiority test of the difference.
    pub fn ni_test(&self, delta: f64, sided: Sided) -> Result<NiVerdict> {
        ni_test(self.kappa, self.se_kappa, delta, self.alpha, sided)
    }

    pub fn ci_excludes_zero(&self) -> bool {
        self.ci.0 > 0.0 || self.ci.1 < 0.0
    }
}

/// Mean post-period time minus mean pre-period time.
pub fn scale_factor_w(t0: u32, t_max: u32) -> Result<f64> {
    if !(2..=t_max).contains(&t0) {
        return validation(format!("need 2 <= t0 <= t_max, got t0 = {t0}, t_max = {t_max}"));
    }
    let post = (t0 + t_max) as f64 / 2.0;
    let pre = t0 as f64 / 2.0;
    Ok(post - pre)
}

/// Scale factor of a fitted layout: mean effect time minus mean reference time.
pub fn layout_scale_factor(fit: &DidFit) -> f64 {
    let mean = |v: &[u32]| v.iter().map(|&t| t as f64).sum::<f64>() / v.len() as f64;
    mean(&fit.layout.effect_times) - mean(&fit.layout.reference_times)
}

/// Difference between the no-trend and linear-trend average effects, computed
/// from the linear-trend fit alone as `W * theta`.
pub fn compare_scale_factor(expanded: &DidFit, alpha: f64) -> Result<ComparisonResult> {
    check_alpha(alpha)?;
    if expanded.spec.trend != TrendSpec::linear() || expanded.spec.include_subgroup_effect {
        return validation("the scale-factor comparison needs a linear trend model without subgroup term");
    }
    let theta = expanded
        .fit
        .coef("trend_t")
        .ok_or_else(|| Error::Validation("fit has no `trend_t` column".into()))?;
    let se_theta = expanded.fit.se("trend_t").expect("column present");
    let w = layout_scale_factor(expanded);
    let (expanded_average, _) = expanded.average_effect()?;
    let kappa = w * theta;
    let mut out = ComparisonResult::normal(
        kappa,
        w.abs() * se_theta,
        ComparisonMethod::ScaleFactor,
        alpha,
        expanded_average + kappa,
        expanded_average,
    );
    out.scale_factor_w = Some(w);
    Ok(out)
}

fn average_of(fit: &FitResult, effect_cols: &[String]) -> Result<(f64, f64)> {
    let w = 1.0 / effect_cols.len() as f64;
    let terms: Vec<(&str, f64)> = effect_cols.iter().map(|c| (c.as_str(), w)).collect();
    fit.linear_combination(&terms)
}

/// Difference in average effects between nested fits on the same rows, with
/// variance `Var(expanded) - Var(reduced) * sigma2_expanded / sigma2_reduced`.
///
/// A negative variance estimate is clamped to zero with a warning.
pub fn compare_variance_difference(
    reduced: &FitResult,
    expanded: &FitResult,
    effect_cols: &[String],
    alpha: f64,
) -> Result<ComparisonResult> {
    check_alpha(alpha)?;
    if effect_cols.is_empty() {
        return validation("no effect columns to average");
    }
    if reduced.vcov_kind != VcovKind::Iid || expanded.vcov_kind != VcovKind::Iid {
        return validation(
            "the variance-difference comparison assumes iid variances; use a resampling comparison",
        );
    }
    if reduced.penalty.is_some() || expanded.penalty.is_some() {
        return validation("penalized fits are compared by randomization inference only");
    }
    if reduced.n_obs != expanded.n_obs {
        return validation(format!(
            "models were fitted on different rows ({} vs {})",
            reduced.n_obs, expanded.n_obs
        ));
    }
    let richer: HashSet<&str> = expanded.names.iter().map(String::as_str).collect();
    if let Some(missing) = reduced.names.iter().find(|n| !richer.contains(n.as_str())) {
        return validation(format!(
            "models are not nested: `{missing}` is missing from the richer model"
        ));
    }
    if reduced.names.len() >= expanded.names.len() {
        return validation("the richer model adds no columns");
    }
    if !(reduced.sigma2 > 0.0) {
        return validation("reduced model has zero residual variance");
    }
    let (b_red, v_red) = average_of(reduced, effect_cols)?;
    let (b_exp, v_exp) = average_of(expanded, effect_cols)?;
    let var = v_exp - v_red * expanded.sigma2 / reduced.sigma2;
    let mut warnings = Vec::new();
    let var = if var < 0.0 {
        let msg = format!(
            "variance of the difference estimated as {var:.3e} < 0 and set to 0; \
             prefer a resampling comparison"
        );
        log::warn!("{msg}");
        warnings.push(msg);
        0.0
    } else {
        var
    };
    let mut out = ComparisonResult::normal(
        b_red - b_exp,
        var.sqrt(),
        ComparisonMethod::VarianceDifference,
        alpha,
        b_red,
        b_exp,
    );
    out.warnings = warnings;
    Ok(out)
}

/// Variance-difference comparison of two fitted DID models.
pub fn compare_did_fits(reduced: &DidFit, expanded: &DidFit, alpha: f64) -> Result<ComparisonResult> {
    if reduced.layout.effect_times != expanded.layout.effect_times {
        return validation("models estimate effects over different windows");
    }
    let mut out = compare_variance_difference(&reduced.fit, &expanded.fit, &reduced.effect_names(), alpha)?;
    if expanded.spec.trend == TrendSpec::linear() && reduced.spec.trend == TrendSpec::None {
        out.scale_factor_w = Some(layout_scale_factor(expanded));
    }
    Ok(out)
}
