//! Closed-form power for detection and non-inferiority tests.
//!
//! Every formula takes a [`Reference`] distribution in its `_with` form; the
//! plain functions use the standard normal.

use serde::{Deserialize, Serialize};

use crate::dist::Reference;
use crate::error::{validation, Result};
use crate::nicompare::Sided;

fn check_level(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        validation(format!("alpha must lie in (0, 1), got {alpha}"))
    }
}

fn check_se(se: f64) -> Result<()> {
    if se > 0.0 && se.is_finite() {
        Ok(())
    } else {
        validation(format!("standard error must be positive and finite, got {se}"))
    }
}

fn tail_alpha(alpha: f64, sided: Sided) -> f64 {
    match sided {
        Sided::One => alpha,
        Sided::Two => alpha / 2.0,
    }
}

/// Inputs of a power calculation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSpec {
    pub alpha: f64,
    pub sided: Sided,
    pub n: f64,
    pub sigma: f64,
    /// Effect size to detect.
    pub theta: f64,
    /// Non-inferiority threshold.
    pub delta: f64,
    /// Assumed true difference when computing non-inferiority power.
    pub true_theta: f64,
    #[serde(default)]
    pub reference: Reference,
}

impl PowerSpec {
    pub fn validate(&self) -> Result<()> {
        check_level(self.alpha)?;
        if !(self.n > 0.0 && self.n.is_finite()) {
            return validation(format!("sample size must be positive, got {}", self.n));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return validation(format!("sigma must be positive, got {}", self.sigma));
        }
        Ok(())
    }

    /// Standard error `sigma / sqrt(n)`.
    pub fn se(&self) -> f64 {
        self.sigma / self.n.sqrt()
    }

    pub fn detection_power(&self) -> Result<f64> {
        self.validate()?;
        detection_power_with(self.theta, self.se(), self.alpha, self.sided, self.reference)
    }

    pub fn ni_power(&self) -> Result<f64> {
        self.validate()?;
        ni_power_with(self.delta, self.true_theta, self.se(), self.alpha, self.sided, self.reference)
    }

    pub fn mde(&self, power: f64) -> Result<f64> {
        self.validate()?;
        mde_with(self.n, self.sigma, self.alpha, power, self.sided, self.reference)
    }
}

/// Smallest effect detected with probability `power`:
/// `(sigma / sqrt n) (q(power) - q(alpha))`, with `alpha / 2` when two-sided.
///
/// `power == alpha` gives 0; `power < alpha` is an error.
pub fn mde(n: f64, sigma: f64, alpha: f64, power: f64, sided: Sided) -> Result<f64> {
    mde_with(n, sigma, alpha, power, sided, Reference::Normal)
}

pub fn mde_with(n: f64, sigma: f64, alpha: f64, power: f64, sided: Sided, reference: Reference) -> Result<f64> {
    check_level(alpha)?;
    if !(n > 0.0 && n.is_finite()) || !(sigma > 0.0 && sigma.is_finite()) {
        return validation(format!("need n > 0 and sigma > 0, got n = {n}, sigma = {sigma}"));
    }
    if !(power < 1.0) {
        return validation(format!("power must be below 1, got {power}"));
    }
    let a = tail_alpha(alpha, sided);
    if power == a {
        return Ok(0.0);
    }
    if power < a {
        return validation(format!("power {power} is below the test level {a}"));
    }
    Ok(sigma / n.sqrt() * (reference.quantile(power) - reference.quantile(a)))
}

/// Probability of rejecting `H0: theta >= delta` when the truth is `true_theta`.
///
/// Two-sided power is that of the symmetric TOST with `alpha / 2` per side,
/// floored at 0.
pub fn ni_power(delta: f64, true_theta: f64, se: f64, alpha: f64, sided: Sided) -> Result<f64> {
    ni_power_with(delta, true_theta, se, alpha, sided, Reference::Normal)
}

pub fn ni_power_with(
    delta: f64,
    true_theta: f64,
    se: f64,
    alpha: f64,
    sided: Sided,
    reference: Reference,
) -> Result<f64> {
    check_level(alpha)?;
    check_se(se)?;
    Ok(match sided {
        Sided::One => reference.cdf(reference.quantile(alpha) + (delta - true_theta) / se),
        Sided::Two => {
            let upper = reference.cdf(reference.quantile(alpha / 2.0) + (delta - true_theta) / se);
            let lower = reference.cdf(reference.quantile(1.0 - alpha / 2.0) - (delta + true_theta) / se);
            (upper - lower).max(0.0)
        }
    })
}

/// Probability that a test of `H0: theta = 0` rejects when the truth is `theta`.
///
/// One-sided tests look for positive effects; two-sided power counts both tails.
pub fn detection_power(theta: f64, se: f64, alpha: f64, sided: Sided) -> Result<f64> {
    detection_power_with(theta, se, alpha, sided, Reference::Normal)
}

pub fn detection_power_with(theta: f64, se: f64, alpha: f64, sided: Sided, reference: Reference) -> Result<f64> {
    check_level(alpha)?;
    check_se(se)?;
    Ok(match sided {
        Sided::One => reference.cdf(reference.quantile(alpha) + theta / se),
        Sided::Two => {
            let z = reference.quantile(1.0 - alpha / 2.0);
            reference.cdf(-z + theta / se) + reference.cdf(-z - theta / se)
        }
    })
}

/// Detection power against a shifted null `H0: theta = theta0`.
pub fn shifted_detection_power(theta: f64, theta0: f64, se: f64, alpha: f64, sided: Sided) -> Result<f64> {
    detection_power(theta - theta0, se, alpha, sided)
}

/// Standard error of a difference of two independent sample means.
pub fn two_sample_se(sigma1: f64, n1: f64, sigma2: f64, n2: f64) -> Result<f64> {
    if !(sigma1 >= 0.0 && sigma2 >= 0.0 && n1 > 0.0 && n2 > 0.0) {
        return validation("two-sample standard error needs sigma >= 0 and n > 0");
    }
    let se = (sigma1 * sigma1 / n1 + sigma2 * sigma2 / n2).sqrt();
    check_se(se)?;
    Ok(se)
}

/// Lower bound `1 - r2_trend / (1 - r2_others)` on the ratio of effect
/// variances without and with an added trend term.
///
/// `r2_trend` is the R² of the effect regressor on the trend regressor and
/// `r2_others` its R² on the remaining regressors.
///
/// The bound treats R² as additive across regressor sets. That fails when the
/// trend is close to collinear with the other regressors, as with unit and
/// time dummies; there the exact ratio `(1 - R²_all) / (1 - r2_others)` can be
/// well below this value.
pub fn se_inflation_bound(r2_target_on_trend: f64, r2_target_on_others: f64) -> Result<f64> {
    for (name, v) in [("r2_target_on_trend", r2_target_on_trend), ("r2_target_on_others", r2_target_on_others)] {
        if !(0.0..1.0).contains(&v) {
            return validation(format!("{name} must lie in [0, 1), got {v}"));
        }
    }
    Ok(1.0 - r2_target_on_trend / (1.0 - r2_target_on_others))
}

/// Caveat attached to every observed-power value.
pub const EMPIRICAL_POWER_CAVEAT: &str = "observed power is a transformation of the p-value; it \
carries no information beyond it and tends to overstate the power of the design";

/// Power computed by plugging the observed estimate in as the true effect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalPower {
    /// Probability of rejecting in the direction of the estimate,
    /// `Phi(z - z_{1-alpha/2})`; equals 1/2 when the p-value equals alpha.
    pub power: f64,
    /// Adds the opposite-tail rejection probability `Phi(-z - z_{1-alpha/2})`.
    pub power_both_tails: f64,
    pub caveat: &'static str,
}

/// Observed power of a two-sided Wald test with p-value `p_value`, where
/// `z = q(1 - p/2)` is taken as the true standardized effect.
pub fn empirical_power(p_value: f64, alpha: f64) -> Result<EmpiricalPower> {
    check_level(alpha)?;
    if !(p_value > 0.0 && p_value < 1.0) {
        return validation(format!("p-value must lie in (0, 1), got {p_value}"));
    }
    let n = Reference::Normal;
    let z = n.quantile(1.0 - p_value / 2.0);
    let za = n.quantile(1.0 - alpha / 2.0);
    let power = n.cdf(z - za);
    Ok(EmpiricalPower {
        power,
        power_both_tails: power + n.cdf(-z - za),
        caveat: EMPIRICAL_POWER_CAVEAT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{norm_cdf, norm_quantile};

    #[test]
    fn mde_reference_value() {
        let m = mde(100.0, 1.0, 0.05, 0.8, Sided::One).unwrap();
        let expected = (norm_quantile(0.8) - norm_quantile(0.05)) / 10.0;
        assert!((m - expected).abs() < 1e-15);
        assert!((m - 0.2486).abs() < 5e-5);
        let m400 = mde(400.0, 1.0, 0.05, 0.8, Sided::One).unwrap();
        assert!((m400 - m / 2.0).abs() < 1e-15);
        assert_eq!(mde(100.0, 1.0, 0.05, 0.05, Sided::One).unwrap(), 0.0);
        assert!(mde(100.0, 1.0, 0.05, 0.01, Sided::One).is_err());
    }

    #[test]
    fn ni_power_round_trip() {
        let se = 0.1;
        let star = mde(100.0, 1.0, 0.05, 0.8, Sided::One).unwrap();
        let p = ni_power(star, 0.0, se, 0.05, Sided::One).unwrap();
        assert!((p - 0.8).abs() < 1e-12);
        let at_boundary = ni_power(0.3, 0.3, se, 0.05, Sided::One).unwrap();
        assert!((at_boundary - 0.05).abs() < 1e-12);
    }

    #[test]
    fn half_threshold_power() {
        let star = mde(100.0, 1.0, 0.05, 0.8, Sided::One).unwrap();
        let p = ni_power(0.5 * star, 0.0, 0.1, 0.05, Sided::One).unwrap();
        let z = norm_quantile(0.05) + 0.5 * (norm_quantile(0.8) - norm_quantile(0.05));
        assert!((p - norm_cdf(z)).abs() < 1e-14);
        assert!((p - 0.344).abs() < 5e-4);
    }

    #[test]
    fn two_sided_ni_power_is_lower() {
        for delta in [0.1, 0.2, 0.3, 0.5] {
            for theta in [-0.1, 0.0, 0.05] {
                let one = ni_power(delta, theta, 0.1, 0.05, Sided::One).unwrap();
                let two = ni_power(delta, theta, 0.1, 0.05, Sided::Two).unwrap();
                assert!(two <= one + 1e-15, "delta={delta} theta={theta}");
            }
        }
    }

    #[test]
    fn detection_power_values() {
        let p = detection_power(2.486_475, 1.0, 0.05, Sided::One).unwrap();
        assert!((p - 0.8).abs() < 1e-5);
        let p0 = detection_power(0.0, 1.0, 0.05, Sided::Two).unwrap();
        assert!((p0 - 0.05).abs() < 1e-14);
        let se1 = two_sample_se(1.0, 200.0, 1.0, 200.0).unwrap();
        let a = detection_power(0.2, se1, 0.05, Sided::Two).unwrap();
        let b = detection_power(0.2, (1.0f64 / 100.0).sqrt(), 0.05, Sided::Two).unwrap();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn se_bound_examples() {
        assert_eq!(se_inflation_bound(0.0, 0.3).unwrap(), 1.0);
        assert!((se_inflation_bound(0.2, 0.5).unwrap() - 0.6).abs() < 1e-15);
        assert!(se_inflation_bound(0.2, 1.0).is_err());
    }

    #[test]
    fn empirical_power_values() {
        let e = empirical_power(0.05, 0.05).unwrap();
        assert!((e.power - 0.5).abs() < 1e-12);
        assert!((e.power_both_tails - 0.5 - norm_cdf(-2.0 * 1.959_963_984_540_054)).abs() < 1e-12);
        let e = empirical_power(0.317_310_507_862_914, 0.05).unwrap();
        let same = norm_cdf(1.0 - 1.959_963_984_540_054);
        let expected = same + norm_cdf(-1.0 - 1.959_963_984_540_054);
        assert!((e.power - same).abs() < 1e-12);
        assert!((e.power_both_tails - expected).abs() < 1e-12);
        assert!((e.power_both_tails - 0.1700).abs() < 1e-4);
        let mut last = 1.0;
        for i in 1..100 {
            let e = empirical_power(i as f64 / 100.0, 0.05).unwrap();
            assert!(e.power < last && e.power_both_tails > e.power);
            last = e.power;
        }
        assert!(empirical_power(0.0, 0.05).is_err());
    }
}
