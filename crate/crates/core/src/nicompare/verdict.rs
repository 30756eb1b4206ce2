use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dist::{norm_cdf, norm_quantile};
use crate::error::{validation, Error, Result};

/// One-sided non-inferiority or two-sided equivalence (TOST) testing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sided {
    #[default]
    One,
    Two,
}

impl fmt::Display for Sided {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sided::One => "one",
            Sided::Two => "two",
        })
    }
}

impl FromStr for Sided {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "one" | "1" | "one-sided" => Ok(Sided::One),
            "two" | "2" | "two-sided" => Ok(Sided::Two),
            other => validation(format!("unknown sidedness `{other}` (expected one or two)")),
        }
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        validation(format!("alpha must lie in (0, 1), got {alpha}"))
    }
}

/// Outcome of testing `H0: kappa >= delta` (and `kappa <= -delta` when two-sided).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NiVerdict {
    pub delta: f64,
    pub sided: Sided,
    pub alpha: f64,
    /// p-value of the reported test; for TOST the larger of the two one-sided values.
    pub p_value: f64,
    pub reject_h0: bool,
    /// p-value against `H0: kappa >= delta`.
    pub p_upper: f64,
    /// p-value against `H0: kappa <= -delta` (two-sided only).
    pub p_lower: Option<f64>,
}

impl NiVerdict {
    pub(crate) fn from_tails(delta: f64, sided: Sided, alpha: f64, p_upper: f64, p_lower: Option<f64>) -> Self {
        let p_value = match p_lower {
            Some(pl) => p_upper.max(pl),
            None => p_upper,
        };
        Self {
            delta,
            sided,
            alpha,
            p_value,
            reject_h0: p_value < alpha,
            p_upper,
            p_lower,
        }
    }
}

fn upper_tail_p(kappa: f64, se: f64, delta: f64) -> f64 {
    if se == 0.0 {
        if kappa < delta {
            0.0
        } else {
            1.0
        }
    } else {
        norm_cdf((kappa - delta) / se)
    }
}

fn lower_tail_p(kappa: f64, se: f64, delta: f64) -> f64 {
    if se == 0.0 {
        if kappa > -delta {
            0.0
        } else {
            1.0
        }
    } else {
        norm_cdf(-(kappa + delta) / se)
    }
}

/// Normal-theory non-inferiority test of a difference `kappa` with standard error `se`.
///
/// With `se = 0` the verdict degenerates to comparing `kappa` with the threshold.
pub fn ni_test(kappa: f64, se: f64, delta: f64, alpha: f64, sided: Sided) -> Result<NiVerdict> {
    check_alpha(alpha)?;
    if !kappa.is_finite() || !delta.is_finite() {
        return validation("difference and threshold must be finite");
    }
    if !(se >= 0.0 && se.is_finite()) {
        return validation(format!("standard error must be finite and nonnegative, got {se}"));
    }
    if sided == Sided::Two && delta <= 0.0 {
        return validation(format!("two-sided equivalence needs delta > 0, got {delta}"));
    }
    let p_upper = upper_tail_p(kappa, se, delta);
    let p_lower = (sided == Sided::Two).then(|| lower_tail_p(kappa, se, delta));
    Ok(NiVerdict::from_tails(delta, sided, alpha, p_upper, p_lower))
}

/// One-sided non-inferiority p-values over a threshold grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NiCurve {
    pub kappa: f64,
    pub se: f64,
    pub alpha: f64,
    /// `(delta, p)` pairs in grid order.
    pub points: Vec<(f64, f64)>,
    /// Smallest threshold ruled out at level `alpha`: the upper one-sided
    /// `1 - alpha` confidence bound `kappa + z_{1-alpha} se`.
    pub crossing_delta: f64,
}

pub fn ni_curve(kappa: f64, se: f64, delta_grid: &[f64], alpha: f64) -> Result<NiCurve> {
    check_alpha(alpha)?;
    if delta_grid.windows(2).any(|w| w[0] > w[1]) {
        return validation("threshold grid must be sorted ascending");
    }
    let mut points = Vec::with_capacity(delta_grid.len());
    for &d in delta_grid {
        points.push((d, ni_test(kappa, se, d, alpha, Sided::One)?.p_value));
    }
    Ok(NiCurve {
        kappa,
        se,
        alpha,
        points,
        crossing_delta: kappa + norm_quantile(1.0 - alpha) * se,
    })
}

/// Evenly spaced grid of `n` thresholds from `lower` to `upper`.
pub fn threshold_grid(lower: f64, upper: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lower],
        _ => (0..n)
            .map(|i| lower + (upper - lower) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}
