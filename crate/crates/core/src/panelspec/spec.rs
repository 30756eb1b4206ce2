use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};

/// Largest basis size used when none is requested.
pub const DEFAULT_MAX_BASIS: usize = 10;

/// Smoothing parameters `10^-3, 10^-2.5, ..., 10^6`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=18).map(|i| 10f64.powf(-3.0 + 0.5 * i as f64)).collect()
}

/// Functional form of the treated-minus-control trend difference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrendSpec {
    None,
    /// Raw powers `t, t^2, ...` up to `degree`.
    Poly { degree: u8 },
    /// Linear term plus one restricted cubic term with knots at the
    /// minimum, median and maximum reference time.
    Rcs,
    /// Second-difference penalized cubic B-spline, smoothing chosen by GCV.
    PSpline {
        /// Number of B-spline functions; `None` picks a size from the
        /// reference-period length.
        basis_size: Option<usize>,
        lambda_grid: Vec<f64>,
    },
}

impl TrendSpec {
    pub fn linear() -> Self {
        TrendSpec::Poly { degree: 1 }
    }

    pub fn pspline() -> Self {
        TrendSpec::PSpline {
            basis_size: None,
            lambda_grid: default_lambda_grid(),
        }
    }

    pub fn is_penalized(&self) -> bool {
        matches!(self, TrendSpec::PSpline { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TrendSpec::None | TrendSpec::Rcs => Ok(()),
            TrendSpec::Poly { degree } => {
                if (1..=3).contains(degree) {
                    Ok(())
                } else {
                    validation(format!("polynomial trend degree must be 1, 2 or 3, got {degree}"))
                }
            }
            TrendSpec::PSpline {
                basis_size,
                lambda_grid,
            } => {
                if let Some(k) = basis_size {
                    if *k < 4 {
                        return validation(format!("spline basis size must be at least 4, got {k}"));
                    }
                }
                if lambda_grid.is_empty() {
                    return validation("smoothing grid is empty");
                }
                if lambda_grid.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
                    return validation("smoothing grid values must be positive and finite");
                }
                if lambda_grid.windows(2).any(|w| w[0] >= w[1]) {
                    return validation("smoothing grid must be strictly increasing");
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for TrendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TrendSpec::None => "none",
            TrendSpec::Poly { degree: 1 } => "linear",
            TrendSpec::Poly { degree: 2 } => "quadratic",
            TrendSpec::Poly { degree: 3 } => "cubic",
            TrendSpec::Poly { degree } => return write!(f, "poly{degree}"),
            TrendSpec::Rcs => "rcs",
            TrendSpec::PSpline { .. } => "pspline",
        };
        f.write_str(s)
    }
}

impl FromStr for TrendSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(TrendSpec::None),
            "linear" | "poly1" => Ok(TrendSpec::Poly { degree: 1 }),
            "quad" | "quadratic" | "poly2" => Ok(TrendSpec::Poly { degree: 2 }),
            "cubic" | "poly3" => Ok(TrendSpec::Poly { degree: 3 }),
            "rcs" => Ok(TrendSpec::Rcs),
            "pspline" | "gam" => Ok(TrendSpec::pspline()),
            other => validation(format!(
                "unknown trend `{other}` (expected none, linear, quad, cubic, rcs or pspline)"
            )),
        }
    }
}

/// Times whose treated-by-time interactions are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EffectWindow {
    /// Every time from the intervention start to the last period.
    Post,
    /// Pre-intervention times `start..t0`; rows from `t0` on are dropped.
    Placebo { start: u32 },
}

/// A fully specified difference-in-differences regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DidModelSpec {
    pub trend: TrendSpec,
    pub effect_window: EffectWindow,
    /// Adds `1(t >= t0 and w_i = 1)` for a placebo subgroup.
    pub include_subgroup_effect: bool,
}

impl DidModelSpec {
    pub fn post(trend: TrendSpec) -> Self {
        Self {
            trend,
            effect_window: EffectWindow::Post,
            include_subgroup_effect: false,
        }
    }

    pub fn placebo(trend: TrendSpec, start: u32) -> Self {
        Self {
            trend,
            effect_window: EffectWindow::Placebo { start },
            include_subgroup_effect: false,
        }
    }

    pub fn with_subgroup_effect(mut self) -> Self {
        self.include_subgroup_effect = true;
        self
    }

    /// Checks the specification against a panel with intervention start `t0`
    /// and `t_max` periods.
    pub fn validate(&self, t0: u32, t_max: u32) -> Result<()> {
        self.trend.validate()?;
        if let EffectWindow::Placebo { start } = self.effect_window {
            if start < 2 || start >= t0 {
                return validation(format!(
                    "placebo window start {start} must satisfy 2 <= start < t0 = {t0}"
                ));
            }
            if self.include_subgroup_effect {
                return validation("a subgroup effect needs post-intervention rows, which a placebo model drops");
            }
        }
        if t0 > t_max {
            return validation(format!("effect window is empty: t0 = {t0} > T = {t_max}"));
        }
        Ok(())
    }
}
