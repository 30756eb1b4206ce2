//! Normal and Student-t reference distributions used by every test and power formula.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal parameters are valid")
}

/// Standard normal CDF, `erfc(-x / sqrt 2) / 2`.
pub fn norm_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

fn norm_density(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile function.
///
/// Starts from the statrs inverse and applies one Newton step against
/// [`norm_cdf`] in the nearer tail.
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        return -norm_quantile(1.0 - p);
    }
    let x = standard_normal().inverse_cdf(p);
    let d = norm_density(x);
    if d > 0.0 {
        x - (norm_cdf(x) - p) / d
    } else {
        x
    }
}

/// Reference distribution of a test statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reference {
    #[default]
    Normal,
    /// Student t with the given degrees of freedom.
    StudentT { df: f64 },
}

impl Reference {
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Reference::Normal => norm_cdf(x),
            Reference::StudentT { df } => {
                if x.is_nan() {
                    return f64::NAN;
                }
                StudentsT::new(0.0, 1.0, df)
                    .expect("degrees of freedom validated on construction")
                    .cdf(x)
            }
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            Reference::Normal => norm_quantile(p),
            Reference::StudentT { df } => {
                if p <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                if p >= 1.0 {
                    return f64::INFINITY;
                }
                StudentsT::new(0.0, 1.0, df)
                    .expect("degrees of freedom validated on construction")
                    .inverse_cdf(p)
            }
        }
    }

    /// Student t reference; `df` must be positive and finite.
    pub fn student_t(df: f64) -> crate::Result<Self> {
        if !(df > 0.0 && df.is_finite()) {
            return crate::error::validation(format!("degrees of freedom must be positive, got {df}"));
        }
        Ok(Reference::StudentT { df })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_reference_values() {
        assert!((norm_cdf(-1.0) - 0.158_655_253_931_457_05).abs() < 1e-15);
        assert!((norm_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-15);
        assert!((norm_quantile(0.95) - 1.644_853_626_951_472_2).abs() < 1e-13);
        assert!((norm_quantile(0.8) - 0.841_621_233_572_914_3).abs() < 1e-13);
        assert!((norm_quantile(0.025) + 1.959_963_984_540_054).abs() < 1e-13);
    }

    #[test]
    fn quantile_inverts_cdf() {
        // Upper-tail inputs lose digits in `cdf`, so the round trip is checked below 3.
        for i in 1..200 {
            let x = -7.0 + 10.0 * i as f64 / 200.0;
            let back = norm_quantile(norm_cdf(x));
            assert!((back - x).abs() < 1e-9 * x.abs().max(1.0), "x={x} back={back}");
        }
        for i in 1..1000 {
            let p = i as f64 / 1000.0;
            assert!((norm_cdf(norm_quantile(p)) - p).abs() < 1e-12);
        }
    }

    #[test]
    fn student_t_approaches_normal() {
        // qt(0.975, 10000) = 1.960201
        let t = Reference::student_t(1e4).unwrap();
        assert!((t.quantile(0.975) - 1.960_201).abs() < 1e-6);
        let t5 = Reference::student_t(5.0).unwrap();
        // qt(0.975, 5) = 2.570582
        assert!((t5.quantile(0.975) - 2.570_581_835_636_314).abs() < 1e-9);
        assert!(Reference::student_t(0.0).is_err());
    }
}
