use std::collections::BTreeSet;
use std::sync::Mutex;

use nalgebra::DMatrix;

use crate::error::{validation, Result};
use crate::panelspec::spec::{TrendSpec, DEFAULT_MAX_BASIS};

/// Knots of a three-knot restricted cubic spline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcsKnots {
    pub lower: f64,
    pub interior: f64,
    pub upper: f64,
}

impl RcsKnots {
    pub fn new(lower: f64, interior: f64, upper: f64) -> Result<Self> {
        if !(lower < interior && interior < upper) {
            return validation(format!(
                "restricted cubic knots must be strictly increasing, got {lower}, {interior}, {upper}"
            ));
        }
        Ok(Self {
            lower,
            interior,
            upper,
        })
    }

    /// Boundary knots at the extremes of `times`, interior knot at their median.
    pub fn from_times(times: &[f64]) -> Result<Self> {
        let mut distinct: Vec<f64> = times.to_vec();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() < 4 {
            return validation(format!(
                "restricted cubic trend needs at least 4 distinct reference times, got {}",
                distinct.len()
            ));
        }
        let m = distinct.len();
        let median = if m % 2 == 1 {
            distinct[m / 2]
        } else {
            0.5 * (distinct[m / 2 - 1] + distinct[m / 2])
        };
        Self::new(distinct[0], median, distinct[m - 1])
    }

    /// The nonlinear restricted cubic term at `t`.
    pub fn cubic_term(&self, t: f64) -> f64 {
        let cube = |v: f64| if v > 0.0 { v * v * v } else { 0.0 };
        let (k1, k2, k3) = (self.lower, self.interior, self.upper);
        let raw = cube(t - k1) - cube(t - k2) * (k3 - k1) / (k3 - k2)
            + cube(t - k3) * (k2 - k1) / (k3 - k2);
        raw / ((k3 - k1) * (k3 - k1))
    }
}

/// Restricted cubic spline columns `{t, cubic term}` at each time.
pub fn rcs_basis(times: &[f64], knots: &RcsKnots) -> [Vec<f64>; 2] {
    [
        times.to_vec(),
        times.iter().map(|&t| knots.cubic_term(t)).collect(),
    ]
}

/// Cubic B-spline basis with uniform knots on `[lower, upper]`, continued
/// linearly outside that range.
#[derive(Debug, Clone, PartialEq)]
pub struct BSplineBasis {
    lower: f64,
    upper: f64,
    size: usize,
}

impl BSplineBasis {
    pub fn new(lower: f64, upper: f64, size: usize) -> Result<Self> {
        if size < 4 {
            return validation(format!("cubic B-spline basis needs size >= 4, got {size}"));
        }
        if !(lower < upper) {
            return validation(format!("B-spline range [{lower}, {upper}] is empty"));
        }
        Ok(Self { lower, upper, size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    fn spacing(&self) -> f64 {
        (self.upper - self.lower) / (self.size - 3) as f64
    }

    fn knot(&self, i: usize) -> f64 {
        self.lower + (i as f64 - 3.0) * self.spacing()
    }

    /// Cox-de Boor values of all splines of `degree` at `x` within the range.
    fn inside(&self, x: f64, degree: usize) -> Vec<f64> {
        let h = self.spacing();
        let n_knots = self.size + 4;
        let span = (((x - self.lower) / h).floor() as isize + 3).clamp(3, self.size as isize - 1);
        let mut b = vec![0.0; n_knots - 1];
        b[span as usize] = 1.0;
        for d in 1..=degree {
            let mut next = vec![0.0; n_knots - 1 - d];
            for (j, out) in next.iter_mut().enumerate() {
                let (uj, ujd, uj1, ujd1) =
                    (self.knot(j), self.knot(j + d), self.knot(j + 1), self.knot(j + d + 1));
                *out = (x - uj) / (ujd - uj) * b[j] + (ujd1 - x) / (ujd1 - uj1) * b[j + 1];
            }
            b = next;
        }
        b
    }

    /// All `size` basis functions at `x`.
    pub fn evaluate(&self, x: f64) -> Vec<f64> {
        let edge = if x < self.lower {
            self.lower
        } else if x > self.upper {
            self.upper
        } else {
            return self.inside(x, 3);
        };
        let values = self.inside(edge, 3);
        let quad = self.inside(edge, 2);
        let h = self.spacing();
        (0..self.size)
            .map(|j| {
                let slope = (quad[j] - quad[j + 1]) / h;
                values[j] + slope * (x - edge)
            })
            .collect()
    }

    /// Second-order difference matrix, `(size - 2) x size`.
    pub fn difference_penalty(&self) -> DMatrix<f64> {
        let k = self.size;
        let mut d = DMatrix::zeros(k - 2, k);
        for i in 0..k - 2 {
            d[(i, i)] = 1.0;
            d[(i, i + 1)] = -2.0;
            d[(i, i + 2)] = 1.0;
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
enum BasisKind {
    None,
    Poly(u8),
    Rcs(RcsKnots),
    Spline {
        basis: BSplineBasis,
        lambda_grid: Vec<f64>,
    },
}

/// Trend-difference functions `g_j(t)` resolved against a reference period.
///
/// Spline functions are anchored on the reference period and continued
/// linearly beyond it. The first B-spline is dropped because the full basis
/// sums to one and that constant is absorbed by the unit effects.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendBasis {
    kind: BasisKind,
    names: Vec<String>,
}

/// Logs the sparse-basis warning once per (basis size, reference times) pair,
/// so repeated fits in resampling and simulation do not flood the log.
fn warn_sparse_basis(size: usize, n_ref: usize) {
    static SEEN: Mutex<BTreeSet<(usize, usize)>> = Mutex::new(BTreeSet::new());
    let first = SEEN.lock().map(|mut s| s.insert((size, n_ref))).unwrap_or(true);
    if first {
        log::warn!(
            "penalized spline basis of size {size} on only {n_ref} reference times; \
             at least {} are recommended",
            size + 2
        );
    }
}

/// Basis size used for a penalized spline when none is requested.
pub fn default_basis_size(n_reference: usize) -> usize {
    DEFAULT_MAX_BASIS.min(n_reference.saturating_sub(1)).max(4)
}

impl TrendBasis {
    /// Resolves `trend` over the reference times (the periods without effect
    /// indicators) of a model.
    pub fn resolve(trend: &TrendSpec, reference_times: &[u32]) -> Result<Self> {
        trend.validate()?;
        let times: Vec<f64> = reference_times.iter().map(|&t| t as f64).collect();
        let (kind, names) = match trend {
            TrendSpec::None => (BasisKind::None, Vec::new()),
            TrendSpec::Poly { degree } => {
                let names = (1..=*degree)
                    .map(|p| {
                        if p == 1 {
                            "trend_t".to_string()
                        } else {
                            format!("trend_t{p}")
                        }
                    })
                    .collect();
                (BasisKind::Poly(*degree), names)
            }
            TrendSpec::Rcs => (
                BasisKind::Rcs(RcsKnots::from_times(&times)?),
                vec!["trend_t".to_string(), "trend_rcs1".to_string()],
            ),
            TrendSpec::PSpline {
                basis_size,
                lambda_grid,
            } => {
                let n_ref = times.len();
                if n_ref < 3 {
                    return validation(format!(
                        "penalized spline trend needs at least 3 reference times, got {n_ref}"
                    ));
                }
                let size = basis_size.unwrap_or_else(|| default_basis_size(n_ref));
                if n_ref < size + 2 {
                    warn_sparse_basis(size, n_ref);
                }
                let lo = times.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = times.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let basis = BSplineBasis::new(lo, hi, size)?;
                let names = (2..=size).map(|j| format!("trend_bs{j}")).collect();
                (
                    BasisKind::Spline {
                        basis,
                        lambda_grid: lambda_grid.clone(),
                    },
                    names,
                )
            }
        };
        Ok(Self { kind, names })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Trend functions at time `t`.
    pub fn values(&self, t: f64) -> Vec<f64> {
        match &self.kind {
            BasisKind::None => Vec::new(),
            BasisKind::Poly(degree) => (1..=*degree as i32).map(|p| t.powi(p)).collect(),
            BasisKind::Rcs(knots) => vec![t, knots.cubic_term(t)],
            BasisKind::Spline { basis, .. } => basis.evaluate(t)[1..].to_vec(),
        }
    }

    /// Difference penalty over the trend columns, when the trend is penalized.
    pub fn penalty(&self) -> Option<DMatrix<f64>> {
        match &self.kind {
            BasisKind::Spline { basis, .. } => {
                let d = basis.difference_penalty();
                Some(d.columns(1, basis.size() - 1).into_owned())
            }
            _ => None,
        }
    }

    pub fn lambda_grid(&self) -> Option<&[f64]> {
        match &self.kind {
            BasisKind::Spline { lambda_grid, .. } => Some(lambda_grid),
            _ => None,
        }
    }

    pub fn is_penalized(&self) -> bool {
        matches!(self.kind, BasisKind::Spline { .. })
    }
}
