//! Exact fitting of balanced-panel DID models through the treated-minus-control
//! contrast series.
//!
//! On a balanced panel with one observation per unit and time, partialling the
//! unit and time dummies out of a treated-interacted column `d_i g(t)` leaves
//! `(d_i - mean d)(g(t) - mean g)`. The interaction coefficients therefore solve
//! a `T`-row problem in the contrast `z_t = mean_treated(y_t) - mean_control(y_t)`
//! weighted by `D = N1 N0 / N`, and the residual sum of squares of the full
//! regression follows from the two-way within sum of squares. Coefficients,
//! residual variance and variances agree with the dense dummy regression to
//! rounding error while costing `O(N T)` per refit.

use nalgebra::{DMatrix, DVector};

use crate::error::{validation, Error, Result};
use crate::linmod::{factorize, FitResult, PenaltySummary, VcovKind};
use crate::panelspec::data::PanelDataset;
use crate::panelspec::design::{DesignLayout, DidFit};
use crate::panelspec::spec::DidModelSpec;

/// Sufficient statistics of a balanced panel for the interaction coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelContrast {
    /// Treated mean minus control mean at times `1..=n_times`.
    pub contrast: Vec<f64>,
    /// `N1 N0 / N`.
    pub weight: f64,
    /// Residual sum of squares after two-way fixed effects.
    pub within_ss: f64,
    /// Centered total sum of squares.
    pub total_ss: f64,
    pub n_units: usize,
    pub n_treated: usize,
}

fn arm_contrast(rows: &[&[f64]], treated: &[bool], n_times: usize) -> Result<(Vec<f64>, usize)> {
    let n1 = treated.iter().filter(|&&d| d).count();
    let n0 = treated.len() - n1;
    if n1 == 0 || n0 == 0 {
        return validation("contrast needs at least one treated and one control unit");
    }
    let mut sum1 = vec![0.0; n_times];
    let mut sum0 = vec![0.0; n_times];
    for (row, &d) in rows.iter().zip(treated) {
        let acc = if d { &mut sum1 } else { &mut sum0 };
        for (a, v) in acc.iter_mut().zip(&row[..n_times]) {
            *a += v;
        }
    }
    let z = sum1
        .iter()
        .zip(&sum0)
        .map(|(a, b)| a / n1 as f64 - b / n0 as f64)
        .collect();
    Ok((z, n1))
}

impl PanelContrast {
    /// Statistics over the first `n_times` periods of the given unit rows.
    pub fn from_rows(rows: &[&[f64]], treated: &[bool], n_times: usize) -> Result<Self> {
        if rows.len() != treated.len() {
            return Err(Error::Dimension(format!(
                "{} outcome rows for {} treatment flags",
                rows.len(),
                treated.len()
            )));
        }
        if let Some(r) = rows.iter().find(|r| r.len() < n_times) {
            return Err(Error::Dimension(format!(
                "outcome row has {} periods, {n_times} needed",
                r.len()
            )));
        }
        let (contrast, n_treated) = arm_contrast(rows, treated, n_times)?;
        let n = rows.len();
        let mut time_mean = vec![0.0; n_times];
        for row in rows {
            for (m, v) in time_mean.iter_mut().zip(&row[..n_times]) {
                *m += v;
            }
        }
        time_mean.iter_mut().for_each(|m| *m /= n as f64);
        let grand = time_mean.iter().sum::<f64>() / n_times as f64;
        let mut within_ss = 0.0;
        let mut total_ss = 0.0;
        for row in rows {
            let unit_mean = row[..n_times].iter().sum::<f64>() / n_times as f64;
            for (v, m) in row[..n_times].iter().zip(&time_mean) {
                let e = v - unit_mean - m + grand;
                within_ss += e * e;
                total_ss += (v - grand) * (v - grand);
            }
        }
        Ok(Self {
            contrast,
            weight: (n_treated * (n - n_treated)) as f64 / n as f64,
            within_ss,
            total_ss,
            n_units: n,
            n_treated,
        })
    }

    pub fn from_panel(data: &PanelDataset, n_times: u32) -> Result<Self> {
        let rows: Vec<&[f64]> = (0..data.n_units()).map(|i| data.unit_outcomes(i)).collect();
        Self::from_rows(&rows, &data.treated_mask(), n_times as usize)
    }

    /// Same rows under a reassignment of treatment with unchanged arm sizes.
    ///
    /// Only the contrast is recomputed; the sums of squares do not depend on labels.
    pub fn relabeled(&self, rows: &[&[f64]], treated: &[bool]) -> Result<Self> {
        let (contrast, n1) = arm_contrast(rows, treated, self.contrast.len())?;
        if n1 != self.n_treated || rows.len() != self.n_units {
            return validation("relabeling must keep the number of units and treated units");
        }
        Ok(Self {
            contrast,
            ..self.clone()
        })
    }

    pub fn n_times(&self) -> usize {
        self.contrast.len()
    }

    pub fn n_obs(&self) -> usize {
        self.n_units * self.contrast.len()
    }

    /// Rank of the two-way fixed-effects block (intercept, unit and time dummies).
    pub fn fixed_effect_rank(&self) -> usize {
        self.n_units + self.n_times() - 1
    }
}

/// Centered interacted regressors of a model over its kept times.
#[derive(Debug, Clone)]
pub struct ContrastModel {
    names: Vec<String>,
    centered: DMatrix<f64>,
    n_effects: usize,
    /// Penalty over all interacted columns, zero on the effect columns.
    penalty: Option<DMatrix<f64>>,
    lambda_grid: Vec<f64>,
}

/// Linear operators of one fit: coefficients are `coef_op * z`.
#[derive(Debug, Clone)]
pub struct Smoother {
    pub lambda: Option<f64>,
    pub coef_op: DMatrix<f64>,
    pub hat: DMatrix<f64>,
    pub trace: f64,
    /// `coef_op * coef_op'`; scaled by `sigma2 / weight` it is the coefficient variance.
    pub unscaled_cov: DMatrix<f64>,
    /// Row of `coef_op` that yields the average effect.
    pub average_weights: Vec<f64>,
}

impl ContrastModel {
    pub fn new(layout: &DesignLayout) -> Result<Self> {
        if layout.subgroup_effect {
            return validation("the contrast route does not support a subgroup effect");
        }
        let names = layout.interacted_names();
        let t = layout.last_time as usize;
        let k = names.len();
        let mut centered = DMatrix::zeros(t, k);
        for time in 1..=t {
            let v = layout.interacted_values(time as u32);
            for j in 0..k {
                centered[(time - 1, j)] = v[j];
            }
        }
        for mut col in centered.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        let n_effects = layout.effect_times.len();
        let penalty = layout.trend.penalty().map(|small| {
            let mut full = DMatrix::zeros(small.nrows(), k);
            full.columns_mut(n_effects, small.ncols()).copy_from(&small);
            full
        });
        Ok(Self {
            names,
            centered,
            n_effects,
            penalty,
            lambda_grid: layout.trend.lambda_grid().map(<[f64]>::to_vec).unwrap_or_default(),
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_times(&self) -> usize {
        self.centered.nrows()
    }

    pub fn is_penalized(&self) -> bool {
        self.penalty.is_some()
    }

    fn smoother(&self, lambda: Option<f64>, weight: f64) -> Result<Smoother> {
        let (t, k) = self.centered.shape();
        let (aug, rows) = match (&self.penalty, lambda) {
            (Some(p), Some(l)) => {
                let mut aug = DMatrix::zeros(t + p.nrows(), k);
                aug.rows_mut(0, t).copy_from(&self.centered);
                aug.rows_mut(t, p.nrows()).copy_from(&(p * (l / weight).sqrt()));
                (aug, t)
            }
            _ => (self.centered.clone(), t),
        };
        let fact = factorize(&aug, &self.names)?;
        let r_inv = fact
            .r
            .solve_upper_triangular(&DMatrix::identity(k, k))
            .ok_or_else(|| Error::Computation("singular triangular factor".into()))?;
        let q_top = fact.q().rows(0, rows).into_owned();
        let coef_op = &r_inv * q_top.transpose();
        let hat = &self.centered * &coef_op;
        let trace = hat.trace();
        let unscaled_cov = &coef_op * coef_op.transpose();
        let w = 1.0 / self.n_effects as f64;
        let average_weights = (0..t)
            .map(|c| (0..self.n_effects).map(|j| coef_op[(j, c)]).sum::<f64>() * w)
            .collect();
        Ok(Smoother {
            lambda,
            coef_op,
            hat,
            trace,
            unscaled_cov,
            average_weights,
        })
    }

    /// Precomputes the fit operators for panels with contrast weight `weight`.
    ///
    /// Unpenalized operators do not depend on the weight; penalized ones are
    /// built for every smoothing parameter on the grid.
    pub fn prepare(&self, weight: f64) -> Result<PreparedContrast> {
        let smoothers = if self.penalty.is_some() {
            let mut out = Vec::with_capacity(self.lambda_grid.len());
            let mut last_err = None;
            for &l in &self.lambda_grid {
                match self.smoother(Some(l), weight) {
                    Ok(s) => out.push(s),
                    Err(e) => last_err = Some(e),
                }
            }
            if out.is_empty() {
                return Err(last_err
                    .unwrap_or_else(|| Error::Computation("empty smoothing grid".into())));
            }
            out
        } else {
            vec![self.smoother(None, weight)?]
        };
        Ok(PreparedContrast {
            names: self.names.clone(),
            weight,
            smoothers,
        })
    }
}

/// Fit operators for one model and contrast weight.
#[derive(Debug, Clone)]
pub struct PreparedContrast {
    names: Vec<String>,
    weight: f64,
    smoothers: Vec<Smoother>,
}

/// Outcome of fitting a contrast series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastSelection {
    pub index: usize,
    pub rss: f64,
    pub edf: f64,
    pub gcv: f64,
}

fn centered(z: &[f64]) -> DVector<f64> {
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    DVector::from_iterator(z.len(), z.iter().map(|v| v - mean))
}

impl PreparedContrast {
    pub fn smoothers(&self) -> &[Smoother] {
        &self.smoothers
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    fn check(&self, series: &PanelContrast) -> Result<()> {
        if series.n_times() != self.smoothers[0].hat.nrows() {
            return Err(Error::Dimension(format!(
                "contrast has {} periods, model uses {}",
                series.n_times(),
                self.smoothers[0].hat.nrows()
            )));
        }
        if (series.weight - self.weight).abs() > 1e-12 * self.weight && self.smoothers[0].lambda.is_some() {
            return validation("penalized operators were prepared for a different contrast weight");
        }
        Ok(())
    }

    /// Full-regression RSS and GCV for each smoother; returns the GCV minimizer
    /// (ties go to the smallest smoothing parameter).
    pub fn select(&self, series: &PanelContrast) -> Result<ContrastSelection> {
        self.check(series)?;
        let z = centered(&series.contrast);
        let n = series.n_obs() as f64;
        let base = series.within_ss - series.weight * z.norm_squared();
        let mut best: Option<ContrastSelection> = None;
        for (index, s) in self.smoothers.iter().enumerate() {
            let resid = &z - &s.hat * &z;
            let rss = (base + series.weight * resid.norm_squared()).max(0.0);
            let edf = series.fixed_effect_rank() as f64 + s.trace;
            let df = n - edf;
            if df <= 0.0 {
                continue;
            }
            let gcv = n * rss / (df * df);
            if best.is_none_or(|b| gcv < b.gcv) {
                best = Some(ContrastSelection {
                    index,
                    rss,
                    edf,
                    gcv,
                });
            }
        }
        best.ok_or_else(|| Error::Validation("model leaves no residual degrees of freedom".into()))
    }

    /// Average effect under the smoother at `index`.
    pub fn average_effect_with(&self, index: usize, contrast: &[f64]) -> f64 {
        self.smoothers[index]
            .average_weights
            .iter()
            .zip(contrast)
            .map(|(a, z)| a * z)
            .sum()
    }

    /// Average effect, selecting the smoothing parameter when penalized.
    pub fn average_effect(&self, series: &PanelContrast) -> Result<f64> {
        let index = if self.smoothers.len() == 1 {
            self.check(series)?;
            0
        } else {
            self.select(series)?.index
        };
        Ok(self.average_effect_with(index, &series.contrast))
    }

    /// Interaction coefficients with iid variances, as in the dense regression.
    pub fn fit(&self, series: &PanelContrast) -> Result<FitResult> {
        let sel = self.select(series)?;
        let s = &self.smoothers[sel.index];
        let z = DVector::from_column_slice(&series.contrast);
        let coef = &s.coef_op * z;
        let n = series.n_obs();
        let (sigma2, df_resid) = if s.lambda.is_some() {
            (sel.rss / (n as f64 - sel.edf), (n as f64 - sel.edf).floor() as usize)
        } else {
            let df = n - series.fixed_effect_rank() - self.names.len();
            (sel.rss / df as f64, df)
        };
        let vcov = &s.unscaled_cov * (sigma2 / series.weight);
        let r_squared = if series.total_ss > 0.0 {
            (1.0 - sel.rss / series.total_ss).clamp(0.0, 1.0)
        } else {
            1.0
        };
        Ok(FitResult {
            names: self.names.clone(),
            coefficients: coef.iter().copied().collect(),
            vcov,
            sigma2,
            rss: sel.rss,
            df_resid,
            n_obs: n,
            r_squared,
            vcov_kind: VcovKind::Iid,
            penalty: s.lambda.map(|lambda| PenaltySummary {
                lambda,
                edf: sel.edf,
                gcv: sel.gcv,
            }),
        })
    }
}

/// Fits a model through the contrast series. The result carries only the
/// treated-interacted coefficients; fixed effects are profiled out.
pub fn fit_did_contrast(data: &PanelDataset, spec: &DidModelSpec) -> Result<DidFit> {
    let layout = DesignLayout::for_panel(spec, data)?;
    let model = ContrastModel::new(&layout)?;
    let series = PanelContrast::from_panel(data, layout.last_time)?;
    let fit = model.prepare(series.weight)?.fit(&series)?;
    Ok(DidFit {
        spec: spec.clone(),
        layout,
        fit,
    })
}
