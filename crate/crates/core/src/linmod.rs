//! Least-squares fitting on dense designs.
//!
//! Every fit goes through a Householder QR factorization of the design; the
//! normal equations are never formed. Rank deficiency is reported as an error
//! naming the offending columns instead of silently dropping them, because the
//! downstream comparison algebra depends on every requested column being
//! present in the fit.

use std::collections::{BTreeMap, HashSet};

use nalgebra::{DMatrix, DVector, Dyn, QR};
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};

/// A column is flagged as collinear when the part of it orthogonal to the
/// preceding columns is smaller than this fraction of its norm.
pub const RANK_TOLERANCE: f64 = 1e-9;

/// Named dense regressor matrix.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    names: Vec<String>,
    values: DMatrix<f64>,
}

impl DesignMatrix {
    pub fn new(names: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if values.ncols() == 0 {
            return validation("design matrix needs at least one column");
        }
        if names.len() != values.ncols() {
            return Err(Error::Dimension(format!(
                "{} column names for {} columns",
                names.len(),
                values.ncols()
            )));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return validation(format!("duplicate design column name `{name}`"));
            }
        }
        if let Some((idx, _)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            let col = idx / values.nrows().max(1);
            return validation(format!(
                "non-finite value in design column `{}` (row {})",
                names[col],
                idx % values.nrows().max(1)
            ));
        }
        Ok(Self { names, values })
    }

    /// Builds a design from `(name, column)` pairs of equal length.
    pub fn from_columns(columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let nrows = columns.first().map(|(_, c)| c.len()).unwrap_or(0);
        if let Some((name, col)) = columns.iter().find(|(_, c)| c.len() != nrows) {
            return Err(Error::Dimension(format!(
                "column `{name}` has {} rows, expected {nrows}",
                col.len()
            )));
        }
        let mut values = DMatrix::zeros(nrows, columns.len());
        let mut names = Vec::with_capacity(columns.len());
        for (j, (name, col)) in columns.into_iter().enumerate() {
            values.column_mut(j).copy_from_slice(&col);
            names.push(name);
        }
        Self::new(names, values)
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        self.index_of(name)
            .map(|j| self.values.column(j).iter().copied().collect())
    }

    /// Sub-design with the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let mut idx = Vec::with_capacity(names.len());
        for name in names {
            match self.index_of(name) {
                Some(j) => idx.push(j),
                None => return validation(format!("design has no column `{name}`")),
            }
        }
        let values = self.values.select_columns(idx.iter());
        Self::new(names.iter().map(|s| s.to_string()).collect(), values)
    }

    /// Design with rows reordered so that new row `i` is old row `order[i]`.
    pub fn reorder_rows(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.nrows() {
            return Err(Error::Dimension(format!(
                "row order of length {} for {} rows",
                order.len(),
                self.nrows()
            )));
        }
        Self::new(self.names.clone(), self.values.select_rows(order.iter()))
    }
}

/// Variance-covariance estimator attached to a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VcovKind {
    Iid,
    /// White heteroskedasticity-robust sandwich with factor n/(n-p).
    Hc1,
    /// Cluster-robust sandwich with factor G/(G-1) * (n-1)/(n-p).
    ClusterCr1,
}

/// Smoothing-penalty diagnostics of a penalized fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySummary {
    pub lambda: f64,
    /// Trace of the hat matrix.
    pub edf: f64,
    pub gcv: f64,
}

/// Result of one least-squares fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub vcov: DMatrix<f64>,
    /// Residual variance `rss / df_resid` (penalized fits use `n - edf`).
    pub sigma2: f64,
    pub rss: f64,
    pub df_resid: usize,
    pub n_obs: usize,
    pub r_squared: f64,
    pub vcov_kind: VcovKind,
    pub penalty: Option<PenaltySummary>,
}

impl FitResult {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coef(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|j| self.coefficients[j])
    }

    pub fn se(&self, name: &str) -> Option<f64> {
        self.index_of(name).map(|j| self.vcov[(j, j)].max(0.0).sqrt())
    }

    pub fn coefficient_map(&self) -> BTreeMap<String, f64> {
        self.names
            .iter()
            .cloned()
            .zip(self.coefficients.iter().copied())
            .collect()
    }

    /// Estimate and variance of `sum_j weights[j] * coef(names[j])`.
    pub fn linear_combination(&self, terms: &[(&str, f64)]) -> Result<(f64, f64)> {
        let mut idx = Vec::with_capacity(terms.len());
        for (name, w) in terms {
            let j = self
                .index_of(name)
                .ok_or_else(|| Error::Validation(format!("fit has no coefficient `{name}`")))?;
            idx.push((j, *w));
        }
        let estimate = idx.iter().map(|&(j, w)| w * self.coefficients[j]).sum();
        let mut var = 0.0;
        for &(a, wa) in &idx {
            for &(b, wb) in &idx {
                var += wa * wb * self.vcov[(a, b)];
            }
        }
        Ok((estimate, var))
    }
}

/// Thin QR factorization with a verified full column rank.
pub(crate) struct Factorized {
    qr: QR<f64, Dyn, Dyn>,
    pub r: DMatrix<f64>,
}

impl Factorized {
    /// Explicit thin `Q` factor.
    pub fn q(&self) -> DMatrix<f64> {
        self.qr.q()
    }

    /// First `p` entries of `Q'v`, without forming `Q`.
    pub fn qt_mul(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut w = v.clone();
        self.qr.q_tr_mul(&mut w);
        w.rows(0, self.r.ncols()).into_owned()
    }
}

/// Factorizes `x`, reporting columns whose orthogonal remainder vanishes.
pub(crate) fn factorize(x: &DMatrix<f64>, names: &[String]) -> Result<Factorized> {
    let (n, p) = x.shape();
    if n < p {
        return Err(Error::RankDeficient {
            columns: names[n..].to_vec(),
        });
    }
    let norms: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
    let qr = x.clone().qr();
    let r = qr.r();
    let collinear: Vec<String> = (0..p)
        .filter(|&j| norms[j] == 0.0 || r[(j, j)].abs() <= RANK_TOLERANCE * norms[j])
        .map(|j| names[j].clone())
        .collect();
    if !collinear.is_empty() {
        return Err(Error::RankDeficient { columns: collinear });
    }
    Ok(Factorized { qr, r })
}

fn upper_inverse(r: &DMatrix<f64>) -> DMatrix<f64> {
    let p = r.nrows();
    r.solve_upper_triangular(&DMatrix::identity(p, p))
        .expect("triangular factor has a nonzero diagonal after the rank check")
}

fn centered_tss(y: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| (v - mean) * (v - mean)).sum()
}

fn r_squared(rss: f64, tss: f64) -> f64 {
    if tss > 0.0 {
        (1.0 - rss / tss).clamp(0.0, 1.0)
    } else {
        1.0
    }
}

/// Sums scores `e_i q_i` within each cluster; returns the cluster count and meat.
fn cluster_meat(q: &DMatrix<f64>, resid: &DVector<f64>, clusters: &[String]) -> (usize, DMatrix<f64>) {
    let p = q.ncols();
    let mut scores: BTreeMap<&str, DVector<f64>> = BTreeMap::new();
    for (i, g) in clusters.iter().enumerate() {
        let s = scores
            .entry(g.as_str())
            .or_insert_with(|| DVector::zeros(p));
        for j in 0..p {
            s[j] += resid[i] * q[(i, j)];
        }
    }
    let mut meat = DMatrix::zeros(p, p);
    for s in scores.values() {
        meat += s * s.transpose();
    }
    (scores.len(), meat)
}

/// Ordinary least squares with the requested variance estimator.
pub fn ols_fit(
    x: &DesignMatrix,
    y: &[f64],
    vcov_kind: VcovKind,
    cluster_ids: Option<&[String]>,
) -> Result<FitResult> {
    let (n, p) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(Error::Dimension(format!(
            "outcome has {} rows, design has {n}",
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return validation("outcome contains non-finite values");
    }
    let clusters = match (vcov_kind, cluster_ids) {
        (VcovKind::ClusterCr1, None) => {
            return validation("cluster-robust variance requires cluster ids")
        }
        (VcovKind::ClusterCr1, Some(ids)) => {
            if ids.len() != n {
                return Err(Error::Dimension(format!(
                    "{} cluster ids for {n} rows",
                    ids.len()
                )));
            }
            let distinct: HashSet<&String> = ids.iter().collect();
            if distinct.len() < 2 {
                return validation("cluster-robust variance needs at least 2 clusters");
            }
            Some(ids)
        }
        _ => None,
    };

    let fact = factorize(x.values(), x.names())?;
    if n == p {
        return validation(format!(
            "no residual degrees of freedom ({n} observations, {p} columns)"
        ));
    }
    let yv = DVector::from_column_slice(y);
    let qty = fact.qt_mul(&yv);
    let beta = fact
        .r
        .solve_upper_triangular(&qty)
        .expect("nonsingular triangular factor");
    let resid = &yv - x.values() * &beta;
    let rss = resid.norm_squared();
    let df_resid = n - p;
    let sigma2 = rss / df_resid as f64;
    let r_inv = upper_inverse(&fact.r);

    let vcov = match vcov_kind {
        VcovKind::Iid => &r_inv * r_inv.transpose() * sigma2,
        VcovKind::Hc1 => {
            let q = fact.q();
            let mut meat = DMatrix::zeros(p, p);
            for i in 0..n {
                let qi = q.row(i).transpose();
                meat += &qi * qi.transpose() * (resid[i] * resid[i]);
            }
            let factor = n as f64 / (n - p) as f64;
            &r_inv * meat * r_inv.transpose() * factor
        }
        VcovKind::ClusterCr1 => {
            let ids = clusters.expect("checked above");
            let (g, meat) = cluster_meat(&fact.q(), &resid, ids);
            if g < 5 {
                log::warn!("cluster-robust variance with only {g} clusters is unreliable");
            }
            let factor = (g as f64 / (g as f64 - 1.0)) * ((n as f64 - 1.0) / (n - p) as f64);
            &r_inv * meat * r_inv.transpose() * factor
        }
    };
    let vcov = symmetrize(vcov);

    Ok(FitResult {
        names: x.names().to_vec(),
        coefficients: beta.iter().copied().collect(),
        vcov,
        sigma2,
        rss,
        df_resid,
        n_obs: n,
        r_squared: r_squared(rss, centered_tss(y)),
        vcov_kind,
        penalty: None,
    })
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Penalized least squares minimizing `|y - Xb|^2 + lambda * |Pb|^2`.
///
/// `penalty` has one column per design column. The reported variance is the
/// frequentist sandwich `sigma2 * A^-1 X'X A^-1` with `A = X'X + lambda P'P`;
/// it is descriptive only.
pub fn penalized_fit(
    x: &DesignMatrix,
    y: &[f64],
    penalty: &DMatrix<f64>,
    lambda: f64,
) -> Result<FitResult> {
    let (n, p) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(Error::Dimension(format!(
            "outcome has {} rows, design has {n}",
            y.len()
        )));
    }
    if penalty.ncols() != p {
        return Err(Error::Dimension(format!(
            "penalty has {} columns, design has {p}",
            penalty.ncols()
        )));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return validation(format!("smoothing parameter must be positive, got {lambda}"));
    }
    let m = penalty.nrows();
    let mut aug = DMatrix::zeros(n + m, p);
    aug.rows_mut(0, n).copy_from(x.values());
    aug.rows_mut(n, m).copy_from(&(penalty * lambda.sqrt()));
    let fact = factorize(&aug, x.names())?;
    let mut yaug = DVector::zeros(n + m);
    yaug.rows_mut(0, n).copy_from_slice(y);
    let qty = fact.qt_mul(&yaug);
    let beta = fact
        .r
        .solve_upper_triangular(&qty)
        .expect("nonsingular triangular factor");
    let resid = DVector::from_column_slice(y) - x.values() * &beta;
    let rss = resid.norm_squared();
    let r_inv = upper_inverse(&fact.r);
    // X R^-1 equals the top block of the thin Q factor.
    let xq = fact.q().rows(0, n).into_owned();
    let edf: f64 = xq.iter().map(|v| v * v).sum();
    let resid_df = n as f64 - edf;
    if resid_df <= 0.0 {
        return validation("penalized fit leaves no residual degrees of freedom");
    }
    let sigma2 = rss / resid_df;
    let gcv = n as f64 * rss / (resid_df * resid_df);
    let vcov = symmetrize(&r_inv * (xq.transpose() * &xq) * r_inv.transpose() * sigma2);
    Ok(FitResult {
        names: x.names().to_vec(),
        coefficients: beta.iter().copied().collect(),
        vcov,
        sigma2,
        rss,
        df_resid: resid_df.floor() as usize,
        n_obs: n,
        r_squared: r_squared(rss, centered_tss(y)),
        vcov_kind: VcovKind::Iid,
        penalty: Some(PenaltySummary { lambda, edf, gcv }),
    })
}

/// Coefficient of determination from regressing `target_col` on `conditioning_cols`.
///
/// Uses the centered total sum of squares; an intercept enters only if it is
/// one of the conditioning columns. The value is clamped to `[0, 1]`, so an
/// empty conditioning set yields 0.
pub fn partial_r2(x: &DesignMatrix, target_col: &str, conditioning_cols: &[&str]) -> Result<f64> {
    let target = x
        .column(target_col)
        .ok_or_else(|| Error::Validation(format!("design has no column `{target_col}`")))?;
    if conditioning_cols.contains(&target_col) {
        return validation(format!(
            "target column `{target_col}` cannot also be a conditioning column"
        ));
    }
    let tss = centered_tss(&target);
    let scale = target.iter().map(|v| v * v).sum::<f64>().max(1.0);
    if tss <= 1e-24 * scale {
        return validation(format!("target column `{target_col}` is constant"));
    }
    if conditioning_cols.is_empty() {
        return Ok(0.0);
    }
    let cond = x.select(conditioning_cols)?;
    let fact = factorize(cond.values(), cond.names())?;
    let tv = DVector::from_vec(target);
    let q = fact.q();
    let fitted = &q * (q.transpose() * &tv);
    let rss = (&tv - fitted).norm_squared();
    Ok((1.0 - rss / tss).clamp(0.0, 1.0))
}
