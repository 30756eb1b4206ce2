use nalgebra::DMatrix;

use crate::error::{validation, Error, Result};
use crate::linmod::{ols_fit, penalized_fit, DesignMatrix, FitResult, VcovKind};
use crate::panelspec::basis::TrendBasis;
use crate::panelspec::data::PanelDataset;
use crate::panelspec::spec::{DidModelSpec, EffectWindow};

pub const INTERCEPT: &str = "(Intercept)";
pub const SUBGROUP_COLUMN: &str = "subgroup_post";

/// Name of the treated-by-time indicator for time `k`.
pub fn effect_name(k: u32) -> String {
    format!("effect[t={k}]")
}

/// Which rows and interaction columns a model uses on a given panel.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignLayout {
    /// Last time index kept; rows after it are dropped.
    pub last_time: u32,
    pub t0: u32,
    pub effect_times: Vec<u32>,
    /// Kept times without an effect indicator.
    pub reference_times: Vec<u32>,
    pub trend: TrendBasis,
    pub subgroup_effect: bool,
}

impl DesignLayout {
    pub fn new(spec: &DidModelSpec, t0: u32, t_max: u32) -> Result<Self> {
        spec.validate(t0, t_max)?;
        let (first_effect, last_time) = match spec.effect_window {
            EffectWindow::Post => (t0, t_max),
            EffectWindow::Placebo { start } => (start, t0 - 1),
        };
        let reference_times: Vec<u32> = (1..first_effect).collect();
        let trend = TrendBasis::resolve(&spec.trend, &reference_times)?;
        Ok(Self {
            last_time,
            t0,
            effect_times: (first_effect..=last_time).collect(),
            reference_times,
            trend,
            subgroup_effect: spec.include_subgroup_effect,
        })
    }

    pub fn for_panel(spec: &DidModelSpec, data: &PanelDataset) -> Result<Self> {
        Self::new(spec, data.t0(), data.t_max())
    }

    pub fn effect_names(&self) -> Vec<String> {
        self.effect_times.iter().map(|&k| effect_name(k)).collect()
    }

    /// Treated-interacted columns: effect indicators followed by trend terms.
    pub fn interacted_names(&self) -> Vec<String> {
        let mut names = self.effect_names();
        names.extend(self.trend.names().iter().cloned());
        names
    }

    /// Treated-interacted regressor values at time `t`.
    pub fn interacted_values(&self, t: u32) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .effect_times
            .iter()
            .map(|&k| if k == t { 1.0 } else { 0.0 })
            .collect();
        v.extend(self.trend.values(t as f64));
        v
    }
}

/// A dense design with its outcome vector and row bookkeeping.
#[derive(Debug, Clone)]
pub struct BuiltDesign {
    pub design: DesignMatrix,
    pub outcome: Vec<f64>,
    pub effect_names: Vec<String>,
    /// Cluster id of every row, when the panel has clusters.
    pub cluster_ids: Option<Vec<String>>,
    pub layout: DesignLayout,
    /// Penalty over all design columns, for penalized trends.
    pub penalty: Option<DMatrix<f64>>,
}

/// Builds the fixed-effects design with explicit unit and time dummies.
///
/// Rows are unit-major over times `1..=last_time`. The first unit in natural
/// id order and time 1 are the omitted dummy categories.
pub fn build_design(data: &PanelDataset, spec: &DidModelSpec) -> Result<BuiltDesign> {
    let layout = DesignLayout::for_panel(spec, data)?;
    if layout.subgroup_effect {
        if !data.has_subgroup() {
            return validation("subgroup effect requested but the panel has no subgroup labels");
        }
        let flagged = data.units().iter().filter(|u| u.subgroup == Some(true)).count();
        if flagged == 0 {
            return validation("subgroup effect requested but no unit is in the subgroup");
        }
    }
    let n_units = data.n_units();
    let last = layout.last_time as usize;
    let n = n_units * last;
    let interacted = layout.interacted_names();
    let mut names = vec![INTERCEPT.to_string()];
    names.extend(data.units()[1..].iter().map(|u| format!("unit[{}]", u.id)));
    names.extend((2..=last).map(|t| format!("time[{t}]")));
    let first_interacted = names.len();
    names.extend(interacted.iter().cloned());
    if layout.subgroup_effect {
        names.push(SUBGROUP_COLUMN.to_string());
    }
    let p = names.len();

    let per_time: Vec<Vec<f64>> = (1..=last as u32).map(|t| layout.interacted_values(t)).collect();
    let mut x = DMatrix::zeros(n, p);
    let mut y = Vec::with_capacity(n);
    for (i, unit) in data.units().iter().enumerate() {
        let d = if unit.treated { 1.0 } else { 0.0 };
        let w = unit.subgroup == Some(true);
        for t in 1..=last {
            let row = i * last + t - 1;
            x[(row, 0)] = 1.0;
            if i > 0 {
                x[(row, i)] = 1.0;
            }
            if t > 1 {
                x[(row, n_units + t - 2)] = 1.0;
            }
            if unit.treated {
                for (j, v) in per_time[t - 1].iter().enumerate() {
                    x[(row, first_interacted + j)] = d * v;
                }
            }
            if layout.subgroup_effect && w && t as u32 >= layout.t0 {
                x[(row, p - 1)] = 1.0;
            }
            y.push(data.outcome(i, t as u32));
        }
    }
    let cluster_ids = data.has_clusters().then(|| {
        data.units()
            .iter()
            .flat_map(|u| std::iter::repeat_n(u.cluster.clone().unwrap_or_default(), last))
            .collect()
    });
    let penalty = layout.trend.penalty().map(|small| {
        let mut full = DMatrix::zeros(small.nrows(), p);
        let offset = first_interacted + layout.effect_times.len();
        full.columns_mut(offset, small.ncols()).copy_from(&small);
        full
    });
    Ok(BuiltDesign {
        design: DesignMatrix::new(names, x)?,
        outcome: y,
        effect_names: layout.effect_names(),
        cluster_ids,
        layout,
        penalty,
    })
}

/// A fitted difference-in-differences model.
#[derive(Debug, Clone)]
pub struct DidFit {
    pub spec: DidModelSpec,
    pub layout: DesignLayout,
    pub fit: FitResult,
}

impl DidFit {
    pub fn effect_names(&self) -> Vec<String> {
        self.layout.effect_names()
    }

    /// Equal-weight mean of the effect coefficients and its variance.
    pub fn average_effect(&self) -> Result<(f64, f64)> {
        let names = self.effect_names();
        let w = 1.0 / names.len() as f64;
        let terms: Vec<(&str, f64)> = names.iter().map(|n| (n.as_str(), w)).collect();
        self.fit.linear_combination(&terms)
    }

    /// Smoothing parameter chosen for a penalized trend.
    pub fn lambda(&self) -> Option<f64> {
        self.fit.penalty.map(|p| p.lambda)
    }

    pub fn is_penalized(&self) -> bool {
        self.fit.penalty.is_some()
    }
}

/// Fits a model on the dense dummy design.
///
/// Penalized trends ignore `vcov_kind` and select the smoothing parameter by
/// GCV (see [`pspline_fit`]).
pub fn fit_did(data: &PanelDataset, spec: &DidModelSpec, vcov_kind: VcovKind) -> Result<DidFit> {
    if spec.trend.is_penalized() {
        return pspline_fit(data, spec).map(|(fit, _)| fit);
    }
    let built = build_design(data, spec)?;
    let clusters = match vcov_kind {
        VcovKind::ClusterCr1 => Some(built.cluster_ids.as_deref().ok_or_else(|| {
            Error::Validation("cluster-robust variance needs cluster ids in the panel".into())
        })?),
        _ => None,
    };
    let fit = ols_fit(&built.design, &built.outcome, vcov_kind, clusters)?;
    Ok(DidFit {
        spec: spec.clone(),
        layout: built.layout,
        fit,
    })
}

/// Fits a penalized-spline trend model, choosing the smoothing parameter
/// that minimizes `n * RSS / (n - tr H)^2` over the grid.
///
/// Ties go to the smallest smoothing parameter. Returns the fit and the chosen value.
pub fn pspline_fit(data: &PanelDataset, spec: &DidModelSpec) -> Result<(DidFit, f64)> {
    let built = build_design(data, spec)?;
    let (penalty, grid) = match (&built.penalty, built.layout.trend.lambda_grid()) {
        (Some(p), Some(g)) => (p, g.to_vec()),
        _ => return validation("penalized fit requested for an unpenalized trend"),
    };
    let mut best: Option<FitResult> = None;
    let mut last_err = None;
    for lambda in grid {
        match penalized_fit(&built.design, &built.outcome, penalty, lambda) {
            Ok(fit) => {
                let gcv = fit.penalty.expect("penalized fit reports its penalty").gcv;
                let better = best
                    .as_ref()
                    .is_none_or(|b| gcv < b.penalty.expect("penalized").gcv);
                if better {
                    best = Some(fit);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let fit = best.ok_or_else(|| {
        last_err.unwrap_or_else(|| Error::Computation("no smoothing parameter could be fitted".into()))
    })?;
    let lambda = fit.penalty.expect("penalized").lambda;
    Ok((
        DidFit {
            spec: spec.clone(),
            layout: built.layout,
            fit,
        },
        lambda,
    ))
}
