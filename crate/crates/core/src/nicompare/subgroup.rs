use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::linmod::VcovKind;
use crate::nicompare::verdict::{ni_test, NiVerdict, Sided};
use crate::panelspec::{fit_did, DidModelSpec, EffectWindow, PanelDataset, SUBGROUP_COLUMN};

/// Estimated post-period shift of a subgroup relative to its peers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubgroupEffect {
    pub kappa: f64,
    pub se: f64,
    pub n_subgroup_units: usize,
    /// True when every subgroup unit is treated, so `kappa` is a difference
    /// from the treatment effect; false when the subgroup is untreated and
    /// `kappa` is its own placebo effect.
    pub within_treated: bool,
    pub vcov_kind: VcovKind,
}

impl SubgroupEffect {
    pub fn ni_test(&self, delta: f64, alpha: f64, sided: Sided) -> Result<NiVerdict> {
        ni_test(self.kappa, self.se, delta, alpha, sided)
    }
}

/// Fits `spec` with the term `1(t >= t0 and w_i = 1)` and returns its coefficient.
pub fn subgroup_compare(data: &PanelDataset, spec: &DidModelSpec, vcov_kind: VcovKind) -> Result<SubgroupEffect> {
    if !data.has_subgroup() {
        return validation("panel has no subgroup labels");
    }
    if spec.effect_window != EffectWindow::Post {
        return validation("subgroup comparisons use the post-intervention window");
    }
    if spec.trend.is_penalized() {
        return validation("subgroup comparisons do not support penalized trends");
    }
    let members: Vec<_> = data.units().iter().filter(|u| u.subgroup == Some(true)).collect();
    if members.is_empty() {
        return validation("subgroup is empty");
    }
    let treated = members.iter().filter(|u| u.treated).count();
    if treated != 0 && treated != members.len() {
        return validation("subgroup mixes treated and untreated units");
    }
    let spec = spec.clone().with_subgroup_effect();
    let fit = fit_did(data, &spec, vcov_kind)?;
    Ok(SubgroupEffect {
        kappa: fit.fit.coef(SUBGROUP_COLUMN).expect("subgroup column present"),
        se: fit.fit.se(SUBGROUP_COLUMN).expect("subgroup column present"),
        n_subgroup_units: members.len(),
        within_treated: treated > 0,
        vcov_kind,
    })
}
