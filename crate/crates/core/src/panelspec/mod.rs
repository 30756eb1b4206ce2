//! Panel data and difference-in-differences design construction.

mod basis;
mod contrast;
mod data;
mod design;
mod spec;

pub use basis::{default_basis_size, rcs_basis, BSplineBasis, RcsKnots, TrendBasis};
pub use contrast::{
    fit_did_contrast, ContrastModel, ContrastSelection, PanelContrast, PreparedContrast, Smoother,
};
pub use data::{compare_unit_ids, PanelDataset, PanelRecord, Unit};
pub use design::{
    build_design, effect_name, fit_did, pspline_fit, BuiltDesign, DesignLayout, DidFit, INTERCEPT,
    SUBGROUP_COLUMN,
};
pub use spec::{default_lambda_grid, DidModelSpec, EffectWindow, TrendSpec, DEFAULT_MAX_BASIS};
