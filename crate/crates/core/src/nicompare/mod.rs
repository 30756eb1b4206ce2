//! Comparing treatment effects across nested specifications and subgroups,
//! cast as non-inferiority and equivalence tests.

mod compare;
mod resample;
mod stepup;
mod subgroup;
mod verdict;

pub use compare::{
    compare_did_fits, compare_scale_factor, compare_variance_difference, layout_scale_factor,
    scale_factor_w, ComparisonMethod, ComparisonResult, EffectSummary, PeriodEffect,
};
pub use resample::{
    cluster_bootstrap, compare_resampled, randomization_effect_test, randomization_inference,
    PermutationLevel, RandomizationInference, ResampleMethod, ResampleOptions, DEFAULT_GRID_POINTS,
    MIN_REPLICATIONS,
};
pub use stepup::{
    compare_step, compare_trends, one_step_up, stepwise, StepMethod, StepOutcome, StepUpOptions, StepUpReport,
};
pub use subgroup::{subgroup_compare, SubgroupEffect};
pub use verdict::{ni_curve, ni_test, threshold_grid, NiCurve, NiVerdict, Sided};
