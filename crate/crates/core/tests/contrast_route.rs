//! The contrast-series fits must reproduce the dense dummy regression.

mod common;

use common::{random_panel, rel_close};
use nidid::linmod::VcovKind;
use nidid::panelspec::{fit_did, fit_did_contrast, pspline_fit, DidModelSpec, TrendSpec};

fn assert_same_fit(spec: &DidModelSpec, seed: u64) {
    let data = random_panel(seed, 6, 9, 12, 7, 0.8, 0.05);
    let dense = fit_did(&data, spec, VcovKind::Iid).unwrap();
    let fast = fit_did_contrast(&data, spec).unwrap();
    for name in &fast.fit.names {
        let a = dense.fit.coef(name).unwrap();
        let b = fast.fit.coef(name).unwrap();
        assert!(rel_close(a, b, 1e-8, 1e-9), "{spec:?} {name}: {a} vs {b}");
        if !spec.trend.is_penalized() {
            let (sa, sb) = (dense.fit.se(name).unwrap(), fast.fit.se(name).unwrap());
            assert!(rel_close(sa, sb, 1e-8, 1e-10), "{name} se: {sa} vs {sb}");
        }
    }
    assert!(rel_close(dense.fit.rss, fast.fit.rss, 1e-9, 1e-9));
    assert!(rel_close(dense.fit.sigma2, fast.fit.sigma2, 1e-9, 1e-9));
    assert_eq!(dense.fit.df_resid, fast.fit.df_resid);
    let (da, dv) = dense.average_effect().unwrap();
    let (fa, fv) = fast.average_effect().unwrap();
    assert!(rel_close(da, fa, 1e-8, 1e-9));
    assert!(rel_close(dv, fv, 1e-8, 1e-12));
}

#[test]
fn unpenalized_trends_match_dense_fit() {
    for (i, trend) in ["none", "linear", "quadratic", "cubic", "rcs"].iter().enumerate() {
        let spec = DidModelSpec::post(trend.parse().unwrap());
        assert_same_fit(&spec, 100 + i as u64);
    }
}

#[test]
fn placebo_window_matches_dense_fit() {
    assert_same_fit(&DidModelSpec::placebo(TrendSpec::None, 4), 7);
    assert_same_fit(&DidModelSpec::placebo(TrendSpec::linear(), 5), 8);
}

#[test]
fn penalized_trend_matches_dense_fit() {
    let spec = DidModelSpec::post(TrendSpec::pspline());
    assert_same_fit(&spec, 11);
    let data = random_panel(11, 6, 9, 12, 7, 0.8, 0.05);
    let (dense, lambda) = pspline_fit(&data, &spec).unwrap();
    let fast = fit_did_contrast(&data, &spec).unwrap();
    assert_eq!(Some(lambda), fast.lambda());
    let (pd, pf) = (dense.fit.penalty.unwrap(), fast.fit.penalty.unwrap());
    assert!(rel_close(pd.edf, pf.edf, 1e-9, 1e-9));
    assert!(rel_close(pd.gcv, pf.gcv, 1e-9, 1e-12));
}
