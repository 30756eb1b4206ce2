//! Closed-form checks and invariances of the DID model fits.

mod common;

use common::{random_panel, rel_close};
use nidid::linmod::VcovKind;
use nidid::nicompare::{scale_factor_w, subgroup_compare};
use nidid::panelspec::{
    effect_name, fit_did, BSplineBasis, DidModelSpec, PanelDataset, RcsKnots, TrendSpec, Unit,
};
use proptest::prelude::*;

fn trends() -> Vec<TrendSpec> {
    ["none", "linear", "quadratic", "cubic", "rcs", "pspline"]
        .iter()
        .map(|s| s.parse().unwrap())
        .collect()
}

fn group_mean(data: &PanelDataset, treated: bool, t: u32) -> f64 {
    let idx: Vec<usize> = (0..data.n_units()).filter(|&i| data.units()[i].treated == treated).collect();
    idx.iter().map(|&i| data.outcome(i, t)).sum::<f64>() / idx.len() as f64
}

fn with_outcomes(data: &PanelDataset, f: impl Fn(usize, u32, f64) -> f64) -> PanelDataset {
    let t_max = data.t_max();
    let y = (0..data.n_units())
        .flat_map(|i| (1..=t_max).map(move |t| (i, t)))
        .map(|(i, t)| f(i, t, data.outcome(i, t)))
        .collect();
    data.with_outcomes(y).unwrap()
}

#[test]
fn two_by_two_is_the_difference_of_mean_changes() {
    let data = random_panel(1, 7, 11, 2, 2, 0.4, 0.0);
    let fit = fit_did(&data, &DidModelSpec::post(TrendSpec::None), VcovKind::Iid).unwrap();
    let expected = (group_mean(&data, true, 2) - group_mean(&data, true, 1))
        - (group_mean(&data, false, 2) - group_mean(&data, false, 1));
    assert!(rel_close(fit.fit.coef(&effect_name(2)).unwrap(), expected, 1e-10, 1e-12));
}

#[test]
fn event_study_effects_are_gaps_relative_to_the_pre_period_mean() {
    let data = random_panel(2, 5, 9, 10, 6, 0.7, 0.0);
    let fit = fit_did(&data, &DidModelSpec::post(TrendSpec::None), VcovKind::Iid).unwrap();
    let gap = |t| group_mean(&data, true, t) - group_mean(&data, false, t);
    let pre = (1..6).map(gap).sum::<f64>() / 5.0;
    for k in 6..=10 {
        let coef = fit.fit.coef(&effect_name(k)).unwrap();
        assert!(rel_close(coef, gap(k) - pre, 1e-9, 1e-11), "t = {k}");
    }
}

#[test]
fn effects_survive_unit_relabelling() {
    let data = random_panel(3, 4, 8, 9, 6, 0.5, 0.1);
    let renamed = data.relabel_units(|id| format!("r{:02}", 99 - id[1..].parse::<u32>().unwrap())).unwrap();
    for trend in trends() {
        let spec = DidModelSpec::post(trend);
        let a = fit_did(&data, &spec, VcovKind::Iid).unwrap().average_effect().unwrap();
        let b = fit_did(&renamed, &spec, VcovKind::Iid).unwrap().average_effect().unwrap();
        assert!(rel_close(a.0, b.0, 1e-9, 1e-11) && rel_close(a.1, b.1, 1e-8, 1e-12), "{spec:?}");
    }
}

#[test]
fn heavy_smoothing_approaches_the_linear_trend() {
    let data = random_panel(4, 8, 12, 14, 9, 0.6, 0.08);
    let stiff = TrendSpec::PSpline {
        basis_size: None,
        lambda_grid: vec![1e12],
    };
    let (p, _) = fit_did(&data, &DidModelSpec::post(stiff), VcovKind::Iid)
        .unwrap()
        .average_effect()
        .unwrap();
    let (l, _) = fit_did(&data, &DidModelSpec::post(TrendSpec::linear()), VcovKind::Iid)
        .unwrap()
        .average_effect()
        .unwrap();
    assert!((p - l).abs() < 1e-4, "{p} vs {l}");
}

#[test]
fn restricted_cubic_term_is_zero_below_and_linear_above_the_knots() {
    let knots = RcsKnots::new(1.0, 4.0, 9.0).unwrap();
    for t in [-3.0, 0.0, 0.5, 1.0] {
        assert_eq!(knots.cubic_term(t), 0.0);
    }
    let second_diff = |t: f64, h: f64| {
        knots.cubic_term(t + h) - 2.0 * knots.cubic_term(t) + knots.cubic_term(t - h)
    };
    for t in [10.0, 12.5, 40.0] {
        assert!(second_diff(t, 0.5).abs() < 1e-9 * knots.cubic_term(t).abs().max(1.0));
    }
    // continuous first and second derivatives at each knot
    let h = 1e-4;
    for k in [1.0, 4.0, 9.0] {
        let left = (knots.cubic_term(k) - knots.cubic_term(k - h)) / h;
        let right = (knots.cubic_term(k + h) - knots.cubic_term(k)) / h;
        assert!((left - right).abs() < 1e-3);
        let curv_left = second_diff(k - 2.0 * h, h) / (h * h);
        let curv_right = second_diff(k + 2.0 * h, h) / (h * h);
        assert!((curv_left - curv_right).abs() < 1e-2);
    }
}

#[test]
fn placebo_effects_vanish_without_pre_period_gaps() {
    let data = random_panel(5, 6, 6, 12, 8, 2.0, 0.0);
    let noiseless = with_outcomes(&data, |i, t, _| {
        let treated = data.units()[i].treated;
        i as f64 * 0.3 + (t as f64).sin() + if treated && t >= 8 { 2.0 } else { 0.0 }
    });
    for trend in [TrendSpec::None, TrendSpec::linear()] {
        let fit = fit_did(&noiseless, &DidModelSpec::placebo(trend, 4), VcovKind::Iid).unwrap();
        for k in 4..8 {
            assert!(fit.fit.coef(&effect_name(k)).unwrap().abs() < 1e-10);
        }
    }
}

#[test]
fn subgroup_effect_recovers_the_extra_shift() {
    let (t_max, t0, n) = (8u32, 5u32, 12usize);
    let units: Vec<Unit> = (0..n)
        .map(|i| Unit {
            id: (i + 1).to_string(),
            treated: i < 6,
            cluster: None,
            subgroup: Some(i < 2),
        })
        .collect();
    let y: Vec<f64> = (0..n)
        .flat_map(|i| (1..=t_max).map(move |t| (i, t)))
        .map(|(i, t)| {
            let post = t >= t0;
            let base = (i as f64).sqrt() + 0.2 * (t * t) as f64 / 10.0;
            let noise = ((i * 31 + t as usize * 17) % 13) as f64 / 100.0;
            base + noise
                + if i < 6 && post { 1.0 } else { 0.0 }
                + if i < 2 && post { 0.35 } else { 0.0 }
        })
        .collect();
    let data = PanelDataset::from_units(units, y, t_max, t0).unwrap();
    let clean = with_outcomes(&data, |i, t, v| v - ((i * 31 + t as usize * 17) % 13) as f64 / 100.0);
    let exact = subgroup_compare(&clean, &DidModelSpec::post(TrendSpec::None), VcovKind::Iid).unwrap();
    assert!((exact.kappa - 0.35).abs() < 1e-10);
    assert!(exact.se < 1e-8);
    assert!(exact.within_treated);
    let noisy = subgroup_compare(&data, &DidModelSpec::post(TrendSpec::linear()), VcovKind::Hc1).unwrap();
    assert!((noisy.kappa - 0.35).abs() < 0.2);
}

#[test]
fn bspline_basis_is_a_partition_of_unity() {
    let basis = BSplineBasis::new(1.0, 11.0, 8).unwrap();
    for i in 0..=100 {
        let x = 1.0 + 0.1 * i as f64;
        let v = basis.evaluate(x);
        assert_eq!(v.len(), 8);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(v.iter().all(|&b| b >= -1e-15));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fixed_effects_absorb_unit_and_time_shocks(seed in 0u64..500, a in -5.0f64..5.0, b in -5.0f64..5.0) {
        let data = random_panel(seed, 5, 7, 10, 6, 0.5, 0.0);
        let shocked = with_outcomes(&data, |i, t, v| v + a * (i as f64 + 1.0).ln() + b * (t as f64 * 0.7).cos());
        for trend in trends() {
            let spec = DidModelSpec::post(trend);
            let x = fit_did(&data, &spec, VcovKind::Iid).unwrap();
            let y = fit_did(&shocked, &spec, VcovKind::Iid).unwrap();
            for name in x.effect_names() {
                let (p, q) = (x.fit.coef(&name).unwrap(), y.fit.coef(&name).unwrap());
                prop_assert!(rel_close(p, q, 1e-7, 1e-8), "{:?} {}: {} vs {}", spec.trend, name, p, q);
            }
        }
    }

    #[test]
    fn treated_linear_drift_moves_only_the_no_trend_estimate(seed in 0u64..500, c in -0.5f64..0.5) {
        let data = random_panel(seed, 6, 6, 11, 7, 0.3, 0.0);
        let drifted = with_outcomes(&data, |i, t, v| {
            if data.units()[i].treated { v + c * t as f64 } else { v }
        });
        let w = scale_factor_w(7, 11).unwrap();
        for trend in trends() {
            let spec = DidModelSpec::post(trend.clone());
            let (p, _) = fit_did(&data, &spec, VcovKind::Iid).unwrap().average_effect().unwrap();
            let (q, _) = fit_did(&drifted, &spec, VcovKind::Iid).unwrap().average_effect().unwrap();
            let expected = if trend == TrendSpec::None { p + c * w } else { p };
            prop_assert!(rel_close(q, expected, 1e-7, 1e-8), "{}: {} vs {}", trend, q, expected);
        }
    }
}
