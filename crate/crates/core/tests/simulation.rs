//! Monte Carlo properties of the simulation scenarios.

use nidid::nicompare::scale_factor_w;
use nidid::panelspec::TrendSpec;
use nidid::simlab::{generate_panel, run_scenario, ScenarioConfig, SimOptions, Violation};

const SEED: u64 = 20191201;

fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

#[test]
fn every_model_holds_its_size_without_effect_or_violation() {
    let config = ScenarioConfig::new(10, 40, 6, 4, Violation::None, 0.0)
        .with_trials(400)
        .with_seed(SEED);
    let result = run_scenario(&config, &SimOptions::default()).unwrap();
    assert_eq!(result.excluded_trials, 0);
    let tol = 2.0 * binomial_se(0.05, 400);
    for m in &result.models {
        assert!((m.power - 0.05).abs() <= tol, "{}: size {}", m.model, m.power);
    }
}

#[test]
fn linear_violation_biases_only_the_no_trend_model() {
    let slope = 0.1;
    let config = ScenarioConfig::new(10, 40, 8, 4, Violation::Linear, 0.3)
        .with_slope(slope)
        .with_trials(300)
        .with_seed(SEED);
    let options = SimOptions::default().with_models(vec![TrendSpec::None, TrendSpec::linear(), TrendSpec::Rcs]);
    let result = run_scenario(&config, &options).unwrap();
    let w = scale_factor_w(config.t0(), config.t_max()).unwrap();
    let none = result.model("none").unwrap();
    assert!((none.bias - w * slope).abs() <= 3.0 * none.bias_mc_se, "{} vs {}", none.bias, w * slope);
    for name in ["linear", "rcs"] {
        let m = result.model(name).unwrap();
        assert!(m.bias.abs() <= 3.0 * m.bias_mc_se, "{name}: {}", m.bias);
        assert!(m.mse >= m.bias * m.bias);
    }
}

#[test]
fn rule_out_power_tracks_detection_power_without_violation() {
    let config = ScenarioConfig::new(10, 50, 5, 5, Violation::None, 0.4)
        .with_trials(300)
        .with_seed(SEED);
    let options = SimOptions::default().with_models(vec![
        TrendSpec::None,
        TrendSpec::linear(),
        TrendSpec::Poly { degree: 2 },
        TrendSpec::Rcs,
    ]);
    let result = run_scenario(&config, &options).unwrap();
    for m in result.models.iter().filter(|m| m.model != "none") {
        let rule_out = m.rule_out_power.unwrap();
        assert!((rule_out - m.power).abs() <= 0.05, "{}: {} vs {}", m.model, rule_out, m.power);
        assert!((0.0..=1.0).contains(&rule_out));
    }
    assert!(result.model("none").unwrap().rule_out_power.is_none());
}

#[test]
fn aggregates_do_not_depend_on_thread_count() {
    let config = ScenarioConfig::new(5, 20, 6, 3, Violation::MidpointChange, 0.5)
        .with_trials(40)
        .with_seed(SEED);
    let options = SimOptions {
        keep_estimates: true,
        ..SimOptions::default()
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_scenario(&config, &options).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn trial_panels_are_reproducible_and_distinct() {
    let config = ScenarioConfig::new(3, 7, 5, 2, Violation::LastPreJump, 1.0).with_seed(SEED);
    let a = generate_panel(&config, 3).unwrap();
    assert_eq!(a, generate_panel(&config, 3).unwrap());
    assert_ne!(a.outcomes(), generate_panel(&config, 4).unwrap().outcomes());
    assert_ne!(a.outcomes(), generate_panel(&config.clone().with_seed(SEED + 1), 3).unwrap().outcomes());
}
