use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::panelspec::{PanelDataset, Unit};
use crate::seeding::substream;
use crate::simlab::config::{ScenarioConfig, Violation};

/// Deviation from parallel trends added to a treated unit at time `t`.
pub fn violation_term(config: &ScenarioConfig, t: u32) -> f64 {
    match config.violation {
        Violation::None => 0.0,
        Violation::Linear => config.violation_slope * t as f64,
        Violation::MidpointChange => config.violation_slope * t.saturating_sub(config.midpoint()) as f64,
        Violation::LastPreJump => {
            if t + 1 == config.t0() {
                config.jump_size()
            } else {
                0.0
            }
        }
    }
}

/// Draws trial `trial_index` of a scenario.
///
/// `y_it = a_i + g_t + effect * d_i 1(t >= t0) + v(t) d_i + e_it` with
/// independent standard normal `a_i`, `g_t` and `e_it`. Treated units are
/// numbered first (`1..=n_treated`).
pub fn generate_panel(config: &ScenarioConfig, trial_index: u64) -> Result<PanelDataset> {
    config.validate()?;
    let mut rng = substream(config.seed, &config.key(), trial_index);
    let n = config.n_units();
    let t_max = config.t_max();
    let t0 = config.t0();
    let unit_effects: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let time_effects: Vec<f64> = (0..t_max).map(|_| rng.sample(StandardNormal)).collect();
    let mut outcomes = Vec::with_capacity(n * t_max as usize);
    let mut units = Vec::with_capacity(n);
    for (i, a) in unit_effects.iter().enumerate() {
        let treated = i < config.n_treated;
        for t in 1..=t_max {
            let mut y = a + time_effects[t as usize - 1] + rng.sample::<f64, _>(StandardNormal);
            if treated {
                if t >= t0 {
                    y += config.effect_sd;
                }
                y += violation_term(config, t);
            }
            outcomes.push(y);
        }
        units.push(Unit {
            id: (i + 1).to_string(),
            treated,
            cluster: None,
            subgroup: None,
        });
    }
    PanelDataset::from_units(units, outcomes, t_max, t0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_trial() {
        let c = ScenarioConfig::new(5, 10, 5, 5, Violation::Linear, 1.0).with_seed(3);
        let a = generate_panel(&c, 7).unwrap();
        let b = generate_panel(&c, 7).unwrap();
        assert_eq!(a.outcomes(), b.outcomes());
        let other = generate_panel(&c, 8).unwrap();
        assert_ne!(a.outcomes(), other.outcomes());
    }

    #[test]
    fn shape_and_treatment() {
        let c = ScenarioConfig::new(5, 10, 5, 3, Violation::None, 1.0);
        let p = generate_panel(&c, 0).unwrap();
        assert_eq!(p.n_units(), 15);
        assert_eq!(p.n_treated(), 5);
        assert_eq!(p.t_max(), 8);
        assert_eq!(p.t0(), 6);
        assert!(p.units()[..5].iter().all(|u| u.treated));
    }

    #[test]
    fn violation_terms() {
        let mut c = ScenarioConfig::new(5, 10, 5, 5, Violation::LastPreJump, 0.5);
        assert_eq!(violation_term(&c, 5), 0.5);
        assert_eq!(violation_term(&c, 4), 0.0);
        assert_eq!(violation_term(&c, 6), 0.0);
        c.violation = Violation::MidpointChange;
        assert_eq!(violation_term(&c, 3), 0.0);
        assert!((violation_term(&c, 5) - 0.1).abs() < 1e-15);
        c.violation = Violation::Linear;
        assert!((violation_term(&c, 10) - 0.5).abs() < 1e-15);
    }
}
