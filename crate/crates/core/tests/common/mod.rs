#![allow(dead_code)]

use nidid::panelspec::{PanelDataset, Unit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Balanced panel with unit and time effects, iid noise, a treatment effect
/// from `t0` on and a linear trend difference `slope * t` for treated units.
pub fn random_panel(
    seed: u64,
    n_treated: usize,
    n_control: usize,
    t_max: u32,
    t0: u32,
    effect: f64,
    slope: f64,
) -> PanelDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_treated + n_control;
    let gamma: Vec<f64> = (0..t_max).map(|_| rng.sample(StandardNormal)).collect();
    let mut units = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n * t_max as usize);
    for i in 0..n {
        let treated = i < n_treated;
        let alpha: f64 = rng.sample(StandardNormal);
        for t in 1..=t_max {
            let d = if treated { 1.0 } else { 0.0 };
            let post = if t >= t0 { effect } else { 0.0 };
            let eps: f64 = rng.sample(StandardNormal);
            y.push(alpha + gamma[t as usize - 1] + d * (post + slope * t as f64) + eps);
        }
        units.push(Unit {
            id: format!("g{i}"),
            treated,
            cluster: None,
            subgroup: None,
        });
    }
    PanelDataset::from_units(units, y, t_max, t0).unwrap()
}

pub fn rel_close(a: f64, b: f64, rel: f64, abs: f64) -> bool {
    (a - b).abs() <= abs + rel * a.abs().max(b.abs())
}
