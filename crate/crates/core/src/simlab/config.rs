use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::nicompare::scale_factor_w;

pub const DEFAULT_VIOLATION_SLOPE: f64 = 0.05;
pub const DEFAULT_TRIALS: usize = 200;

/// Departure from parallel trends built into a simulated panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Violation {
    None,
    /// The effect appears one period early, in the last pre-intervention period.
    LastPreJump,
    /// Treated units drift by `slope * t` throughout.
    Linear,
    /// Treated units start drifting after the middle of the pre-period.
    MidpointChange,
}

impl Violation {
    pub const ALL: [Violation; 4] = [
        Violation::None,
        Violation::LastPreJump,
        Violation::Linear,
        Violation::MidpointChange,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Violation::None => "none",
            Violation::LastPreJump => "last_pre_jump",
            Violation::Linear => "linear",
            Violation::MidpointChange => "midpoint_change",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Violation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Violation::ALL
            .into_iter()
            .find(|v| v.as_str() == s.trim().to_ascii_lowercase().replace('-', "_"))
            .ok_or_else(|| {
                Error::Validation(format!(
                    "unknown violation `{s}` (expected none, last_pre_jump, linear or midpoint_change)"
                ))
            })
    }
}

fn default_slope() -> f64 {
    DEFAULT_VIOLATION_SLOPE
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

/// One cell of a simulation grid. Outcomes are in units of the noise sd.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_treated: usize,
    pub n_comparison: usize,
    pub n_pre: u32,
    pub n_post: u32,
    pub violation: Violation,
    pub effect_sd: f64,
    /// Per-period drift of the linear and midpoint violations.
    #[serde(default = "default_slope")]
    pub violation_slope: f64,
    /// Size of the last-pre-period jump; defaults to `effect_sd`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jump: Option<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn new(
        n_treated: usize,
        n_comparison: usize,
        n_pre: u32,
        n_post: u32,
        violation: Violation,
        effect_sd: f64,
    ) -> Self {
        Self {
            n_treated,
            n_comparison,
            n_pre,
            n_post,
            violation,
            effect_sd,
            violation_slope: DEFAULT_VIOLATION_SLOPE,
            jump: None,
            trials: DEFAULT_TRIALS,
            seed: 0,
        }
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_slope(mut self, slope: f64) -> Self {
        self.violation_slope = slope;
        self
    }

    /// First post-intervention period.
    pub fn t0(&self) -> u32 {
        self.n_pre + 1
    }

    pub fn t_max(&self) -> u32 {
        self.n_pre + self.n_post
    }

    pub fn n_units(&self) -> usize {
        self.n_treated + self.n_comparison
    }

    pub fn jump_size(&self) -> f64 {
        self.jump.unwrap_or(self.effect_sd)
    }

    /// Post-period mean time minus pre-period mean time.
    pub fn scale_factor(&self) -> f64 {
        scale_factor_w(self.t0(), self.t_max()).expect("validated scenario")
    }

    /// Period after which the midpoint violation starts to accumulate.
    pub fn midpoint(&self) -> u32 {
        self.n_pre.div_ceil(2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_treated == 0 || self.n_comparison == 0 {
            return validation("scenarios need at least one treated and one comparison group");
        }
        if self.n_pre < 2 || self.n_post < 1 {
            return validation(format!(
                "scenarios need at least 2 pre-periods and 1 post-period, got {} and {}",
                self.n_pre, self.n_post
            ));
        }
        if self.trials == 0 {
            return validation("trials must be positive");
        }
        let finite = [self.effect_sd, self.violation_slope, self.jump_size()];
        if finite.iter().any(|v| !v.is_finite()) {
            return validation("effect size, slope and jump must be finite");
        }
        Ok(())
    }

    /// Checks membership in the published simulation grid.
    pub fn validate_standard(&self) -> Result<()> {
        self.validate()?;
        let ok = [5, 10, 50].contains(&self.n_treated)
            && [10, 50, 100].contains(&self.n_comparison)
            && [5, 15].contains(&self.n_pre)
            && [5, 15].contains(&self.n_post)
            && (self.effect_sd == 0.5 || self.effect_sd == 1.0);
        if ok {
            Ok(())
        } else {
            validation(format!("scenario {} is outside the standard grid", self.key()))
        }
    }

    /// Identifier naming every data-generating parameter; also keys the random streams.
    pub fn key(&self) -> String {
        let mut key = format!(
            "t{}_c{}_pre{}_post{}_{}_es{}_slope{}",
            self.n_treated,
            self.n_comparison,
            self.n_pre,
            self.n_post,
            self.violation,
            self.effect_sd,
            self.violation_slope
        );
        if let Some(j) = self.jump {
            key.push_str(&format!("_jump{j}"));
        }
        key
    }

    /// Ordering used for grid output: sizes numerically, then violation, effect and the rest.
    pub fn sort_cmp(&self, other: &Self) -> Ordering {
        (self.n_treated, self.n_comparison, self.n_pre, self.n_post, self.violation)
            .cmp(&(other.n_treated, other.n_comparison, other.n_pre, other.n_post, other.violation))
            .then(self.effect_sd.total_cmp(&other.effect_sd))
            .then(self.violation_slope.total_cmp(&other.violation_slope))
            .then(self.jump_size().total_cmp(&other.jump_size()))
            .then(self.trials.cmp(&other.trials))
            .then(self.seed.cmp(&other.seed))
    }
}

/// The full 3 x 3 x 2 x 2 x 4 x 2 grid of group counts, period counts,
/// violations and effect sizes.
pub fn standard_grid(trials: usize, seed: u64) -> Vec<ScenarioConfig> {
    let mut out = Vec::with_capacity(288);
    for n_treated in [5, 10, 50] {
        for n_comparison in [10, 50, 100] {
            for n_pre in [5, 15] {
                for n_post in [5, 15] {
                    for violation in Violation::ALL {
                        for effect_sd in [0.5, 1.0] {
                            out.push(
                                ScenarioConfig::new(n_treated, n_comparison, n_pre, n_post, violation, effect_sd)
                                    .with_trials(trials)
                                    .with_seed(seed),
                            );
                        }
                    }
                }
            }
        }
    }
    out
}
