//! Randomization inference and cluster bootstrap for differences in average
//! effects, computed on the treated-minus-control contrast series.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::nicompare::compare::{ComparisonMethod, ComparisonResult};
use crate::nicompare::verdict::{check_alpha, NiVerdict, Sided};
use crate::panelspec::{ContrastModel, DesignLayout, DidModelSpec, PanelContrast, PanelDataset, PreparedContrast};
use crate::seeding::substream;

/// Smallest replication count accepted for resampled comparisons.
pub const MIN_REPLICATIONS: usize = 200;

/// Points in the default test-inversion grid.
pub const DEFAULT_GRID_POINTS: usize = 121;

/// Resampling scheme for [`compare_resampled`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMethod {
    ClusterBootstrap,
    Randomization,
}

/// Settings shared by the resampling comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResampleOptions {
    pub replications: usize,
    pub seed: u64,
    pub alpha: f64,
    /// Hypothesized differences for the randomization confidence interval;
    /// defaults to `kappa +/- 6 sd` of the permutation distribution.
    pub kappa_grid: Option<Vec<f64>>,
}

impl ResampleOptions {
    pub fn new(replications: usize, seed: u64, alpha: f64) -> Self {
        Self {
            replications,
            seed,
            alpha,
            kappa_grid: None,
        }
    }
}

/// Whether treatment labels were permuted across units or across clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationLevel {
    Unit,
    Cluster,
}

/// Fit operators of one model, cached by panel composition for penalized trends.
#[derive(Debug, Clone)]
struct ModelOps {
    model: ContrastModel,
    fixed: Option<PreparedContrast>,
    by_weight: BTreeMap<(usize, usize), PreparedContrast>,
}

fn weight_of(n_units: usize, n_treated: usize) -> f64 {
    (n_treated * (n_units - n_treated)) as f64 / n_units as f64
}

impl ModelOps {
    fn new(layout: &DesignLayout) -> Result<Self> {
        let model = ContrastModel::new(layout)?;
        let fixed = if model.is_penalized() {
            None
        } else {
            Some(model.prepare(1.0)?)
        };
        Ok(Self {
            model,
            fixed,
            by_weight: BTreeMap::new(),
        })
    }

    fn warm(&mut self, compositions: &BTreeSet<(usize, usize)>) -> Result<()> {
        if self.fixed.is_some() {
            return Ok(());
        }
        for &(n, n1) in compositions {
            if let std::collections::btree_map::Entry::Vacant(e) = self.by_weight.entry((n, n1)) {
                e.insert(self.model.prepare(weight_of(n, n1))?);
            }
        }
        Ok(())
    }

    fn average(&self, series: &PanelContrast) -> Result<f64> {
        if let Some(p) = &self.fixed {
            return p.average_effect(series);
        }
        match self.by_weight.get(&(series.n_units, series.n_treated)) {
            Some(p) => p.average_effect(series),
            None => self.model.prepare(series.weight)?.average_effect(series),
        }
    }

    /// True when `h` passes through every smoother unchanged.
    fn reproduces(&self, h: &[f64], weight: f64) -> Result<bool> {
        let prepared;
        let p = match &self.fixed {
            Some(p) => p,
            None => {
                prepared = self.model.prepare(weight)?;
                &prepared
            }
        };
        let mean = h.iter().sum::<f64>() / h.len() as f64;
        let hc = nalgebra::DVector::from_iterator(h.len(), h.iter().map(|v| v - mean));
        let scale = hc.norm();
        if scale == 0.0 {
            return Ok(false);
        }
        Ok(p
            .smoothers()
            .iter()
            .all(|s| (&hc - &s.hat * &hc).norm() <= 1e-8 * scale))
    }

    /// Average effect of a series that every smoother reproduces.
    fn average_of_reproduced(&self, h: &[f64], weight: f64) -> Result<f64> {
        let p = match &self.fixed {
            Some(p) => p.clone(),
            None => self.model.prepare(weight)?,
        };
        Ok(p.average_effect_with(0, h))
    }
}

/// `average(plus) - average(minus)` as a function of the contrast series.
#[derive(Debug, Clone)]
struct StatOps {
    plus: ModelOps,
    minus: Option<ModelOps>,
    n_times: usize,
}

impl StatOps {
    fn effect(data: &PanelDataset, spec: &DidModelSpec) -> Result<(Self, DesignLayout)> {
        let layout = DesignLayout::for_panel(spec, data)?;
        Ok((
            Self {
                plus: ModelOps::new(&layout)?,
                minus: None,
                n_times: layout.last_time as usize,
            },
            layout,
        ))
    }

    fn difference(
        data: &PanelDataset,
        reduced: &DidModelSpec,
        expanded: &DidModelSpec,
    ) -> Result<(Self, DesignLayout, DesignLayout)> {
        let lr = DesignLayout::for_panel(reduced, data)?;
        let le = DesignLayout::for_panel(expanded, data)?;
        if lr.effect_times != le.effect_times || lr.last_time != le.last_time {
            return validation("models estimate effects over different windows");
        }
        Ok((
            Self {
                plus: ModelOps::new(&lr)?,
                minus: Some(ModelOps::new(&le)?),
                n_times: lr.last_time as usize,
            },
            lr,
            le,
        ))
    }

    fn parts(&self, series: &PanelContrast) -> Result<(f64, Option<f64>)> {
        let a = self.plus.average(series)?;
        let b = match &self.minus {
            Some(m) => Some(m.average(series)?),
            None => None,
        };
        Ok((a, b))
    }

    fn eval(&self, series: &PanelContrast) -> Result<f64> {
        let (a, b) = self.parts(series)?;
        Ok(a - b.unwrap_or(0.0))
    }

    fn warm(&mut self, compositions: &BTreeSet<(usize, usize)>) -> Result<()> {
        self.plus.warm(compositions)?;
        if let Some(m) = &mut self.minus {
            m.warm(compositions)?;
        }
        Ok(())
    }

    /// First candidate direction reproduced by every penalized smoother and
    /// moving the statistic; returns it with the statistic's response.
    fn shift_direction(&self, candidates: Vec<Vec<f64>>, weight: f64) -> Result<Option<(Vec<f64>, f64)>> {
        for h in candidates {
            let mut ok = self.plus.fixed.is_some() || self.plus.reproduces(&h, weight)?;
            if let Some(m) = &self.minus {
                ok &= m.fixed.is_some() || m.reproduces(&h, weight)?;
            }
            if !ok {
                continue;
            }
            let mut response = self.plus.average_of_reproduced(&h, weight)?;
            if let Some(m) = &self.minus {
                response -= m.average_of_reproduced(&h, weight)?;
            }
            let scale = h.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
            if response.abs() > 1e-9 * scale {
                return Ok(Some((h, response)));
            }
        }
        Ok(None)
    }
}

/// Treatment-assignment groups: clusters when present, otherwise units.
struct Groups {
    level: PermutationLevel,
    /// Group index of each unit (storage order).
    of_unit: Vec<usize>,
    treated: Vec<bool>,
}

impl Groups {
    fn new(data: &PanelDataset, use_clusters: bool) -> Result<Self> {
        if !use_clusters {
            return Ok(Self {
                level: PermutationLevel::Unit,
                of_unit: (0..data.n_units()).collect(),
                treated: data.treated_mask(),
            });
        }
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        let mut treated = Vec::new();
        let mut of_unit = Vec::with_capacity(data.n_units());
        for u in data.units() {
            let c = u.cluster.as_deref().ok_or_else(|| {
                Error::Validation("cluster resampling needs a cluster id for every unit".into())
            })?;
            let next = index.len();
            let g = *index.entry(c).or_insert(next);
            if g == treated.len() {
                treated.push(u.treated);
            } else if treated[g] != u.treated {
                return validation(format!(
                    "treatment varies within cluster `{c}`; it must be assigned at the cluster level"
                ));
            }
            of_unit.push(g);
        }
        if treated.len() < 5 {
            log::warn!("only {} clusters; resampling inference will be coarse", treated.len());
        }
        Ok(Self {
            level: PermutationLevel::Cluster,
            of_unit,
            treated,
        })
    }

    fn unit_mask(&self, group_treated: &[bool]) -> Vec<bool> {
        self.of_unit.iter().map(|&g| group_treated[g]).collect()
    }
}

/// Fraction of relabeled-treated units that are truly treated minus the same
/// fraction among relabeled controls.
fn overlap(actual: &[bool], relabeled: &[bool]) -> f64 {
    let (mut t1, mut n1, mut t0, mut n0) = (0usize, 0usize, 0usize, 0usize);
    for (&a, &r) in actual.iter().zip(relabeled) {
        if r {
            n1 += 1;
            t1 += a as usize;
        } else {
            n0 += 1;
            t0 += a as usize;
        }
    }
    t1 as f64 / n1 as f64 - t0 as f64 / n0 as f64
}

/// Randomization distribution of an effect statistic under relabeled treatment.
///
/// Hypothesized values `k0` are tested by removing `k0` along a direction in
/// the treated group's outcomes that the fitted models reproduce exactly, then
/// recomputing every relabeled statistic on the adjusted outcomes.
#[derive(Debug, Clone)]
pub struct RandomizationInference {
    pub statistic: f64,
    pub alpha: f64,
    pub level: PermutationLevel,
    /// Average effect of the simpler model (or the single model).
    pub reduced_average: f64,
    pub expanded_average: Option<f64>,
    /// Statistic under each relabeling, before any adjustment.
    pub permuted: Vec<f64>,
    ops: StatOps,
    observed: PanelContrast,
    relabeled: Vec<(PanelContrast, f64)>,
    shift: Option<(Vec<f64>, f64)>,
}

fn centered_inner(a: &[f64], b: &[f64]) -> f64 {
    let ma = a.iter().sum::<f64>() / a.len() as f64;
    let mb = b.iter().sum::<f64>() / b.len() as f64;
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum()
}

fn adjusted(series: &PanelContrast, observed: &PanelContrast, h: &[f64], c: f64, r: f64) -> PanelContrast {
    let zh = centered_inner(h, &observed.contrast);
    let hh = centered_inner(h, h);
    let mut out = series.clone();
    for (z, hv) in out.contrast.iter_mut().zip(h) {
        *z -= c * r * hv;
    }
    out.within_ss = observed.within_ss - 2.0 * c * observed.weight * zh + c * c * observed.weight * hh;
    out
}

impl RandomizationInference {
    fn build(
        data: &PanelDataset,
        mut ops: StatOps,
        candidates: Vec<Vec<f64>>,
        replications: usize,
        seed: u64,
        alpha: f64,
        key: &str,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        let groups = Groups::new(data, data.has_clusters())?;
        let rows: Vec<&[f64]> = (0..data.n_units()).map(|i| data.unit_outcomes(i)).collect();
        let actual = data.treated_mask();
        let observed = PanelContrast::from_rows(&rows, &actual, ops.n_times)?;

        let masks: Vec<Vec<bool>> = (0..replications)
            .map(|r| {
                let mut g = groups.treated.clone();
                g.shuffle(&mut substream(seed, key, r as u64));
                groups.unit_mask(&g)
            })
            .collect();
        let mut compositions = BTreeSet::new();
        compositions.insert((observed.n_units, observed.n_treated));
        for m in &masks {
            compositions.insert((m.len(), m.iter().filter(|&&d| d).count()));
        }
        ops.warm(&compositions)?;

        let (reduced_average, expanded_average) = ops.parts(&observed)?;
        let statistic = reduced_average - expanded_average.unwrap_or(0.0);
        let relabeled: Vec<(PanelContrast, f64)> = masks
            .par_iter()
            .map(|m| {
                let series = if m.iter().filter(|&&d| d).count() == observed.n_treated {
                    observed.relabeled(&rows, m)?
                } else {
                    PanelContrast::from_rows(&rows, m, ops.n_times)?
                };
                Ok((series, overlap(&actual, m)))
            })
            .collect::<Result<_>>()?;
        let permuted: Vec<f64> = relabeled
            .par_iter()
            .map(|(s, _)| ops.eval(s))
            .collect::<Result<_>>()?;
        let sd = sample_sd(&permuted);
        if !(sd > 0.0) {
            return Err(Error::Computation(
                "randomization distribution has zero variance; too few distinct relabelings".into(),
            ));
        }
        let shift = ops.shift_direction(candidates, observed.weight)?;
        Ok(Self {
            statistic,
            alpha,
            level: groups.level,
            reduced_average,
            expanded_average,
            permuted,
            ops,
            observed,
            relabeled,
            shift,
        })
    }

    pub fn replications(&self) -> usize {
        self.permuted.len()
    }

    /// Standard deviation of the randomization distribution.
    pub fn permutation_sd(&self) -> f64 {
        sample_sd(&self.permuted)
    }

    /// Observed and relabeled statistics after removing a hypothesized value `k0`.
    fn statistics_at(&self, k0: f64) -> Result<(f64, Vec<f64>)> {
        if k0 == 0.0 {
            return Ok((self.statistic, self.permuted.clone()));
        }
        let (h, response) = self.shift.as_ref().ok_or_else(|| {
            Error::Computation(
                "no outcome shift reproduces this pair of models; only the null of no difference can be tested"
                    .into(),
            )
        })?;
        let c = k0 / response;
        let obs = self
            .ops
            .eval(&adjusted(&self.observed, &self.observed, h, c, 1.0))?;
        let perms = self
            .relabeled
            .par_iter()
            .map(|(s, r)| self.ops.eval(&adjusted(s, &self.observed, h, c, *r)))
            .collect::<Result<_>>()?;
        Ok((obs, perms))
    }

    fn p_from(&self, count: usize) -> f64 {
        (1 + count) as f64 / (1 + self.permuted.len()) as f64
    }

    /// Two-sided p-value for `H0: statistic = k0`.
    pub fn p_value_at(&self, k0: f64) -> Result<f64> {
        let (obs, perms) = self.statistics_at(k0)?;
        let tol = 1e-12 * obs.abs().max(1.0);
        Ok(self.p_from(perms.iter().filter(|p| p.abs() >= obs.abs() - tol).count()))
    }

    /// Two-sided p-value for no effect difference.
    pub fn p_value(&self) -> f64 {
        self.p_value_at(0.0).expect("the null of no difference needs no shift")
    }

    /// One-sided p-value against `H0: statistic >= k0`.
    pub fn p_upper_at(&self, k0: f64) -> Result<f64> {
        let (obs, perms) = self.statistics_at(k0)?;
        let tol = 1e-12 * obs.abs().max(1.0);
        Ok(self.p_from(perms.iter().filter(|&&p| p <= obs + tol).count()))
    }

    /// One-sided p-value against `H0: statistic <= k0`.
    pub fn p_lower_at(&self, k0: f64) -> Result<f64> {
        let (obs, perms) = self.statistics_at(k0)?;
        let tol = 1e-12 * obs.abs().max(1.0);
        Ok(self.p_from(perms.iter().filter(|&&p| p >= obs - tol).count()))
    }

    /// Non-inferiority verdict from randomization p-values at `delta` (and `-delta`).
    pub fn ni_verdict(&self, delta: f64, sided: Sided) -> Result<NiVerdict> {
        if sided == Sided::Two && delta <= 0.0 {
            return validation(format!("two-sided equivalence needs delta > 0, got {delta}"));
        }
        let upper = self.p_upper_at(delta)?;
        let lower = match sided {
            Sided::One => None,
            Sided::Two => Some(self.p_lower_at(-delta)?),
        };
        Ok(NiVerdict::from_tails(delta, sided, self.alpha, upper, lower))
    }

    /// Default inversion grid: the statistic plus 121 points over `+/- 6 sd`.
    pub fn default_grid(&self) -> Vec<f64> {
        let sd = self.permutation_sd();
        let n = DEFAULT_GRID_POINTS;
        let mut grid: Vec<f64> = (0..n)
            .map(|i| self.statistic + sd * (-6.0 + 12.0 * i as f64 / (n - 1) as f64))
            .collect();
        grid.push(self.statistic);
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        grid
    }

    /// Hypothesized values not rejected at level `alpha`, as `[min, max]`.
    ///
    /// The observed statistic is always in the set. Returns warnings when the
    /// set reaches a grid end.
    pub fn confidence_interval(&self, grid: Option<&[f64]>) -> Result<((f64, f64), Vec<String>)> {
        let mut points: Vec<f64> = match grid {
            Some(g) => g.to_vec(),
            None => self.default_grid(),
        };
        if points.iter().any(|v| !v.is_finite()) {
            return validation("inversion grid values must be finite");
        }
        points.push(self.statistic);
        points.sort_by(f64::total_cmp);
        points.dedup();
        let accepted: Vec<bool> = points
            .iter()
            .map(|&k| Ok(self.p_value_at(k)? >= self.alpha))
            .collect::<Result<_>>()?;
        let lo = accepted.iter().position(|&a| a).expect("observed value is accepted");
        let hi = accepted.iter().rposition(|&a| a).expect("observed value is accepted");
        let mut warnings = Vec::new();
        if lo == 0 || hi == points.len() - 1 {
            let msg = "randomization confidence set reaches the end of the inversion grid; widen the grid"
                .to_string();
            log::warn!("{msg}");
            warnings.push(msg);
        }
        Ok(((points[lo], points[hi]), warnings))
    }

    /// Summarizes the test as a comparison; the reported standard error is the
    /// randomization standard deviation.
    pub fn into_comparison(self, grid: Option<&[f64]>) -> Result<ComparisonResult> {
        let (ci, mut warnings) = match self.confidence_interval(grid) {
            Ok(v) => v,
            Err(Error::Computation(msg)) => {
                let z = crate::dist::norm_quantile(1.0 - self.alpha / 2.0);
                let sd = self.permutation_sd();
                (
                    (self.statistic - z * sd, self.statistic + z * sd),
                    vec![format!("{msg}; interval uses a normal approximation")],
                )
            }
            Err(e) => return Err(e),
        };
        warnings.insert(0, format!("randomization p-value for no difference: {:.4}", self.p_value()));
        Ok(ComparisonResult {
            kappa: self.statistic,
            se_kappa: self.permutation_sd(),
            method: ComparisonMethod::Randomization,
            alpha: self.alpha,
            ci,
            scale_factor_w: None,
            reduced_average: self.reduced_average,
            expanded_average: self.expanded_average.unwrap_or(0.0),
            replications: Some(self.permuted.len()),
            warnings,
        })
    }
}

fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Randomization test of the difference in average effects between two models.
pub fn randomization_inference(
    data: &PanelDataset,
    reduced: &DidModelSpec,
    expanded: &DidModelSpec,
    replications: usize,
    seed: u64,
    alpha: f64,
) -> Result<RandomizationInference> {
    if replications < MIN_REPLICATIONS {
        return validation(format!(
            "randomization inference needs at least {MIN_REPLICATIONS} replications, got {replications}"
        ));
    }
    let (ops, _, le) = StatOps::difference(data, reduced, expanded)?;
    let times: Vec<u32> = (1..=le.last_time).collect();
    let mut candidates = vec![times.iter().map(|&t| t as f64).collect::<Vec<_>>()];
    let n_eff = le.effect_times.len();
    for j in 0..le.trend.len() {
        candidates.push(times.iter().map(|&t| le.interacted_values(t)[n_eff + j]).collect());
    }
    RandomizationInference::build(data, ops, candidates, replications, seed, alpha, "randomization")
}

/// Randomization test of a single model's average effect.
///
/// Used where normal inference is unavailable, such as penalized trends.
pub fn randomization_effect_test(
    data: &PanelDataset,
    spec: &DidModelSpec,
    replications: usize,
    seed: u64,
    alpha: f64,
) -> Result<RandomizationInference> {
    if replications < 19 {
        return validation(format!(
            "randomization effect test needs at least 19 replications, got {replications}"
        ));
    }
    let (ops, layout) = StatOps::effect(data, spec)?;
    let window: Vec<f64> = (1..=layout.last_time)
        .map(|t| if layout.effect_times.contains(&t) { 1.0 } else { 0.0 })
        .collect();
    RandomizationInference::build(data, ops, vec![window], replications, seed, alpha, "randomization-effect")
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Cluster bootstrap of the difference in average effects.
///
/// Clusters (units when no clusters are given) are drawn with replacement;
/// draws without both treated and control units are redrawn. Returns the
/// replicate standard deviation and a percentile interval.
pub fn cluster_bootstrap(
    data: &PanelDataset,
    reduced: &DidModelSpec,
    expanded: &DidModelSpec,
    replications: usize,
    seed: u64,
    alpha: f64,
) -> Result<ComparisonResult> {
    check_alpha(alpha)?;
    if replications < MIN_REPLICATIONS {
        return validation(format!(
            "bootstrap needs at least {MIN_REPLICATIONS} replications, got {replications}"
        ));
    }
    let (ops, _, _) = StatOps::difference(data, reduced, expanded)?;
    let groups = Groups::new(data, data.has_clusters())?;
    let n_groups = groups.treated.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_groups];
    for (i, &g) in groups.of_unit.iter().enumerate() {
        members[g].push(i);
    }
    let rows: Vec<&[f64]> = (0..data.n_units()).map(|i| data.unit_outcomes(i)).collect();
    let actual = data.treated_mask();
    let observed = PanelContrast::from_rows(&rows, &actual, ops.n_times)?;
    let (reduced_average, expanded_average) = ops.parts(&observed)?;
    let kappa = reduced_average - expanded_average.unwrap_or(0.0);

    let replicates: Vec<f64> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, "bootstrap", r as u64);
            for _ in 0..1000 {
                let draw: Vec<usize> = (0..n_groups).map(|_| rng.random_range(0..n_groups)).collect();
                let units: Vec<usize> = draw.iter().flat_map(|&g| members[g].iter().copied()).collect();
                let n1 = units.iter().filter(|&&i| actual[i]).count();
                if n1 == 0 || n1 == units.len() {
                    continue;
                }
                let sample_rows: Vec<&[f64]> = units.iter().map(|&i| rows[i]).collect();
                let sample_treated: Vec<bool> = units.iter().map(|&i| actual[i]).collect();
                let series = PanelContrast::from_rows(&sample_rows, &sample_treated, ops.n_times)?;
                return ops.eval(&series);
            }
            Err(Error::Computation(
                "bootstrap draws repeatedly lacked a treated or control unit".into(),
            ))
        })
        .collect::<Result<_>>()?;
    let se = sample_sd(&replicates);
    let mut sorted = replicates.clone();
    sorted.sort_by(f64::total_cmp);
    let mut ci = (
        quantile_sorted(&sorted, alpha / 2.0),
        quantile_sorted(&sorted, 1.0 - alpha / 2.0),
    );
    let mut warnings = Vec::new();
    if n_groups < 5 {
        warnings.push(format!("only {n_groups} resampling groups"));
    }
    if !(ci.0 <= kappa && kappa <= ci.1) {
        let msg = format!(
            "percentile interval [{:.4}, {:.4}] excludes the estimate {kappa:.4}; interval extended to include it",
            ci.0, ci.1
        );
        log::warn!("{msg}");
        warnings.push(msg);
        ci = (ci.0.min(kappa), ci.1.max(kappa));
    }
    Ok(ComparisonResult {
        kappa,
        se_kappa: se,
        method: ComparisonMethod::ClusterBootstrap,
        alpha,
        ci,
        scale_factor_w: None,
        reduced_average,
        expanded_average: expanded_average.unwrap_or(0.0),
        replications: Some(replications),
        warnings,
    })
}

/// Resampling-based comparison of two models fitted to the same panel.
pub fn compare_resampled(
    data: &PanelDataset,
    reduced: &DidModelSpec,
    expanded: &DidModelSpec,
    method: ResampleMethod,
    options: &ResampleOptions,
) -> Result<ComparisonResult> {
    match method {
        ResampleMethod::ClusterBootstrap => {
            if !data.has_clusters() {
                return validation("cluster bootstrap needs cluster ids");
            }
            cluster_bootstrap(data, reduced, expanded, options.replications, options.seed, options.alpha)
        }
        ResampleMethod::Randomization => randomization_inference(
            data,
            reduced,
            expanded,
            options.replications,
            options.seed,
            options.alpha,
        )?
        .into_comparison(options.kappa_grid.as_deref()),
    }
}
