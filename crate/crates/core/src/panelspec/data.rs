use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};

/// One raw `(unit, time)` observation before validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRecord {
    pub unit: String,
    /// Time label on the caller's scale (for example a calendar year).
    pub time: i64,
    pub treated: bool,
    pub outcome: f64,
    pub cluster: Option<String>,
    pub subgroup: Option<bool>,
    /// 1-based data row in the source file, used in diagnostics.
    pub source_row: Option<usize>,
}

/// Unit-level attributes; constant over time by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub id: String,
    pub treated: bool,
    pub cluster: Option<String>,
    pub subgroup: Option<bool>,
}

/// Orders unit ids numerically when both parse as integers, lexically otherwise.
pub fn compare_unit_ids(a: &str, b: &str) -> Ordering {
    match (a.parse::<i64>(), b.parse::<i64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

/// Validated balanced panel: one outcome per unit and time index `1..=t_max`.
///
/// Units are stored in natural id order; outcomes are unit-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelDataset {
    units: Vec<Unit>,
    time_labels: Vec<i64>,
    outcomes: Vec<f64>,
    t0: u32,
}

fn row_ref(record: &PanelRecord, idx: usize) -> String {
    format!("row {}", record.source_row.unwrap_or(idx + 1))
}

impl PanelDataset {
    /// Validates records and maps their time labels onto `1..=T` in sorted order.
    ///
    /// `t0_label` is the first intervention period on the caller's time scale.
    pub fn from_records(records: &[PanelRecord], t0_label: i64) -> Result<Self> {
        if records.is_empty() {
            return validation("panel has no records");
        }
        let labels: BTreeSet<i64> = records.iter().map(|r| r.time).collect();
        let time_labels: Vec<i64> = labels.into_iter().collect();
        let index_of: HashMap<i64, usize> = time_labels
            .iter()
            .enumerate()
            .map(|(i, &l)| (l, i))
            .collect();
        let t0 = match index_of.get(&t0_label) {
            Some(&i) => i as u32 + 1,
            None => {
                return validation(format!(
                    "intervention start {t0_label} is not an observed time (observed {}..{})",
                    time_labels[0],
                    time_labels[time_labels.len() - 1]
                ))
            }
        };

        let mut units: BTreeMap<&str, (Unit, usize)> = BTreeMap::new();
        let mut cells: HashMap<(&str, usize), usize> = HashMap::new();
        let has_cluster = records[0].cluster.is_some();
        let has_subgroup = records[0].subgroup.is_some();
        for (idx, rec) in records.iter().enumerate() {
            if !rec.outcome.is_finite() {
                return validation(format!("{}: outcome is not a finite number", row_ref(rec, idx)));
            }
            if rec.cluster.is_some() != has_cluster {
                return validation(format!("{}: cluster id missing or unexpected", row_ref(rec, idx)));
            }
            if rec.subgroup.is_some() != has_subgroup {
                return validation(format!("{}: subgroup flag missing or unexpected", row_ref(rec, idx)));
            }
            let t = index_of[&rec.time];
            if let Some(&first) = cells.get(&(rec.unit.as_str(), t)) {
                return validation(format!(
                    "{}: duplicate observation for unit `{}` at time {} (first seen at {})",
                    row_ref(rec, idx),
                    rec.unit,
                    rec.time,
                    row_ref(&records[first], first)
                ));
            }
            cells.insert((rec.unit.as_str(), t), idx);
            match units.get(rec.unit.as_str()) {
                None => {
                    units.insert(
                        rec.unit.as_str(),
                        (
                            Unit {
                                id: rec.unit.clone(),
                                treated: rec.treated,
                                cluster: rec.cluster.clone(),
                                subgroup: rec.subgroup,
                            },
                            idx,
                        ),
                    );
                }
                Some((unit, first)) => {
                    let what = if unit.treated != rec.treated {
                        Some("treated status")
                    } else if unit.cluster != rec.cluster {
                        Some("cluster id")
                    } else if unit.subgroup != rec.subgroup {
                        Some("subgroup flag")
                    } else {
                        None
                    };
                    if let Some(what) = what {
                        return validation(format!(
                            "{}: {what} of unit `{}` differs from {}; it must be constant within a unit",
                            row_ref(rec, idx),
                            rec.unit,
                            row_ref(&records[*first], *first)
                        ));
                    }
                }
            }
        }

        let t_max = time_labels.len();
        let mut ordered: Vec<Unit> = units.into_values().map(|(u, _)| u).collect();
        ordered.sort_by(|a, b| compare_unit_ids(&a.id, &b.id));
        let mut missing = Vec::new();
        let mut outcomes = vec![0.0; ordered.len() * t_max];
        for (i, unit) in ordered.iter().enumerate() {
            for t in 0..t_max {
                match cells.get(&(unit.id.as_str(), t)) {
                    Some(&idx) => outcomes[i * t_max + t] = records[idx].outcome,
                    None => missing.push(format!("({}, {})", unit.id, time_labels[t])),
                }
            }
        }
        if !missing.is_empty() {
            let shown: Vec<&str> = missing.iter().take(20).map(String::as_str).collect();
            let more = if missing.len() > 20 {
                format!(" and {} more", missing.len() - 20)
            } else {
                String::new()
            };
            return validation(format!(
                "unbalanced panel: {} missing (unit, time) cells: {}{more}",
                missing.len(),
                shown.join(", ")
            ));
        }
        Self::assemble(ordered, time_labels, outcomes, t0)
    }

    /// Builds a panel from unit attributes and a unit-major outcome matrix on times `1..=t_max`.
    pub fn from_units(units: Vec<Unit>, outcomes: Vec<f64>, t_max: u32, t0: u32) -> Result<Self> {
        let t = t_max as usize;
        if outcomes.len() != units.len() * t {
            return Err(Error::Dimension(format!(
                "{} outcomes for {} units x {t} periods",
                outcomes.len(),
                units.len()
            )));
        }
        if let Some(i) = outcomes.iter().position(|v| !v.is_finite()) {
            return validation(format!("outcome for unit `{}` is not finite", units[i / t.max(1)].id));
        }
        let mut order: Vec<usize> = (0..units.len()).collect();
        order.sort_by(|&a, &b| compare_unit_ids(&units[a].id, &units[b].id));
        let mut sorted_outcomes = Vec::with_capacity(outcomes.len());
        for &i in &order {
            sorted_outcomes.extend_from_slice(&outcomes[i * t..(i + 1) * t]);
        }
        let sorted: Vec<Unit> = order.into_iter().map(|i| units[i].clone()).collect();
        for w in sorted.windows(2) {
            if w[0].id == w[1].id {
                return validation(format!("duplicate unit id `{}`", w[0].id));
            }
        }
        Self::assemble(sorted, (1..=t_max as i64).collect(), sorted_outcomes, t0)
    }

    fn assemble(units: Vec<Unit>, time_labels: Vec<i64>, outcomes: Vec<f64>, t0: u32) -> Result<Self> {
        let t_max = time_labels.len() as u32;
        if !(2..=t_max).contains(&t0) {
            return validation(format!(
                "intervention start index {t0} must satisfy 2 <= t0 <= {t_max}"
            ));
        }
        let treated = units.iter().filter(|u| u.treated).count();
        if treated == 0 || treated == units.len() {
            return validation("panel needs at least one treated and one untreated unit");
        }
        let clustered = units[0].cluster.is_some();
        let flagged = units[0].subgroup.is_some();
        if units
            .iter()
            .any(|u| u.cluster.is_some() != clustered || u.subgroup.is_some() != flagged)
        {
            return validation("cluster ids and subgroup flags must be given for all units or none");
        }
        Ok(Self {
            units,
            time_labels,
            outcomes,
            t0,
        })
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn n_units(&self) -> usize {
        self.units.len()
    }

    pub fn n_treated(&self) -> usize {
        self.units.iter().filter(|u| u.treated).count()
    }

    pub fn t_max(&self) -> u32 {
        self.time_labels.len() as u32
    }

    pub fn t0(&self) -> u32 {
        self.t0
    }

    /// Original time label of index `t` (1-based).
    pub fn time_label(&self, t: u32) -> i64 {
        self.time_labels[t as usize - 1]
    }

    pub fn time_labels(&self) -> &[i64] {
        &self.time_labels
    }

    pub fn has_clusters(&self) -> bool {
        self.units[0].cluster.is_some()
    }

    pub fn has_subgroup(&self) -> bool {
        self.units[0].subgroup.is_some()
    }

    /// Outcome of unit `i` (0-based, storage order) at time index `t` (1-based).
    pub fn outcome(&self, i: usize, t: u32) -> f64 {
        self.outcomes[i * self.time_labels.len() + t as usize - 1]
    }

    /// Outcome series of unit `i` over all times.
    pub fn unit_outcomes(&self, i: usize) -> &[f64] {
        let t = self.time_labels.len();
        &self.outcomes[i * t..(i + 1) * t]
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn treated_mask(&self) -> Vec<bool> {
        self.units.iter().map(|u| u.treated).collect()
    }

    /// Same units and times with replaced unit-major outcomes.
    pub fn with_outcomes(&self, outcomes: Vec<f64>) -> Result<Self> {
        if outcomes.len() != self.outcomes.len() {
            return Err(Error::Dimension(format!(
                "{} outcomes for a panel of {}",
                outcomes.len(),
                self.outcomes.len()
            )));
        }
        let mut out = self.clone();
        out.outcomes = outcomes;
        Ok(out)
    }

    /// Same panel with treatment reassigned unit by unit (storage order).
    pub fn with_treatment(&self, treated: &[bool]) -> Result<Self> {
        if treated.len() != self.units.len() {
            return Err(Error::Dimension(format!(
                "{} treatment flags for {} units",
                treated.len(),
                self.units.len()
            )));
        }
        let mut units = self.units.clone();
        for (u, &d) in units.iter_mut().zip(treated) {
            u.treated = d;
        }
        Self::assemble(units, self.time_labels.clone(), self.outcomes.clone(), self.t0)
    }

    /// Renames units; storage order is re-sorted under the new ids.
    pub fn relabel_units(&self, rename: impl Fn(&str) -> String) -> Result<Self> {
        let units = self
            .units
            .iter()
            .map(|u| Unit {
                id: rename(&u.id),
                ..u.clone()
            })
            .collect();
        let mut relabeled =
            Self::from_units(units, self.outcomes.clone(), self.t_max(), self.t0)?;
        relabeled.time_labels = self.time_labels.clone();
        Ok(relabeled)
    }

    /// Flattens back to records, unit-major.
    pub fn to_records(&self) -> Vec<PanelRecord> {
        let mut out = Vec::with_capacity(self.outcomes.len());
        for (i, u) in self.units.iter().enumerate() {
            for t in 1..=self.t_max() {
                out.push(PanelRecord {
                    unit: u.id.clone(),
                    time: self.time_label(t),
                    treated: u.treated,
                    outcome: self.outcome(i, t),
                    cluster: u.cluster.clone(),
                    subgroup: u.subgroup,
                    source_row: None,
                });
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(unit: &str, time: i64, treated: bool, y: f64) -> PanelRecord {
        PanelRecord {
            unit: unit.into(),
            time,
            treated,
            outcome: y,
            cluster: None,
            subgroup: None,
            source_row: None,
        }
    }

    fn two_by_four() -> Vec<PanelRecord> {
        let mut v = Vec::new();
        for t in 1..=4 {
            v.push(rec("a", t, true, t as f64));
            v.push(rec("b", t, false, 0.5 * t as f64));
        }
        v
    }

    #[test]
    fn happy_path() {
        let p = PanelDataset::from_records(&two_by_four(), 3).unwrap();
        assert_eq!(p.t_max(), 4);
        assert_eq!(p.t0(), 3);
        assert_eq!(p.n_units(), 2);
        assert_eq!(p.outcome(0, 4), 4.0);
        assert_eq!(p.outcome(1, 2), 1.0);
    }

    #[test]
    fn calendar_times_are_reindexed() {
        let mut v = Vec::new();
        for year in 2005..=2011 {
            v.push(rec("x", year, true, 1.0));
            v.push(rec("y", year, false, 2.0));
        }
        let p = PanelDataset::from_records(&v, 2009).unwrap();
        assert_eq!(p.t_max(), 7);
        assert_eq!(p.t0(), 5);
        assert_eq!(p.time_label(1), 2005);
        assert_eq!(p.time_label(7), 2011);
    }

    #[test]
    fn duplicate_cell_names_row() {
        let mut v = two_by_four();
        let mut dup = v[2].clone();
        dup.source_row = Some(42);
        v.push(dup);
        let err = PanelDataset::from_records(&v, 3).unwrap_err().to_string();
        assert!(err.contains("row 42"), "{err}");
        assert!(err.contains("duplicate"), "{err}");
    }

    #[test]
    fn unbalanced_panel_lists_missing_cells() {
        let mut v = two_by_four();
        v.retain(|r| !(r.unit == "b" && r.time == 2));
        let err = PanelDataset::from_records(&v, 3).unwrap_err().to_string();
        assert!(err.contains("(b, 2)"), "{err}");
    }

    #[test]
    fn treated_status_must_be_constant() {
        let mut v = two_by_four();
        v[4].treated = false;
        let err = PanelDataset::from_records(&v, 3).unwrap_err().to_string();
        assert!(err.contains("treated status"), "{err}");
    }

    #[test]
    fn intervention_bounds() {
        assert!(PanelDataset::from_records(&two_by_four(), 1).is_err());
        assert!(PanelDataset::from_records(&two_by_four(), 9).is_err());
        assert!(PanelDataset::from_records(&two_by_four(), 4).is_ok());
    }

    #[test]
    fn needs_both_arms() {
        let v: Vec<_> = two_by_four().into_iter().filter(|r| r.treated).collect();
        assert!(PanelDataset::from_records(&v, 3).is_err());
    }

    #[test]
    fn natural_unit_order() {
        let ids = ["10", "2", "b", "1", "a"];
        let mut sorted = ids.to_vec();
        sorted.sort_by(|a, b| compare_unit_ids(a, b));
        assert_eq!(sorted, vec!["1", "2", "10", "a", "b"]);
    }
}
