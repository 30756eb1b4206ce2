use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::Args;
use nidid::panelspec::{PanelDataset, PanelRecord};
use serde::Serialize;

use crate::report::UsageError;

/// Which input columns hold each panel field.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ColumnMap {
    /// Unit (group) identifier column
    #[arg(long = "map-unit", default_value = "unit")]
    pub unit: String,
    /// Integer time column, e.g. calendar year
    #[arg(long = "map-time", default_value = "time")]
    pub time: String,
    #[arg(long = "map-outcome", default_value = "outcome")]
    pub outcome: String,
    /// Treatment indicator column (0/1, true/false, yes/no)
    #[arg(long = "map-treated", default_value = "treated")]
    pub treated: String,
    #[arg(long = "map-cluster")]
    pub cluster: Option<String>,
    /// Subgroup indicator column, same encoding as the treatment column
    #[arg(long = "map-subgroup")]
    pub subgroup: Option<String>,
}

fn parse_flag(raw: &str) -> Option<bool> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "1" | "1.0" | "true" | "t" | "yes" | "y" => Some(true),
        "0" | "0.0" | "false" | "f" | "no" | "n" => Some(false),
        _ => None,
    }
}

fn column(headers: &csv::StringRecord, name: &str, role: &str) -> Result<usize> {
    match headers.iter().position(|h| h.trim() == name) {
        Some(i) => Ok(i),
        None => {
            let available: Vec<&str> = headers.iter().collect();
            Err(UsageError(format!(
                "{role} column `{name}` not found; available columns: {}",
                available.join(", ")
            ))
            .into())
        }
    }
}

/// Reads raw records; row numbers in diagnostics are file line numbers.
pub fn read_records(path: &Path, map: &ColumnMap) -> Result<Vec<PanelRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let headers = reader
        .headers()
        .with_context(|| format!("cannot read header row of {}", path.display()))?
        .clone();
    let unit = column(&headers, &map.unit, "unit")?;
    let time = column(&headers, &map.time, "time")?;
    let outcome = column(&headers, &map.outcome, "outcome")?;
    let treated = column(&headers, &map.treated, "treated")?;
    let cluster = map.cluster.as_deref().map(|c| column(&headers, c, "cluster")).transpose()?;
    let subgroup = map.subgroup.as_deref().map(|c| column(&headers, c, "subgroup")).transpose()?;

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| UsageError(format!("row {line}: malformed CSV record: {e}")))?;
        let get = |j: usize| row.get(j).unwrap_or("");
        let unit_id = get(unit);
        if unit_id.is_empty() {
            bail!(UsageError(format!("row {line}: empty unit id")));
        }
        let time_value: i64 = get(time).parse().map_err(|_| {
            UsageError(format!(
                "row {line}: time `{}` in column `{}` is not an integer",
                get(time),
                map.time
            ))
        })?;
        let y: f64 = get(outcome).parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
            UsageError(format!(
                "row {line}: outcome `{}` in column `{}` is not a finite number (use a decimal point and no thousands separators)",
                get(outcome),
                map.outcome
            ))
        })?;
        let d = parse_flag(get(treated)).ok_or_else(|| {
            UsageError(format!(
                "row {line}: treatment value `{}` in column `{}` is not 0/1",
                get(treated),
                map.treated
            ))
        })?;
        let w = match subgroup {
            Some(j) => Some(parse_flag(get(j)).ok_or_else(|| {
                UsageError(format!("row {line}: subgroup value `{}` is not 0/1", get(j)))
            })?),
            None => None,
        };
        records.push(PanelRecord {
            unit: unit_id.to_string(),
            time: time_value,
            treated: d,
            outcome: y,
            cluster: cluster.map(|j| get(j).to_string()),
            subgroup: w,
            source_row: Some(line),
        });
    }
    Ok(records)
}

/// Reads and validates a balanced panel; `t0` is on the file's time scale.
pub fn ingest_csv(path: &Path, map: &ColumnMap, t0: i64) -> Result<PanelDataset> {
    let records = read_records(path, map)?;
    Ok(PanelDataset::from_records(&records, t0)?)
}
