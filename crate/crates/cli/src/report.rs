use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

/// Version of the JSON and CSV report layouts.
pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_COMPUTATION: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Invalid input or arguments detected by the command-line layer.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Maps an error chain to the process exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<UsageError>() || cause.is::<toml::de::Error>() || cause.is::<serde_json::Error>() {
            return EXIT_VALIDATION;
        }
        if let Some(e) = cause.downcast_ref::<nidid::Error>() {
            return match e {
                nidid::Error::Io { .. } => EXIT_IO,
                e if e.is_validation() => EXIT_VALIDATION,
                _ => EXIT_COMPUTATION,
            };
        }
        if let Some(e) = cause.downcast_ref::<csv::Error>() {
            return if e.is_io_error() { EXIT_IO } else { EXIT_VALIDATION };
        }
        if cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
    }
    EXIT_COMPUTATION
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct OutputArgs {
    /// Write a machine-readable report to this path (written atomically)
    #[arg(long)]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    /// Report format; inferred from the --out extension when omitted, else json
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl OutputArgs {
    pub fn format(&self) -> Format {
        self.format.unwrap_or_else(|| match &self.out {
            Some(p) if p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) => Format::Csv,
            _ => Format::Json,
        })
    }
}

/// Common wrapper of every JSON report.
#[derive(Debug, Serialize)]
pub struct Envelope<'a, C: Serialize, R: Serialize> {
    pub schema_version: u32,
    pub command: &'a str,
    pub library_version: &'a str,
    pub seed: Option<u64>,
    pub config: &'a C,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_mapping: Option<Vec<TimeMapping>>,
    pub result: &'a R,
}

/// Time index used in the model and the label it came from.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TimeMapping {
    pub index: u32,
    pub label: i64,
}

pub fn time_mapping(labels: &[i64]) -> Vec<TimeMapping> {
    labels
        .iter()
        .enumerate()
        .map(|(i, &label)| TimeMapping {
            index: i as u32 + 1,
            label,
        })
        .collect()
}

pub fn json_bytes<C: Serialize, R: Serialize>(envelope: &Envelope<'_, C, R>) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(envelope).context("cannot encode report")?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn csv_bytes<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).context("cannot encode CSV row")?;
    }
    writer.into_inner().context("cannot finish CSV output")
}

/// Writes through a temporary file in the target directory, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create a temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)
        .and_then(|_| tmp.as_file().sync_all())
        .with_context(|| format!("cannot write {}", path.display()))?;
    tmp.persist(path)
        .map_err(|e| e.error)
        .with_context(|| format!("cannot move report into {}", path.display()))?;
    Ok(())
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_kind() {
        let v: anyhow::Error = nidid::Error::Validation("x".into()).into();
        assert_eq!(exit_code(&v), EXIT_VALIDATION);
        let c: anyhow::Error = nidid::Error::Computation("x".into()).into();
        assert_eq!(exit_code(&c), EXIT_COMPUTATION);
        let io: anyhow::Error = std::io::Error::other("x").into();
        assert_eq!(exit_code(&io.context("writing")), EXIT_IO);
        let u: anyhow::Error = UsageError("x".into()).into();
        assert_eq!(exit_code(&u), EXIT_VALIDATION);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
