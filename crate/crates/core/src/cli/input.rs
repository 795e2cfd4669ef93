//! CSV and TOML inputs.

use super::CliError;
use crate::catalog::{CompositeModel, Dataset, Family, NoiseDensity, NullDensity, TestKind};
use crate::selection::PenaltyTable;
use serde::Deserialize;
use std::path::Path;

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>, CliError> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize, CliError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| CliError::Input(format!("{}: missing column `{name}`", path.display())))
}

fn parse_field(
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
    path: &Path,
) -> Result<f64, CliError> {
    let line = record.position().map_or(0, |p| p.line());
    let raw = record.get(idx).ok_or_else(|| {
        CliError::Input(format!("{}:{line}: missing field `{name}`", path.display()))
    })?;
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(CliError::Input(format!(
            "{}:{line}: `{raw}` is not a finite number in column `{name}`",
            path.display()
        ))),
    }
}

fn records(path: &Path, names: &[&str]) -> Result<Vec<Vec<f64>>, CliError> {
    let mut reader = open(path)?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        .clone();
    if headers.is_empty() || headers.iter().all(str::is_empty) {
        return Err(CliError::Input(format!(
            "{}: empty file, header row required",
            path.display()
        )));
    }
    let idx: Vec<usize> = names
        .iter()
        .map(|n| column(&headers, n, path))
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Input(format!("{}:{line}: {e}", path.display()))
        })?;
        let row = idx
            .iter()
            .zip(names)
            .map(|(&i, n)| parse_field(&record, i, n, path))
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Input(format!("{}: no data rows", path.display())));
    }
    Ok(rows)
}

/// Column `x`, or columns `x,y` for the independence test.
pub fn read_dataset(path: &Path, kind: TestKind) -> Result<Dataset, CliError> {
    match kind {
        TestKind::IndependenceRank => {
            let rows = records(path, &["x", "y"])?;
            Ok(Dataset::Pairs(
                rows.into_iter().map(|r| (r[0], r[1])).collect(),
            ))
        }
        _ => {
            let rows = records(path, &["x"])?;
            Ok(Dataset::Univariate(
                rows.into_iter().map(|r| r[0]).collect(),
            ))
        }
    }
}

/// Penalty table with columns `k,n,pi`.
pub fn read_penalty_table(path: &Path) -> Result<PenaltyTable, CliError> {
    let rows = records(path, &["k", "n", "pi"])?;
    let mut table = PenaltyTable::new();
    for r in rows {
        if r[0] < 1.0 || r[0].fract() != 0.0 || r[1] < 1.0 || r[1].fract() != 0.0 {
            return Err(CliError::Input(format!(
                "{}: k and n must be positive integers, got k = {}, n = {}",
                path.display(),
                r[0],
                r[1]
            )));
        }
        table.insert(r[0] as usize, r[1] as u64, r[2]);
    }
    Ok(table)
}

/// Deconvolution section of the config file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeconvolutionConfig {
    #[serde(default)]
    pub null: NullDensity,
    #[serde(default)]
    pub noise: NoiseDensity,
    pub moment_draws: Option<usize>,
    pub moment_seed: Option<u64>,
}

/// Optional TOML file with model parameters.
///
/// ```toml
/// [deconvolution]
/// null = { kind = "uniform", lower = 0.0, upper = 1.0 }
/// noise = { kind = "gaussian", sd = 0.25 }
///
/// [composite]
/// family = { kind = "normal_location_scale" }
/// r_form = "inverse"
/// ```
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub deconvolution: Option<DeconvolutionConfig>,
    pub composite: Option<CompositeModel>,
}

impl ModelConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }

    pub fn composite_model(&self) -> Result<CompositeModel, CliError> {
        let model = self.composite.clone().unwrap_or_else(|| {
            CompositeModel::new(Family::NormalLocationScale).expect("valid family")
        });
        model
            .family
            .validate()
            .map_err(|e| CliError::Input(e.to_string()))?;
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_columns_in_any_order() {
        let f = file("y,x\n1,2\n3,4\n");
        let d = read_dataset(f.path(), TestKind::IndependenceRank).unwrap();
        assert_eq!(d, Dataset::Pairs(vec![(2.0, 1.0), (4.0, 3.0)]));
    }

    #[test]
    fn malformed_value_reports_line() {
        let f = file("x\n0.1\nabc\n");
        let err = read_dataset(f.path(), TestKind::Uniformity).unwrap_err();
        assert!(err.to_string().contains(":3:"), "{err}");
    }

    #[test]
    fn empty_inputs() {
        assert!(read_dataset(file("").path(), TestKind::Uniformity).is_err());
        assert!(read_dataset(file("x\n").path(), TestKind::Uniformity).is_err());
        assert!(read_dataset(file("z\n1\n").path(), TestKind::Uniformity).is_err());
    }

    #[test]
    fn penalty_table_and_config() {
        let t = read_penalty_table(file("k,n,pi\n1,10,1.5\n2,10,4\n").path()).unwrap();
        assert_eq!(t.get(2, 50), Some(4.0));
        assert!(read_penalty_table(file("k,n,pi\n0,10,1\n").path()).is_err());
        let c: ModelConfig = toml::from_str(
            "[deconvolution]\nnull = { kind = \"normal\", mean = 0.0, sd = 1.0 }\nnoise = { kind = \"gaussian\", sd = 0.5 }\n\n[composite]\nfamily = { kind = \"exponential\" }\n",
        )
        .unwrap();
        assert_eq!(
            c.deconvolution.unwrap().noise,
            NoiseDensity::Gaussian { sd: 0.5 }
        );
        assert_eq!(c.composite.unwrap().family, Family::Exponential);
    }
}
