//! JSON reports.

use crate::montecarlo::{CalibrationResult, ConsistencyReport, PowerCurve, TailRateReport};
use serde::{Deserialize, Serialize};
use std::io;

/// Writes every `f64` with 17 significant digits, so values round-trip
/// exactly and identical runs give identical bytes.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactFloats;

impl serde_json::ser::Formatter for ExactFloats {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, ExactFloats);
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Reject,
    Accept,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub k: usize,
    pub statistic: f64,
    pub penalty: f64,
    pub penalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub kind: String,
    pub n: usize,
    pub selected: usize,
    pub statistic: f64,
    pub p_value: f64,
    pub critical_value: f64,
    pub alpha: f64,
    pub decision: Decision,
    pub penalty: String,
    /// `d(n)`, the length of `series`.
    pub dimension: usize,
    pub seed: u64,
    pub replications: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_hat: Option<Vec<f64>>,
    pub warnings: Vec<String>,
    pub series: Vec<SeriesRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub kind: String,
    pub penalty: String,
    #[serde(flatten)]
    pub calibration: CalibrationResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub kind: String,
    pub penalty: String,
    pub alternative: String,
    #[serde(flatten)]
    pub curve: PowerCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyProbeReport {
    pub kind: String,
    pub penalty: String,
    pub alternative: String,
    #[serde(flatten)]
    pub report: ConsistencyReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailProbeReport {
    pub sampler: String,
    #[serde(flatten)]
    pub report: TailRateReport,
}
