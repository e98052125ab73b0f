//! Result containers and CSV/JSON emission.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibration::NullCalibrationReport;
use crate::error::{Error, Result};
use crate::error_curve::ErrorCurveReport;
use crate::stability::StabilityReport;
use crate::table1::ErrorRateTable;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub(crate) fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

/// Flat view used for CSV: `experiment, keys..., rate, stderr, reps, seed, extras...`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub experiment: String,
    pub keys: Vec<String>,
    pub extras: Vec<String>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub keys: Vec<String>,
    pub rate: f64,
    pub stderr: f64,
    pub reps: usize,
    pub seed: u64,
    pub extras: Vec<f64>,
}

impl Table {
    pub(crate) fn new(experiment: &str, keys: &[&str], extras: &[&str]) -> Self {
        Self {
            experiment: experiment.into(),
            keys: keys.iter().map(|s| s.to_string()).collect(),
            extras: extras.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["experiment".to_string()];
        h.extend(self.keys.iter().cloned());
        h.extend(["rate", "stderr", "reps", "seed"].map(String::from));
        h.extend(self.extras.iter().cloned());
        h
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(self.header())?;
        for row in &self.rows {
            let mut rec = vec![self.experiment.clone()];
            rec.extend(row.keys.iter().cloned());
            rec.push(row.rate.to_string());
            rec.push(row.stderr.to_string());
            rec.push(row.reps.to_string());
            rec.push(row.seed.to_string());
            rec.extend(row.extras.iter().map(|v| v.to_string()));
            out.write_record(rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentOutput {
    Table1(ErrorRateTable),
    SignalStability(StabilityReport),
    ErrorCurve(ErrorCurveReport),
    NullCalibration(NullCalibrationReport),
}

impl ExperimentOutput {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentOutput::Table1(_) => "table1",
            ExperimentOutput::SignalStability(_) => "signal_stability",
            ExperimentOutput::ErrorCurve(_) => "error_curve",
            ExperimentOutput::NullCalibration(_) => "null_calibration",
        }
    }

    pub fn table(&self) -> Table {
        match self {
            ExperimentOutput::Table1(r) => r.table(),
            ExperimentOutput::SignalStability(r) => r.table(),
            ExperimentOutput::ErrorCurve(r) => r.table(),
            ExperimentOutput::NullCalibration(r) => r.table(),
        }
    }

    pub fn verdicts(&self) -> &[Verdict] {
        match self {
            ExperimentOutput::Table1(r) => &r.verdicts,
            ExperimentOutput::SignalStability(r) => &r.verdicts,
            ExperimentOutput::ErrorCurve(r) => &r.verdicts,
            ExperimentOutput::NullCalibration(r) => &r.verdicts,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdicts().iter().all(|v| v.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown format '{other}', expected csv or json"))),
        }
    }
}

/// Writes `output` to `path` in the requested format, UTF-8 with a trailing newline.
pub fn emit(output: &ExperimentOutput, format: Format, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match format {
        Format::Csv => output.table().write_csv(&mut w)?,
        Format::Json => w.write_all(output.to_json()?.as_bytes())?,
    }
    w.flush()?;
    Ok(())
}
