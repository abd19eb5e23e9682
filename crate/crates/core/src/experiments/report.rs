//! CSV and JSON report writers.
//!
//! CSV columns (schema version 1):
//! `experiment,arm,T,lambda,mean,std,reps,status,group,metric`.
//! `T` and `lambda` are empty for arms that do not depend on them. Floats are
//! written in shortest round-trip form, so reading the file back reproduces
//! every aggregate exactly. Per-repetition values only appear in JSON.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Arm, Cell, CellStatus, ExperimentError, ExperimentReport, Metric};

pub const CSV_HEADER: [&str; 10] = [
    "experiment", "arm", "T", "lambda", "mean", "std", "reps", "status", "group", "metric",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format {other:?} (expected csv or json)")),
        }
    }
}

/// One CSV line.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub experiment: String,
    pub arm: Arm,
    pub temperature: Option<f64>,
    pub lambda: Option<f64>,
    pub mean: f64,
    pub std: f64,
    pub reps: usize,
    pub status: CellStatus,
    pub group: String,
    pub metric: Metric,
}

impl CsvRow {
    pub fn from_cell(experiment: &str, c: &Cell) -> Self {
        CsvRow {
            experiment: experiment.to_string(),
            arm: c.arm,
            temperature: c.temperature,
            lambda: c.lambda,
            mean: c.mean,
            std: c.std,
            reps: c.reps,
            status: c.status,
            group: c.group.clone(),
            metric: c.metric,
        }
    }

    /// Bitwise comparison, so NaN aggregates of empty cells compare equal.
    pub fn same_as(&self, other: &CsvRow) -> bool {
        let opt = |a: Option<f64>, b: Option<f64>| a.map(f64::to_bits) == b.map(f64::to_bits);
        self.experiment == other.experiment
            && self.arm == other.arm
            && opt(self.temperature, other.temperature)
            && opt(self.lambda, other.lambda)
            && self.mean.to_bits() == other.mean.to_bits()
            && self.std.to_bits() == other.std.to_bits()
            && self.reps == other.reps
            && self.status == other.status
            && self.group == other.group
            && self.metric == other.metric
    }
}

fn opt_float(v: Option<f64>) -> String {
    v.map(|v| format!("{v:?}")).unwrap_or_default()
}

fn status_str(s: CellStatus) -> &'static str {
    match s {
        CellStatus::Complete => "complete",
        CellStatus::Incomplete => "incomplete",
    }
}

fn metric_str(m: Metric) -> &'static str {
    match m {
        Metric::Accuracy => "accuracy",
        Metric::Mse => "mse",
    }
}

pub fn write_csv<W: Write>(report: &ExperimentReport, out: W) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for c in &report.cells {
        let rec = [
            report.experiment.clone(),
            c.arm.as_str().to_string(),
            opt_float(c.temperature),
            opt_float(c.lambda),
            format!("{:?}", c.mean),
            format!("{:?}", c.std),
            c.reps.to_string(),
            status_str(c.status).to_string(),
            c.group.clone(),
            metric_str(c.metric).to_string(),
        ];
        w.write_record(&rec)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn report_to_csv(report: &ExperimentReport) -> String {
    let mut buf = Vec::new();
    write_csv(report, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("csv output is utf-8")
}

fn bad(row: usize, message: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(format!("report csv row {row}: {}", message.into()))
}

fn parse_float(row: usize, s: &str) -> Result<f64, ExperimentError> {
    s.parse().map_err(|_| bad(row, format!("bad number {s:?}")))
}

fn parse_opt(row: usize, s: &str) -> Result<Option<f64>, ExperimentError> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_float(row, s).map(Some)
    }
}

/// Parses a CSV report written by [`write_csv`].
pub fn read_csv_rows<R: Read>(input: R) -> Result<Vec<CsvRow>, ExperimentError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(bad(0, format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        rows.push(CsvRow {
            experiment: rec[0].to_string(),
            arm: Arm::parse(&rec[1]).ok_or_else(|| bad(row, format!("unknown arm {:?}", &rec[1])))?,
            temperature: parse_opt(row, &rec[2])?,
            lambda: parse_opt(row, &rec[3])?,
            mean: parse_float(row, &rec[4])?,
            std: parse_float(row, &rec[5])?,
            reps: rec[6].parse().map_err(|_| bad(row, format!("bad count {:?}", &rec[6])))?,
            status: match &rec[7] {
                "complete" => CellStatus::Complete,
                "incomplete" => CellStatus::Incomplete,
                other => return Err(bad(row, format!("unknown status {other:?}"))),
            },
            group: rec[8].to_string(),
            metric: match &rec[9] {
                "accuracy" => Metric::Accuracy,
                "mse" => Metric::Mse,
                other => return Err(bad(row, format!("unknown metric {other:?}"))),
            },
        });
    }
    Ok(rows)
}

pub fn write_json<W: Write>(report: &ExperimentReport, out: W) -> Result<(), ExperimentError> {
    serde_json::to_writer_pretty(out, report)?;
    Ok(())
}

pub fn read_json<R: Read>(input: R) -> Result<ExperimentReport, ExperimentError> {
    Ok(serde_json::from_reader(input)?)
}

/// Writes `report` to `path`, or to stdout when `path` is `None`.
pub fn emit_report(report: &ExperimentReport, format: ReportFormat, path: Option<&Path>) -> Result<(), ExperimentError> {
    let io = |p: &Path, e: std::io::Error| ExperimentError::Io {
        path: p.to_path_buf(),
        source: e,
    };
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).map_err(|e| io(p, e))?);
            match format {
                ReportFormat::Csv => write_csv(report, &mut w)?,
                ReportFormat::Json => write_json(report, &mut w)?,
            }
            w.flush().map_err(|e| io(p, e))
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            match format {
                ReportFormat::Csv => write_csv(report, &mut w)?,
                ReportFormat::Json => {
                    write_json(report, &mut w)?;
                    writeln!(w).map_err(|e| io(Path::new("<stdout>"), e))?;
                }
            }
            Ok(())
        }
    }
}
