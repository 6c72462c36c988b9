//! Streaming report writers for batch results.
//!
//! CSV rows follow the column order in [`CSV_HEADER`]; the JSON variant is one
//! object per line. Both write a final summary record, flushed after every
//! row, so a file without a summary marks a truncated run.

use std::io::Write;

use serde::Serialize;

use crate::error::Result;
use crate::harness::{BatchSummary, InequalityId, SampleReport, Status};

pub const CSV_HEADER: [&str; 12] = [
    "sample_id",
    "seed",
    "inequality_id",
    "lhs",
    "rhs_sum",
    "slack",
    "status",
    "exact_lhs",
    "n_rhs_terms",
    "restarts",
    "max_iterations",
    "wall_ms",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(crate::Error::InvalidArgument(format!(
                "unknown format '{other}' (expected csv or json)"
            ))),
        }
    }
}

/// Header fields shared by every row of one run.
#[derive(Clone, Debug)]
pub struct RunInfo {
    pub inequality: InequalityId,
    pub master_seed: u64,
    /// Record measured wall-clock times; otherwise `wall_ms` is written as 0
    /// so that identical invocations give identical bytes.
    pub timing: bool,
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

#[derive(Serialize)]
struct JsonSummary<'a> {
    sample_id: &'static str,
    seed: u64,
    inequality_id: InequalityId,
    #[serde(flatten)]
    summary: &'a BatchSummary,
    wall_ms: f64,
}

#[derive(Serialize)]
struct JsonSample<'a> {
    #[serde(flatten)]
    sample: &'a SampleReport,
    rhs_sum: f64,
    wall_ms: f64,
}

enum Sink<W: Write> {
    Csv(Box<csv::Writer<W>>),
    Json(W),
}

pub struct ReportWriter<W: Write> {
    sink: Sink<W>,
    info: RunInfo,
    wall_total: f64,
}

impl<W: Write> ReportWriter<W> {
    /// Creates the writer and emits the CSV header if applicable.
    pub fn new(out: W, format: Format, info: RunInfo) -> Result<Self> {
        let sink = match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(CSV_HEADER)?;
                w.flush()?;
                Sink::Csv(Box::new(w))
            }
            Format::Json => Sink::Json(out),
        };
        Ok(Self { sink, info, wall_total: 0.0 })
    }

    fn wall(&self, ms: f64) -> f64 {
        if self.info.timing {
            ms
        } else {
            0.0
        }
    }

    pub fn write_sample(&mut self, s: &SampleReport) -> Result<()> {
        let wall_ms = self.wall(s.wall_ms);
        self.wall_total += wall_ms;
        let r = &s.report;
        match &mut self.sink {
            Sink::Csv(w) => {
                w.write_record([
                    s.sample_id.to_string(),
                    s.seed.to_string(),
                    r.inequality_id.to_string(),
                    num(r.lhs),
                    num(r.rhs_sum()),
                    num(r.slack),
                    r.status.to_string(),
                    r.exact_lhs().to_string(),
                    r.rhs_terms.len().to_string(),
                    r.restarts.to_string(),
                    r.max_iterations.to_string(),
                    num(wall_ms),
                ])?;
                w.flush()?;
            }
            Sink::Json(w) => {
                let row = JsonSample { sample: s, rhs_sum: r.rhs_sum(), wall_ms };
                serde_json::to_writer(&mut *w, &row)?;
                w.write_all(b"\n")?;
                w.flush()?;
            }
        }
        Ok(())
    }

    /// Writes the summary record and returns the underlying writer.
    ///
    /// In CSV the summary row reuses the columns: `slack` holds the minimum
    /// slack, `n_rhs_terms` the sample count, and `status` the per-status
    /// counts and mean slack as `key=value` pairs.
    pub fn finish(self, summary: &BatchSummary) -> Result<W> {
        let wall_ms = self.wall_total;
        match self.sink {
            Sink::Csv(mut w) => {
                let status = format!(
                    "{}={};{}={};{}={};mean_slack={}",
                    Status::Confirmed,
                    summary.confirmed,
                    Status::Inconclusive,
                    summary.inconclusive,
                    Status::ViolatedCertified,
                    summary.violated_certified,
                    num(summary.mean_slack)
                );
                w.write_record([
                    "summary".to_string(),
                    self.info.master_seed.to_string(),
                    self.info.inequality.to_string(),
                    String::new(),
                    String::new(),
                    num(summary.min_slack),
                    status,
                    String::new(),
                    summary.n_samples.to_string(),
                    String::new(),
                    String::new(),
                    num(wall_ms),
                ])?;
                w.flush()?;
                w.into_inner().map_err(|e| e.into_error().into())
            }
            Sink::Json(mut w) => {
                let row = JsonSummary {
                    sample_id: "summary",
                    seed: self.info.master_seed,
                    inequality_id: self.info.inequality,
                    summary,
                    wall_ms,
                };
                serde_json::to_writer(&mut w, &row)?;
                w.write_all(b"\n")?;
                w.flush()?;
                Ok(w)
            }
        }
    }
}
