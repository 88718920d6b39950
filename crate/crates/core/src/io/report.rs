//! Machine-readable reports. Every report carries `schema_version`.
//!
//! JSON schemas (version 1):
//!
//! * estimate / resume: `{schema_version, command, mode, estimate, failed,
//!   halvings, sample_count, thresh, thresh_overridden, items_processed,
//!   peak_samples, seed, epsilon, delta, stream_bound}`. `estimate` is a
//!   number, a decimal string when it exceeds `u64`, or `null` for fail.
//! * validate: `{schema_version, command, informational, passed, checks:
//!   [{name, status, detail}], report: {...trial report, records: [...]}}`.
//! * exact: `{schema_version, command, mode, f0, items}`.
//! * generate sidecar: `{schema_version, command, mode, f0, length, spec}`.
//!
//! CSV: estimate and exact reports are one header row plus one data row with
//! the same fields; validate emits one row per trial.

use std::io::{self, Write};

use serde::Serialize;

use crate::harness::{CheckResult, StreamSpec, TrialReport};
use crate::io::formats::InputMode;
use crate::sketch::{Element, Estimate, SketchState};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

fn mode_name<S: serde::Serializer>(mode: &InputMode, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(mode.name())
}

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub schema_version: u32,
    pub command: &'static str,
    #[serde(serialize_with = "mode_name")]
    pub mode: InputMode,
    pub estimate: Estimate,
    pub failed: bool,
    pub halvings: u32,
    pub sample_count: u64,
    pub thresh: u64,
    pub thresh_overridden: bool,
    pub items_processed: u64,
    pub peak_samples: u64,
    pub seed: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub stream_bound: u64,
}

impl EstimateReport {
    pub fn from_state<E: Element>(
        command: &'static str,
        mode: InputMode,
        state: &SketchState<E>,
        seed: u64,
    ) -> Self {
        let config = state.config();
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            command,
            mode,
            estimate: state.estimate(),
            failed: state.is_failed(),
            halvings: state.halvings(),
            sample_count: state.sample_count() as u64,
            thresh: config.thresh(),
            thresh_overridden: config.thresh_overridden(),
            items_processed: state.items_processed(),
            peak_samples: state.peak_samples(),
            seed,
            epsilon: config.epsilon(),
            delta: config.delta(),
            stream_bound: config.stream_bound(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidateReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub informational: bool,
    pub passed: bool,
    pub checks: Vec<CheckResult>,
    pub report: TrialReport,
}

impl ValidateReport {
    pub fn new(report: TrialReport, checks: Vec<CheckResult>, informational: bool) -> Self {
        let passed = checks.iter().all(|c| c.status != crate::harness::CheckStatus::Fail);
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            command: "validate",
            informational,
            passed,
            checks,
            report,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactReport {
    pub schema_version: u32,
    pub command: &'static str,
    #[serde(serialize_with = "mode_name")]
    pub mode: InputMode,
    pub f0: u64,
    pub items: u64,
}

impl ExactReport {
    pub fn new(mode: InputMode, f0: u64, items: u64) -> Self {
        Self { schema_version: REPORT_SCHEMA_VERSION, command: "exact", mode, f0, items }
    }
}

/// Ground truth written next to a generated stream.
#[derive(Debug, Clone, Serialize)]
pub struct GroundTruthSidecar {
    pub schema_version: u32,
    pub command: &'static str,
    #[serde(serialize_with = "mode_name")]
    pub mode: InputMode,
    pub f0: u64,
    pub length: u64,
    pub spec: StreamSpec,
}

impl GroundTruthSidecar {
    pub fn new(mode: InputMode, f0: u64, spec: StreamSpec) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            command: "generate",
            mode,
            f0,
            length: spec.length,
            spec,
        }
    }
}

#[derive(Serialize)]
struct TrialCsvRow {
    schema_version: u32,
    trial: u64,
    estimate: Option<String>,
    relative_error: Option<f64>,
    covered: bool,
    failed: bool,
    final_halvings: u32,
    peak_samples: u64,
    bits_consumed: u64,
}

fn to_io(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

/// Writes `value` as pretty JSON followed by a newline.
pub fn write_json<W: Write, T: Serialize>(out: &mut W, value: &T) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(io::Error::other)?;
    out.write_all(b"\n")
}

/// Writes a single-record report as a header row plus one data row.
pub fn write_single_csv<W: Write, T: Serialize>(out: W, value: &T) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.serialize(value).map_err(to_io)?;
    w.flush()
}

pub fn write_validate_csv<W: Write>(out: W, report: &ValidateReport) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in &report.report.records {
        w.serialize(TrialCsvRow {
            schema_version: report.schema_version,
            trial: r.trial,
            estimate: r.estimate.value().map(|v| v.to_string()),
            relative_error: r.relative_error,
            covered: r.covered,
            failed: r.failed,
            final_halvings: r.final_halvings,
            peak_samples: r.peak_samples,
            bits_consumed: r.bits_consumed,
        })
        .map_err(to_io)?;
    }
    w.flush()
}
