//! Telemetry log format, log replay and estimation-error reports.
//!
//! A telemetry log is a UTF-8 CSV file with LF line endings and the header
//! `t_s,x_m,v_mps,power_w,moving`. `power_w` is the mean electrical power over
//! the interval since the previous row, so the energy drawn in that interval
//! is `power_w * (t_s - t_prev)`. The first row starts the log and carries the
//! instantaneous power.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generalized::OnlineEstimatorState;
use crate::model::BatteryModel;

pub const TELEMETRY_HEADER: [&str; 5] = ["t_s", "x_m", "v_mps", "power_w", "moving"];

pub const REPORT_HEADER: [&str; 6] = [
    "id",
    "label",
    "d_true_m",
    "d_est_m",
    "error_pct",
    "accuracy_pct",
];

/// Fraction of malformed rows above which a whole stream is rejected.
pub const MAX_MALFORMED_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetrySample {
    pub t_s: f64,
    pub x_m: f64,
    pub v_mps: f64,
    pub power_w: f64,
    pub moving: bool,
}

impl TelemetrySample {
    pub fn validate(&self) -> Result<()> {
        if ![self.t_s, self.x_m, self.v_mps, self.power_w]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::InvalidSample(format!("non-finite field in {self:?}")));
        }
        if self.power_w < 0.0 {
            return Err(Error::InvalidSample(format!(
                "negative power {} W at t={}",
                self.power_w, self.t_s
            )));
        }
        Ok(())
    }
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

pub fn write_telemetry<W: Write>(w: W, samples: &[TelemetrySample]) -> Result<()> {
    let mut wtr = csv_writer(w);
    wtr.write_record(TELEMETRY_HEADER)?;
    for s in samples {
        wtr.serialize(s)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a telemetry log row by row. A bad header fails the whole read; bad
/// rows surface as per-row errors so the caller can skip and count them.
pub fn read_telemetry<R: Read>(r: R) -> Result<Vec<Result<TelemetrySample>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().ne(TELEMETRY_HEADER) {
        return Err(Error::BadHeader {
            expected: TELEMETRY_HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(rdr
        .deserialize::<TelemetrySample>()
        .map(|row| row.map_err(Error::from))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t_s: f64,
    pub estimate_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReplayTrace {
    pub points: Vec<TracePoint>,
    pub skipped: usize,
}

impl ReplayTrace {
    pub fn final_estimate(&self) -> Option<f64> {
        self.points.iter().rev().find_map(|p| p.estimate_m)
    }
}

/// Feeds a telemetry stream through the online estimator, recording the
/// estimate after every accepted sample.
///
/// Unparseable rows and samples the estimator rejects are skipped and
/// counted. More than [`MAX_MALFORMED_FRACTION`] skipped rows rejects the
/// stream.
pub fn replay<I>(
    rows: I,
    initial: OnlineEstimatorState,
    b: &BatteryModel,
) -> Result<(ReplayTrace, OnlineEstimatorState)>
where
    I: IntoIterator<Item = Result<TelemetrySample>>,
{
    b.validate()?;
    let mut state = initial;
    let mut trace = ReplayTrace::default();
    let mut total = 0usize;
    for row in rows {
        total += 1;
        let accepted = row.and_then(|s| state.update(&s, b).map(|est| (s.t_s, est)));
        match accepted {
            Ok((t_s, estimate_m)) => trace.points.push(TracePoint { t_s, estimate_m }),
            Err(e) => {
                log::warn!("skipping telemetry row {total}: {e}");
                trace.skipped += 1;
            }
        }
    }
    if total > 0 && trace.skipped as f64 > MAX_MALFORMED_FRACTION * total as f64 {
        return Err(Error::StreamRejected {
            malformed: trace.skipped,
            total,
        });
    }
    Ok((trace, state))
}

/// Writes `t_s,estimate_m,true_range_m` rows for external plotting. Missing
/// values are left empty.
pub fn write_plot_data<W: Write>(w: W, trace: &ReplayTrace, true_range_m: Option<f64>) -> Result<()> {
    let mut wtr = csv_writer(w);
    wtr.write_record(["t_s", "estimate_m", "true_range_m"])?;
    for p in &trace.points {
        wtr.serialize((p.t_s, p.estimate_m, true_range_m))?;
    }
    wtr.flush()?;
    Ok(())
}

/// One estimation trial: ground truth against prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub id: String,
    /// Free-form grouping key such as estimator variant, velocity or surface.
    pub label: String,
    pub d_true_m: f64,
    pub d_est_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub id: String,
    pub label: String,
    pub d_true_m: f64,
    pub d_est_m: f64,
    pub error_pct: f64,
    pub accuracy_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub label: String,
    pub count: usize,
    pub mean_error_pct: f64,
    pub std_error_pct: f64,
    pub mean_accuracy_pct: f64,
    pub std_accuracy_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectedTrial {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorReport {
    pub rows: Vec<ReportRow>,
    /// One entry per label, sorted by label.
    pub groups: Vec<GroupSummary>,
    pub rejected: Vec<RejectedTrial>,
}

impl ErrorReport {
    pub fn group(&self, label: &str) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.label == label)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv_writer(w);
        wtr.write_record(REPORT_HEADER)?;
        for row in &self.rows {
            wtr.serialize(row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Plain-text summary, one line per group.
    pub fn summary_text(&self) -> String {
        let mut out = String::new();
        for g in &self.groups {
            out.push_str(&format!(
                "{}: n={} accuracy {:.2}% (sd {:.2}) error {:.2}% (sd {:.2})\n",
                g.label,
                g.count,
                g.mean_accuracy_pct,
                g.std_accuracy_pct,
                g.mean_error_pct,
                g.std_error_pct
            ));
        }
        if !self.rejected.is_empty() {
            out.push_str(&format!("rejected trials: {}\n", self.rejected.len()));
        }
        out
    }
}

pub fn read_trials<R: Read>(r: R) -> Result<Vec<Trial>> {
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// Relative error (percent) of each trial and per-label mean and sample
/// standard deviation. Trials with a non-positive or non-finite true range
/// are listed as rejected and left out of the statistics.
pub fn build_report(trials: &[Trial]) -> ErrorReport {
    let mut report = ErrorReport::default();
    let mut by_label: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for t in trials {
        if !(t.d_true_m.is_finite() && t.d_true_m > 0.0) || !t.d_est_m.is_finite() {
            report.rejected.push(RejectedTrial {
                id: t.id.clone(),
                reason: format!(
                    "true range must be finite and > 0 and estimate finite, got {} / {}",
                    t.d_true_m, t.d_est_m
                ),
            });
            continue;
        }
        let error_pct = 100.0 * (t.d_est_m - t.d_true_m).abs() / t.d_true_m;
        report.rows.push(ReportRow {
            id: t.id.clone(),
            label: t.label.clone(),
            d_true_m: t.d_true_m,
            d_est_m: t.d_est_m,
            error_pct,
            accuracy_pct: 100.0 - error_pct,
        });
        by_label.entry(&t.label).or_default().push(error_pct);
    }
    report.groups = by_label
        .into_iter()
        .map(|(label, errors)| {
            let (mean_error_pct, std_error_pct) = mean_std(&errors);
            GroupSummary {
                label: label.to_string(),
                count: errors.len(),
                mean_error_pct,
                std_error_pct,
                mean_accuracy_pct: 100.0 - mean_error_pct,
                std_accuracy_pct: std_error_pct,
            }
        })
        .collect();
    report
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
