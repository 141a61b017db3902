//! Report files: per-run rows, per-cell summaries, and learning-curve data.
//!
//! All floats are written with 9 significant digits and LF line endings;
//! undefined R^2 values appear as empty CSV cells and JSON nulls.

use super::metrics::Metrics;
use super::monte_carlo::{BenchReport, BenchRow};
use crate::error::{Error, Result};
use crate::synth::format_sig;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

pub const ROWS_HEADER: &str = "model,train_size,rep,rmse,mae,r2,se";
pub const SUMMARY_HEADER: &str =
    "model,train_size,rmse_mean,rmse_std,mae_mean,mae_std,r2_mean,r2_std,se_mean,se_std";

/// Mean and population standard deviation of each metric over repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    pub train_size: usize,
    pub rmse_mean: f64,
    pub rmse_std: f64,
    pub mae_mean: f64,
    pub mae_std: f64,
    pub r2_mean: Option<f64>,
    pub r2_std: Option<f64>,
    pub se_mean: f64,
    pub se_std: f64,
}

fn mean_and_pop_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per (model, train_size): means and population stds over reps, ordered by
/// model name then size.
pub fn summarize(report: &BenchReport) -> Result<Vec<SummaryRow>> {
    if report.rows.is_empty() {
        return Err(Error::dim("cannot summarize an empty report"));
    }
    let mut cells: BTreeMap<(String, usize), Vec<&BenchRow>> = BTreeMap::new();
    for row in &report.rows {
        cells
            .entry((row.model.clone(), row.train_size))
            .or_default()
            .push(row);
    }
    let mut out = Vec::with_capacity(cells.len());
    for ((model, train_size), rows) in cells {
        let rmse: Vec<f64> = rows.iter().map(|r| r.metrics.rmse).collect();
        let mae: Vec<f64> = rows.iter().map(|r| r.metrics.mae).collect();
        let se: Vec<f64> = rows.iter().map(|r| r.metrics.se).collect();
        let (rmse_mean, rmse_std) = mean_and_pop_std(&rmse);
        let (mae_mean, mae_std) = mean_and_pop_std(&mae);
        let (se_mean, se_std) = mean_and_pop_std(&se);
        let (r2_mean, r2_std) = if rows.iter().all(|r| r.metrics.r2.is_some()) {
            let r2: Vec<f64> = rows.iter().map(|r| r.metrics.r2.unwrap()).collect();
            let (m, s) = mean_and_pop_std(&r2);
            (Some(m), Some(s))
        } else {
            (None, None)
        };
        out.push(SummaryRow {
            model,
            train_size,
            rmse_mean,
            rmse_std,
            mae_mean,
            mae_std,
            r2_mean,
            r2_std,
            se_mean,
            se_std,
        });
    }
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format_sig(x, 9)).unwrap_or_default()
}

fn rows_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(ROWS_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.model,
            r.train_size,
            r.rep,
            format_sig(r.metrics.rmse, 9),
            format_sig(r.metrics.mae, 9),
            fmt_opt(r.metrics.r2),
            format_sig(r.metrics.se, 9)
        )
        .expect("string write");
    }
    out
}

/// Rounds to 9 significant digits by a format/parse round trip, so emitted
/// JSON numbers match the CSV precision exactly.
fn round_sig9(v: f64) -> f64 {
    format_sig(v, 9)
        .parse()
        .expect("format_sig emits valid floats")
}

/// Writes `rows.csv`, `summary.csv`, `summary.json`, and `curves.csv` (the
/// per-size learning-curve series for external plotting).
pub fn emit_report(report: &BenchReport, out_dir: &Path) -> Result<()> {
    if report.rows.is_empty() {
        return Err(Error::dim("refusing to emit an empty report"));
    }
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("rows.csv"), rows_csv(&report.rows))?;

    let summary = summarize(report)?;
    let mut csv = String::from(SUMMARY_HEADER);
    csv.push('\n');
    for s in &summary {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            s.model,
            s.train_size,
            format_sig(s.rmse_mean, 9),
            format_sig(s.rmse_std, 9),
            format_sig(s.mae_mean, 9),
            format_sig(s.mae_std, 9),
            fmt_opt(s.r2_mean),
            fmt_opt(s.r2_std),
            format_sig(s.se_mean, 9),
            format_sig(s.se_std, 9)
        )
        .expect("string write");
    }
    std::fs::write(out_dir.join("summary.csv"), csv)?;

    let rounded: Vec<SummaryRow> = summary
        .iter()
        .map(|s| SummaryRow {
            model: s.model.clone(),
            train_size: s.train_size,
            rmse_mean: round_sig9(s.rmse_mean),
            rmse_std: round_sig9(s.rmse_std),
            mae_mean: round_sig9(s.mae_mean),
            mae_std: round_sig9(s.mae_std),
            r2_mean: s.r2_mean.map(round_sig9),
            r2_std: s.r2_std.map(round_sig9),
            se_mean: round_sig9(s.se_mean),
            se_std: round_sig9(s.se_std),
        })
        .collect();
    let json = serde_json::to_string_pretty(&rounded)?;
    std::fs::write(out_dir.join("summary.json"), json)?;

    let mut curves = String::from("model,train_size,rmse_mean,r2_mean\n");
    for s in &summary {
        writeln!(
            curves,
            "{},{},{},{}",
            s.model,
            s.train_size,
            format_sig(s.rmse_mean, 9),
            fmt_opt(s.r2_mean)
        )
        .expect("string write");
    }
    std::fs::write(out_dir.join("curves.csv"), curves)?;
    Ok(())
}

/// Parses a `rows.csv` produced by [`emit_report`].
pub fn parse_rows(path: &Path) -> Result<Vec<BenchRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == ROWS_HEADER => {}
        other => {
            return Err(Error::Format(format!(
                "rows.csv header mismatch: {other:?}"
            )));
        }
    }
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 7 {
            return Err(Error::Format(format!(
                "rows.csv line {}: expected 7 fields",
                lineno + 2
            )));
        }
        let parse_f = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| {
                Error::Format(format!("rows.csv line {}: bad float {s:?}", lineno + 2))
            })
        };
        rows.push(BenchRow {
            model: parts[0].to_string(),
            train_size: parts[1]
                .parse()
                .map_err(|_| Error::Format("bad train_size".into()))?,
            rep: parts[2]
                .parse()
                .map_err(|_| Error::Format("bad rep".into()))?,
            metrics: Metrics {
                rmse: parse_f(parts[3])?,
                mae: parse_f(parts[4])?,
                r2: if parts[5].is_empty() {
                    None
                } else {
                    Some(parse_f(parts[5])?)
                },
                se: parse_f(parts[6])?,
            },
        });
    }
    Ok(rows)
}
