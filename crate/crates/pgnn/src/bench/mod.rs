//! Monte Carlo benchmark harness comparing direct and inverse prediction
//! across training-set sizes, with metrics and report emission.

mod metrics;
mod monte_carlo;
mod report;

pub use metrics::{compute_metrics, Metrics};
pub use monte_carlo::{run_monte_carlo, BenchConfig, BenchReport, BenchRow};
pub use report::{emit_report, parse_rows, summarize, SummaryRow, ROWS_HEADER, SUMMARY_HEADER};
