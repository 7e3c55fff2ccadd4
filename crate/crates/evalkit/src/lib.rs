//! Evaluation helpers for depth-correction models.
//!
//! All error figures are reported in millimetres; inputs are metres.

mod error;
mod histogram;
mod knn;
mod metrics;
mod report;

pub use error::{EvalError, Result};
pub use histogram::{histogram, Histogram};
pub use knn::{knn_fit, KnnModel};
pub use metrics::{error_stats, errors_mm, ErrorStats};
pub use report::{
    comparison_report, format_report_text, write_report_csv, ModelEntry, Predictor, ReportRow,
};
