use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrics::error_stats;
use crate::{KnnModel, Result};

/// Anything that maps a feature row to a corrected depth (m).
pub trait Predictor: Sync {
    fn predict_row(&self, x: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64 + Sync> Predictor for F {
    fn predict_row(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

impl Predictor for KnnModel {
    fn predict_row(&self, x: &[f64]) -> f64 {
        self.predict(x).unwrap_or(f64::NAN)
    }
}

/// A fitted model to be scored.
pub struct ModelEntry<'a> {
    pub name: String,
    pub predictor: &'a dyn Predictor,
    pub train_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub rmse_train_mm: f64,
    pub rmse_test_mm: f64,
    pub mae_train_mm: f64,
    pub mae_test_mm: f64,
    pub train_time_s: f64,
}

/// Scores every model on both splits. `train` and `test` are `(rows, targets)`.
pub fn comparison_report<R: AsRef<[f64]> + Sync>(
    models: &[ModelEntry<'_>],
    train: (&[R], &[f64]),
    test: (&[R], &[f64]),
) -> Result<Vec<ReportRow>> {
    models
        .iter()
        .map(|m| {
            let score = |(rows, y): (&[R], &[f64])| {
                let pred: Vec<f64> = rows
                    .par_iter()
                    .map(|r| m.predictor.predict_row(r.as_ref()))
                    .collect();
                error_stats(&pred, y)
            };
            let tr = score(train)?;
            let te = score(test)?;
            Ok(ReportRow {
                model: m.name.clone(),
                rmse_train_mm: tr.rmse,
                rmse_test_mm: te.rmse,
                mae_train_mm: tr.mae,
                mae_test_mm: te.mae,
                train_time_s: m.train_time_s,
            })
        })
        .collect()
}

const HEADER: [&str; 6] = [
    "model",
    "rmse_train_mm",
    "rmse_test_mm",
    "mae_train_mm",
    "mae_test_mm",
    "train_time_s",
];

pub fn write_report_csv(mut w: impl Write, rows: &[ReportRow]) -> Result<()> {
    writeln!(w, "{}", HEADER.join(","))?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.model, r.rmse_train_mm, r.rmse_test_mm, r.mae_train_mm, r.mae_test_mm, r.train_time_s
        )?;
    }
    Ok(())
}

/// Fixed-width table for terminals and logs.
pub fn format_report_text(rows: &[ReportRow]) -> String {
    let cells: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            [
                r.model.clone(),
                format!("{:.3}", r.rmse_train_mm),
                format!("{:.3}", r.rmse_test_mm),
                format!("{:.3}", r.mae_train_mm),
                format!("{:.3}", r.mae_test_mm),
                format!("{:.2}", r.train_time_s),
            ]
        })
        .collect();
    let mut width: [usize; 6] = HEADER.map(str::len);
    for row in &cells {
        for (w, c) in width.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let mut line = |row: [&str; 6]| {
        let parts: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if i == 0 {
                    format!("{c:<w$}", w = width[0])
                } else {
                    format!("{c:>w$}", w = width[i])
                }
            })
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(HEADER);
    for row in &cells {
        line(row.each_ref().map(String::as_str));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data() -> (Vec<[f64; 2]>, Vec<f64>) {
        let rows: Vec<[f64; 2]> = (0..10).map(|i| [i as f64, 1.0]).collect();
        let y = rows.iter().map(|r| r[0] * 0.5).collect();
        (rows, y)
    }

    #[test]
    fn perfect_predictor_scores_zero() {
        let (rows, y) = data();
        let perfect = |x: &[f64]| x[0] * 0.5;
        let offset = |x: &[f64]| x[0] * 0.5 + 0.002;
        let models = [
            ModelEntry {
                name: "perfect".into(),
                predictor: &perfect,
                train_time_s: 0.0,
            },
            ModelEntry {
                name: "offset".into(),
                predictor: &offset,
                train_time_s: 1.5,
            },
        ];
        let rep = comparison_report(&models, (&rows, &y), (&rows, &y)).unwrap();
        assert_eq!(rep[0].rmse_test_mm, 0.0);
        assert_eq!(rep[0].mae_train_mm, 0.0);
        assert!((rep[1].mae_test_mm - 2.0).abs() < 1e-9);
        assert_eq!(
            rep,
            comparison_report(&models, (&rows, &y), (&rows, &y)).unwrap()
        );

        let mut buf = Vec::new();
        write_report_csv(&mut buf, &rep).unwrap();
        let csv = String::from_utf8(buf).unwrap();
        assert!(csv.starts_with("model,rmse_train_mm,rmse_test_mm,mae_train_mm,mae_test_mm,train_time_s\nperfect,0,0,0,0,0\n"));

        let text = format_report_text(&rep);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1].len(), lines[2].len());
        assert!(lines[2].starts_with("offset "));
    }

    #[test]
    fn knn_is_a_predictor() {
        let (rows, y) = data();
        let m = crate::knn_fit(&rows, &y, 1).unwrap();
        let models = [ModelEntry {
            name: "knn".into(),
            predictor: &m,
            train_time_s: 0.0,
        }];
        let rep = comparison_report(&models, (&rows, &y), (&rows, &y)).unwrap();
        assert_eq!(rep[0].mae_train_mm, 0.0);
    }
}
