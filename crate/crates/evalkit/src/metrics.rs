use serde::{Deserialize, Serialize};

use crate::{EvalError, Result};

/// Summary of signed depth errors, all in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mae: f64,
    pub rmse: f64,
    /// Mean signed error (predicted − truth).
    pub bias: f64,
    pub max_abs: f64,
    pub n: usize,
}

impl ErrorStats {
    pub fn from_errors_mm(errors: &[f64]) -> Result<Self> {
        if errors.is_empty() {
            return Err(EvalError::Empty);
        }
        if let Some(i) = errors.iter().position(|e| !e.is_finite()) {
            return Err(EvalError::NonFinite(i));
        }
        let n = errors.len() as f64;
        let (mut abs, mut sq, mut sum, mut max_abs) = (0.0, 0.0, 0.0, 0.0f64);
        for &e in errors {
            abs += e.abs();
            sq += e * e;
            sum += e;
            max_abs = max_abs.max(e.abs());
        }
        let mae = abs / n;
        // Guard the mae ≤ rmse ordering against rounding when all |e| are equal.
        let rmse = (sq / n).sqrt().max(mae);
        Ok(Self {
            mae,
            rmse,
            bias: sum / n,
            max_abs,
            n: errors.len(),
        })
    }
}

/// Signed errors `(predicted − truth) × 1000`.
pub fn errors_mm(predicted: &[f64], truth: &[f64]) -> Result<Vec<f64>> {
    if predicted.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    Ok(predicted
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * 1000.0)
        .collect())
}

pub fn error_stats(predicted: &[f64], truth: &[f64]) -> Result<ErrorStats> {
    ErrorStats::from_errors_mm(&errors_mm(predicted, truth)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_prediction() {
        let s = error_stats(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(
            (s.mae, s.rmse, s.bias, s.max_abs, s.n),
            (0.0, 0.0, 0.0, 0.0, 2)
        );
    }

    #[test]
    fn hand_examples() {
        let s = ErrorStats::from_errors_mm(&[1.0, -1.0]).unwrap();
        assert_eq!((s.mae, s.rmse, s.bias), (1.0, 1.0, 0.0));
        let s = ErrorStats::from_errors_mm(&[0.0, 3.0, 4.0]).unwrap();
        assert!((s.mae - 7.0 / 3.0).abs() < 1e-12);
        assert!((s.rmse - (25.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((s.rmse - 2.8868).abs() < 1e-4);
        assert_eq!(s.max_abs, 4.0);
    }

    #[test]
    fn metres_to_millimetres() {
        let s = error_stats(&[1.002], &[1.0]).unwrap();
        assert!((s.bias - 2.0).abs() < 1e-9);
    }

    #[test]
    fn bad_inputs() {
        assert!(matches!(
            error_stats(&[1.0], &[1.0, 2.0]),
            Err(EvalError::LengthMismatch { .. })
        ));
        assert!(matches!(error_stats(&[], &[]), Err(EvalError::Empty)));
        assert!(matches!(
            error_stats(&[f64::NAN], &[0.0]),
            Err(EvalError::NonFinite(0))
        ));
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae(e in prop::collection::vec(-1e3f64..1e3, 1..200)) {
            let s = ErrorStats::from_errors_mm(&e).unwrap();
            prop_assert!(0.0 <= s.mae && s.mae <= s.rmse);
            prop_assert!(s.rmse <= s.max_abs * (1.0 + 1e-12));
        }

        #[test]
        fn equal_magnitudes_give_equal_mae_rmse(m in 0.0f64..100.0, signs in prop::collection::vec(any::<bool>(), 1..50)) {
            let e: Vec<f64> = signs.iter().map(|&s| if s { m } else { -m }).collect();
            let s = ErrorStats::from_errors_mm(&e).unwrap();
            prop_assert!((s.rmse - s.mae).abs() <= 1e-12 * m.max(1.0));
        }
    }
}
