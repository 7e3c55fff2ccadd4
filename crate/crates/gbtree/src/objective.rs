//! Second-order objective pieces for squared loss L = (y − ŷ)².

use serde::{Deserialize, Serialize};

use crate::{GbError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradHessPair {
    pub g: f64,
    pub h: f64,
}

/// Gradient 2(ŷ − y) and hessian 2 of (y − ŷ)² with respect to ŷ.
#[inline]
pub fn squared_loss_grad_hess(y: f64, yhat: f64) -> GradHessPair {
    GradHessPair {
        g: 2.0 * (yhat - y),
        h: 2.0,
    }
}

/// Closed-form optimal leaf weight −G/(H + λ).
pub fn leaf_weight(g_sum: f64, h_sum: f64, lambda_reg: f64) -> Result<f64> {
    let denom = h_sum + lambda_reg;
    if denom == 0.0 || !denom.is_finite() {
        return Err(GbError::Degenerate(denom));
    }
    Ok(-g_sum / denom)
}

/// Objective decrease from splitting a leaf into (L, R), net of the extra leaf penalty.
#[inline]
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda_reg: f64, gamma_reg: f64) -> f64 {
    let g = gl + gr;
    0.5 * (gl * gl / (hl + lambda_reg) + gr * gr / (hr + lambda_reg)
        - g * g / (hl + hr + lambda_reg))
        - gamma_reg
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn loss(y: f64, yhat: f64) -> f64 {
        (y - yhat) * (y - yhat)
    }

    #[test]
    fn grad_hess_examples() {
        assert_eq!(
            squared_loss_grad_hess(0.7, 0.7),
            GradHessPair { g: 0.0, h: 2.0 }
        );
        assert_eq!(
            squared_loss_grad_hess(1.0, 0.0),
            GradHessPair { g: -2.0, h: 2.0 }
        );
    }

    #[test]
    fn leaf_weight_examples() {
        assert_eq!(leaf_weight(0.0, 3.0, 1.0).unwrap(), 0.0);
        assert_eq!(leaf_weight(-4.0, 4.0, 0.0).unwrap(), 1.0);
        assert_eq!(leaf_weight(-4.0, 4.0, 4.0).unwrap(), 0.5);
        assert!(matches!(
            leaf_weight(1.0, 0.0, 0.0),
            Err(GbError::Degenerate(_))
        ));
    }

    #[test]
    fn split_gain_examples() {
        assert_eq!(split_gain(-3.0, 2.0, -3.0, 2.0, 0.0, 0.0), 0.0);
        assert_eq!(split_gain(-2.0, 2.0, 2.0, 2.0, 0.0, 0.0), 2.0);
        assert_eq!(split_gain(-2.0, 2.0, 2.0, 2.0, 0.0, 0.5), 1.5);
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(y in -10.0f64..10.0, yhat in -10.0f64..10.0) {
            let eps = 1e-5;
            let gh = squared_loss_grad_hess(y, yhat);
            let g_fd = (loss(y, yhat + eps) - loss(y, yhat - eps)) / (2.0 * eps);
            let h_fd = (loss(y, yhat + eps) - 2.0 * loss(y, yhat) + loss(y, yhat - eps)) / (eps * eps);
            prop_assert!((gh.g - g_fd).abs() < 1e-6);
            prop_assert!((gh.h - h_fd).abs() < 1e-2);
        }

        #[test]
        fn leaf_weight_is_optimal(g in -100.0f64..100.0, h in 0.1f64..100.0, lambda in 0.0f64..10.0, eps in 1e-3f64..1.0) {
            let w = leaf_weight(g, h, lambda).unwrap();
            let obj = |w: f64| g * w + 0.5 * (h + lambda) * w * w;
            prop_assert!(obj(w + eps) > obj(w));
            prop_assert!(obj(w - eps) > obj(w));
        }
    }
}
