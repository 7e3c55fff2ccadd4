use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{EvalError, Result};

/// Uniform-width histogram. Bins are `[left, right)` except the last, which is closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_width(&self) -> f64 {
        self.edges[1] - self.edges[0]
    }

    /// Writes `bin_left_mm,bin_right_mm,count`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "bin_left_mm,bin_right_mm,count")?;
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(w, "{},{},{}", self.edges[i], self.edges[i + 1], c)?;
        }
        Ok(())
    }
}

/// Bins `errors` (mm) on a grid of width `bin_width` centred on the data range.
pub fn histogram(errors: &[f64], bin_width: f64) -> Result<Histogram> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(EvalError::Invalid(format!(
            "bin width must be positive, got {bin_width}"
        )));
    }
    if errors.is_empty() {
        return Err(EvalError::Empty);
    }
    if let Some(i) = errors.iter().position(|e| !e.is_finite()) {
        return Err(EvalError::NonFinite(i));
    }
    let (lo, hi) = errors
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &e| {
            (a.min(e), b.max(e))
        });
    let n_bins = (((hi - lo) / bin_width).ceil() as usize).max(1);
    let left = 0.5 * (lo + hi) - 0.5 * n_bins as f64 * bin_width;
    let edges: Vec<f64> = (0..=n_bins).map(|i| left + i as f64 * bin_width).collect();
    let mut counts = vec![0u64; n_bins];
    for &e in errors {
        let i = ((e - left) / bin_width).floor();
        let i = if i < 0.0 {
            0
        } else {
            (i as usize).min(n_bins - 1)
        };
        counts[i] += 1;
    }
    Ok(Histogram { edges, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};
    use statrs::distribution::{ContinuousCDF, Normal as SNormal};

    #[test]
    fn single_value() {
        let h = histogram(&[2.5], 1.0).unwrap();
        assert_eq!(h.counts, vec![1]);
        assert_eq!(h.edges, vec![2.0, 3.0]);
    }

    #[test]
    fn symmetric_data_symmetric_counts() {
        let data = [-3.3, -2.1, -2.0, -0.4, 0.4, 2.0, 2.1, 3.3, -1.7, 1.7];
        let h = histogram(&data, 0.75).unwrap();
        let rev: Vec<u64> = h.counts.iter().rev().copied().collect();
        assert_eq!(h.counts, rev);
        assert_eq!(h.total(), data.len() as u64);
    }

    #[test]
    fn csv_layout() {
        let h = histogram(&[0.0, 1.0], 1.0).unwrap();
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "bin_left_mm,bin_right_mm,count\n0,1,2\n"
        );
    }

    #[test]
    fn errors() {
        assert!(matches!(histogram(&[], 1.0), Err(EvalError::Empty)));
        assert!(histogram(&[1.0], 0.0).is_err());
        assert!(histogram(&[1.0], -1.0).is_err());
    }

    #[test]
    fn gaussian_chi_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let normal = Normal::new(0.0, 5.0).unwrap();
        let n = 1_000_000;
        let data: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let h = histogram(&data, 1.0).unwrap();
        assert_eq!(h.total(), n as u64);
        let oracle = SNormal::new(0.0, 5.0).unwrap();
        let (mut chi2, mut dof) = (0.0, 0usize);
        for (i, &c) in h.counts.iter().enumerate() {
            let expected = n as f64 * (oracle.cdf(h.edges[i + 1]) - oracle.cdf(h.edges[i]));
            if expected >= 5.0 {
                chi2 += (c as f64 - expected).powi(2) / expected;
                dof += 1;
            }
        }
        let dof = (dof - 1) as f64;
        // Roughly five standard deviations above the mean of a χ² variable.
        assert!(
            chi2 < dof + 5.0 * (2.0 * dof).sqrt(),
            "chi2 {chi2} dof {dof}"
        );
    }

    proptest! {
        #[test]
        fn counts_conserve_n(e in prop::collection::vec(-1e4f64..1e4, 1..500), w in 0.01f64..100.0) {
            let h = histogram(&e, w).unwrap();
            prop_assert_eq!(h.total(), e.len() as u64);
            prop_assert!(h.edges.windows(2).all(|p| p[0] < p[1]));
            prop_assert_eq!(h.edges.len(), h.counts.len() + 1);
        }
    }
}
