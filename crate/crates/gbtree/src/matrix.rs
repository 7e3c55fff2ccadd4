use crate::{GbError, Result};

/// Dense, column-major feature matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_features: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    /// Builds from row slices; every row must have the same width and finite values.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_features = rows.first().map_or(0, |r| r.as_ref().len());
        Self::from_row_iter(n_features, rows.iter().map(|r| r.as_ref()))
    }

    pub fn from_row_iter<'a>(
        n_features: usize,
        rows: impl IntoIterator<Item = &'a [f64]>,
    ) -> Result<Self> {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        let n_rows = rows.len();
        let mut data = vec![0.0; n_rows * n_features];
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n_features {
                return Err(GbError::Dimension {
                    expected: n_features,
                    got: row.len(),
                });
            }
            for (f, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(GbError::NonFiniteFeature { row: r, feature: f });
                }
                data[f * n_rows + r] = v;
            }
        }
        Ok(Self {
            n_rows,
            n_features,
            data,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    #[inline]
    pub fn get(&self, row: usize, feature: usize) -> f64 {
        self.data[feature * self.n_rows + row]
    }

    #[inline]
    pub fn column(&self, feature: usize) -> &[f64] {
        &self.data[feature * self.n_rows..(feature + 1) * self.n_rows]
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        (0..self.n_features).map(|f| self.get(row, f)).collect()
    }

    /// New matrix holding `rows` in the given order.
    pub fn select(&self, rows: &[usize]) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * self.n_features);
        for f in 0..self.n_features {
            let col = self.column(f);
            data.extend(rows.iter().map(|&r| col[r]));
        }
        Self {
            n_rows: n,
            n_features: self.n_features,
            data,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_and_selection() {
        let m = FeatureMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        assert_eq!(m.column(1), &[2.0, 4.0, 6.0]);
        assert_eq!(m.row(2), vec![5.0, 6.0]);
        let s = m.select(&[2, 0]);
        assert_eq!(s.column(0), &[5.0, 1.0]);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(matches!(
            FeatureMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0]]),
            Err(GbError::Dimension {
                expected: 2,
                got: 1
            })
        ));
        assert!(matches!(
            FeatureMatrix::from_rows(&[[1.0, f64::NAN]]),
            Err(GbError::NonFiniteFeature { row: 0, feature: 1 })
        ));
    }
}
