use rayon::prelude::*;

use crate::{EvalError, Result};

/// Brute-force k-nearest-neighbour regressor over z-scored features.
///
/// Neighbours are ranked by `(squared distance, training index)`, so exact
/// ties always resolve to the lower index.
#[derive(Debug, Clone)]
pub struct KnnModel {
    k: usize,
    n_features: usize,
    mean: Vec<f64>,
    scale: Vec<f64>,
    /// Row-major standardized training features.
    z: Vec<f64>,
    targets: Vec<f64>,
}

/// Fits on `rows` (one feature vector per sample) and `targets`.
pub fn knn_fit<R: AsRef<[f64]>>(rows: &[R], targets: &[f64], k: usize) -> Result<KnnModel> {
    let n = rows.len();
    if n == 0 {
        return Err(EvalError::Empty);
    }
    if targets.len() != n {
        return Err(EvalError::LengthMismatch {
            left: n,
            right: targets.len(),
        });
    }
    if k == 0 || k > n {
        return Err(EvalError::Invalid(format!(
            "k must lie in 1..={n}, got {k}"
        )));
    }
    let p = rows[0].as_ref().len();
    let mut mean = vec![0.0; p];
    for (i, r) in rows.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != p {
            return Err(EvalError::Dimension {
                expected: p,
                got: r.len(),
            });
        }
        if r.iter().any(|v| !v.is_finite()) || !targets[i].is_finite() {
            return Err(EvalError::NonFinite(i));
        }
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; p];
    for r in rows {
        for ((s, v), m) in var.iter_mut().zip(r.as_ref()).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    // Constant columns carry no distance information; leave them unscaled.
    let scale: Vec<f64> = var
        .iter()
        .map(|s| {
            let sd = (s / n as f64).sqrt();
            if sd > 0.0 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    let mut z = Vec::with_capacity(n * p);
    for r in rows {
        z.extend(
            r.as_ref()
                .iter()
                .zip(&mean)
                .zip(&scale)
                .map(|((v, m), s)| (v - m) / s),
        );
    }
    Ok(KnnModel {
        k,
        n_features: p,
        mean,
        scale,
        z,
        targets: targets.to_vec(),
    })
}

impl KnnModel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_train(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Same model with a different neighbour count.
    pub fn with_k(mut self, k: usize) -> Result<Self> {
        if k == 0 || k > self.n_train() {
            return Err(EvalError::Invalid(format!(
                "k must lie in 1..={}, got {k}",
                self.n_train()
            )));
        }
        self.k = k;
        Ok(self)
    }

    fn standardize(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_features {
            return Err(EvalError::Dimension {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect())
    }

    /// Indices of the `kmax` nearest training points, nearest first.
    pub fn neighbors(&self, x: &[f64], kmax: usize) -> Result<Vec<usize>> {
        let q = self.standardize(x)?;
        let kmax = kmax.clamp(1, self.n_train());
        // Sorted (d², index) of the current best; the last entry is the bound.
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(kmax + 1);
        for (i, row) in self.z.chunks_exact(self.n_features).enumerate() {
            let bound = if best.len() == kmax {
                best[kmax - 1].0
            } else {
                f64::INFINITY
            };
            let mut d = 0.0;
            for (a, b) in row.iter().zip(&q) {
                d += (a - b) * (a - b);
                if d > bound {
                    break;
                }
            }
            // Equal distance never displaces: earlier indices win ties.
            if d < bound || best.len() < kmax {
                let pos = best.partition_point(|&(bd, bi)| bd < d || (bd == d && bi < i));
                best.insert(pos, (d, i));
                best.truncate(kmax);
            }
        }
        Ok(best.into_iter().map(|(_, i)| i).collect())
    }

    /// Mean target over the first `k` entries of a neighbour list.
    pub fn mean_target(&self, neighbors: &[usize], k: usize) -> f64 {
        let k = k.min(neighbors.len());
        neighbors[..k].iter().map(|&i| self.targets[i]).sum::<f64>() / k as f64
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let nb = self.neighbors(x, self.k)?;
        Ok(self.mean_target(&nb, self.k))
    }

    pub fn predict_batch<R: AsRef<[f64]> + Sync>(&self, rows: &[R]) -> Result<Vec<f64>> {
        rows.par_iter().map(|r| self.predict(r.as_ref())).collect()
    }

    /// Neighbour lists of length `kmax` for every query, for cheap sweeps over k.
    pub fn neighbor_lists<R: AsRef<[f64]> + Sync>(
        &self,
        rows: &[R],
        kmax: usize,
    ) -> Result<Vec<Vec<usize>>> {
        rows.par_iter()
            .map(|r| self.neighbors(r.as_ref(), kmax))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy(seed: u64, n: usize, p: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..p)
                    .map(|j| rng.random_range(-1.0..1.0) * (j + 1) as f64)
                    .collect()
            })
            .collect();
        let y = rows
            .iter()
            .map(|r| r.iter().sum::<f64>() + rng.random::<f64>())
            .collect();
        (rows, y)
    }

    fn oracle(rows: &[Vec<f64>], y: &[f64], k: usize, q: &[f64]) -> f64 {
        let n = rows.len() as f64;
        let p = q.len();
        let mean: Vec<f64> = (0..p)
            .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n)
            .collect();
        let sd: Vec<f64> = (0..p)
            .map(|j| (rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt())
            .collect();
        let mut d: Vec<(f64, usize)> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let dist = (0..p).map(|j| ((r[j] - q[j]) / sd[j]).powi(2)).sum::<f64>();
                (dist, i)
            })
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d[..k].iter().map(|&(_, i)| y[i]).sum::<f64>() / k as f64
    }

    #[test]
    fn one_neighbor_recovers_training_target() {
        let (rows, y) = toy(1, 30, 3);
        let m = knn_fit(&rows, &y, 1).unwrap();
        for (r, t) in rows.iter().zip(&y) {
            assert_eq!(m.predict(r).unwrap(), *t);
        }
    }

    #[test]
    fn k_equals_n_gives_global_mean() {
        let (rows, y) = toy(2, 25, 4);
        let m = knn_fit(&rows, &y, 25).unwrap();
        let mean = y.iter().sum::<f64>() / 25.0;
        assert!((m.predict(&[9.0, 9.0, 9.0, 9.0]).unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn matches_exhaustive_scan() {
        for seed in 0..10 {
            let (rows, y) = toy(seed, 20, 3);
            let (queries, _) = toy(100 + seed, 15, 3);
            for k in [1, 2, 5, 20] {
                let m = knn_fit(&rows, &y, k).unwrap();
                for q in &queries {
                    let got = m.predict(q).unwrap();
                    let want = oracle(&rows, &y, k, q);
                    assert!(
                        (got - want).abs() < 1e-9,
                        "seed {seed} k {k}: {got} vs {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn ties_prefer_lower_index() {
        let rows = vec![vec![1.0], vec![-1.0], vec![1.0], vec![3.0]];
        let m = knn_fit(&rows, &[10.0, 20.0, 30.0, 40.0], 1).unwrap();
        assert_eq!(m.neighbors(&[0.0], 3).unwrap(), vec![0, 1, 2]);
        assert_eq!(m.predict(&[1.0]).unwrap(), 10.0);
    }

    #[test]
    fn neighbor_list_sweep_matches_refits() {
        let (rows, y) = toy(7, 60, 2);
        let (queries, _) = toy(8, 10, 2);
        let m = knn_fit(&rows, &y, 1).unwrap();
        let lists = m.neighbor_lists(&queries, 12).unwrap();
        for k in 1..=12 {
            let mk = m.clone().with_k(k).unwrap();
            for (q, nb) in queries.iter().zip(&lists) {
                assert_eq!(mk.predict(q).unwrap(), m.mean_target(nb, k));
            }
        }
    }

    #[test]
    fn invalid_inputs() {
        let (rows, y) = toy(3, 5, 2);
        assert!(knn_fit(&rows, &y, 6).is_err());
        assert!(knn_fit(&rows, &y, 0).is_err());
        assert!(knn_fit(&rows, &y[..4], 1).is_err());
        let m = knn_fit(&rows, &y, 2).unwrap();
        assert!(matches!(
            m.predict(&[0.0]),
            Err(EvalError::Dimension { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn column_scaling_is_absorbed(seed in any::<u64>(), col in 0usize..3, c in 0.5f64..4.0, k in 1usize..8) {
            // Powers of two keep the rescaling exact in floating point.
            let c = c.log2().round().exp2();
            let (mut rows, y) = toy(seed, 40, 3);
            let (mut queries, _) = toy(seed ^ 1, 10, 3);
            let before = knn_fit(&rows, &y, k).unwrap().predict_batch(&queries).unwrap();
            rows.iter_mut().for_each(|r| r[col] *= c);
            queries.iter_mut().for_each(|r| r[col] *= c);
            let after = knn_fit(&rows, &y, k).unwrap().predict_batch(&queries).unwrap();
            prop_assert_eq!(before, after);
        }
    }
}
