//! Regression trees and exact greedy growth.
//!
//! Rows of a node occupy the same contiguous segment in every per-feature
//! sorted index list, so a split scan is a single pass per feature and a
//! split is applied by stable partitioning of each list.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::booster::TrainConfig;
use crate::matrix::FeatureMatrix;
use crate::objective::{leaf_weight, split_gain};
use crate::{GbError, Result};

/// Segments at least this long scan their features in parallel.
const PARALLEL_SEGMENT: usize = 1 << 14;

/// Relative gain difference below which two candidates count as tied.
const TIE_TOLERANCE: f64 = 1e-12;

#[inline]
fn beats(gain: f64, best: f64) -> bool {
    gain > best + TIE_TOLERANCE * best.abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf_weight: f64,
    },
}

/// Binary tree stored in preorder; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn leaf(weight: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf {
                leaf_weight: weight,
            }],
        }
    }

    /// Index of the leaf reached by `x`.
    #[inline]
    pub fn leaf_index(&self, x: impl Fn(usize) -> f64) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x(feature) < threshold { left } else { right },
                Node::Leaf { .. } => return i,
            }
        }
    }

    /// Leaf weight reached by `x` (unshrunk).
    #[inline]
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(|f| x[f])] {
            Node::Leaf { leaf_weight } => leaf_weight,
            Node::Split { .. } => unreachable!("leaf_index always stops at a leaf"),
        }
    }

    pub(crate) fn predict_matrix_row(&self, x: &FeatureMatrix, row: usize) -> f64 {
        match self.nodes[self.leaf_index(|f| x.get(row, f))] {
            Node::Leaf { leaf_weight } => leaf_weight,
            Node::Split { .. } => unreachable!("leaf_index always stops at a leaf"),
        }
    }

    pub fn leaf_weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { leaf_weight } => Some(*leaf_weight),
            Node::Split { .. } => None,
        })
    }

    /// Leaf count T.
    pub fn n_leaves(&self) -> usize {
        self.leaf_weights().count()
    }

    /// Number of split levels on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }

    /// Checks that the nodes form one well-formed preorder binary tree.
    pub fn validate(&self, n_features: usize, tree: usize) -> Result<()> {
        let bad = |msg: String| GbError::MalformedTree { tree, msg };
        if self.nodes.is_empty() {
            return Err(bad("tree has no nodes".into()));
        }
        let mut parents = vec![0usize; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            match *node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= n_features {
                        return Err(bad(format!(
                            "node {i} splits on feature {feature} of {n_features}"
                        )));
                    }
                    if !threshold.is_finite() {
                        return Err(bad(format!("node {i} has a non-finite threshold")));
                    }
                    for child in [left, right] {
                        if child <= i || child >= self.nodes.len() {
                            return Err(bad(format!("node {i} has invalid child index {child}")));
                        }
                        parents[child] += 1;
                    }
                }
                Node::Leaf { leaf_weight } => {
                    if !leaf_weight.is_finite() {
                        return Err(bad(format!("leaf {i} has a non-finite weight")));
                    }
                }
            }
        }
        if let Some(i) = (1..self.nodes.len()).find(|&i| parents[i] != 1) {
            return Err(bad(format!("node {i} is referenced {} times", parents[i])));
        }
        Ok(())
    }
}

/// Chosen split of a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    /// Last position (within the segment) that goes left.
    pos: usize,
    gain: f64,
}

/// Midpoint between two distinct sorted values that still separates them.
#[inline]
fn midpoint(a: f64, b: f64) -> f64 {
    let mid = a + (b - a) / 2.0;
    if mid > a && mid <= b {
        mid
    } else {
        b
    }
}

/// Row indices of `x` sorted by each feature, ties by row index.
pub(crate) fn presort(x: &FeatureMatrix, rows: &[usize]) -> Vec<Vec<u32>> {
    (0..x.n_features())
        .map(|f| {
            let col = x.column(f);
            let mut idx: Vec<u32> = rows.iter().map(|&r| r as u32).collect();
            idx.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            idx
        })
        .collect()
}

pub(crate) struct Grower<'a> {
    x: &'a FeatureMatrix,
    g: &'a [f64],
    h: &'a [f64],
    cfg: &'a TrainConfig,
    sorted: Vec<Vec<u32>>,
    goes_left: Vec<bool>,
    buf: Vec<u32>,
    nodes: Vec<Node>,
}

impl<'a> Grower<'a> {
    pub(crate) fn new(
        x: &'a FeatureMatrix,
        g: &'a [f64],
        h: &'a [f64],
        cfg: &'a TrainConfig,
        sorted: Vec<Vec<u32>>,
    ) -> Self {
        Self {
            x,
            g,
            h,
            cfg,
            sorted,
            goes_left: vec![false; x.n_rows()],
            buf: Vec::new(),
            nodes: Vec::new(),
        }
    }

    fn totals(&self, lo: usize, hi: usize) -> (f64, f64) {
        self.sorted[0][lo..hi]
            .iter()
            .fold((0.0, 0.0), |(gs, hs), &r| {
                (gs + self.g[r as usize], hs + self.h[r as usize])
            })
    }

    fn scan_feature(
        &self,
        f: usize,
        lo: usize,
        hi: usize,
        g_tot: f64,
        h_tot: f64,
    ) -> Option<Candidate> {
        let idx = &self.sorted[f][lo..hi];
        let col = self.x.column(f);
        let (lambda, gamma, mcw) = (
            self.cfg.lambda_reg,
            self.cfg.gamma_reg,
            self.cfg.min_child_weight,
        );
        let mut best: Option<Candidate> = None;
        let (mut gl, mut hl) = (0.0, 0.0);
        for p in 0..idx.len() - 1 {
            let r = idx[p] as usize;
            gl += self.g[r];
            hl += self.h[r];
            if col[r] == col[idx[p + 1] as usize] {
                continue;
            }
            let hr = h_tot - hl;
            if hl < mcw || hr < mcw {
                continue;
            }
            let gain = split_gain(gl, hl, g_tot - gl, hr, lambda, gamma);
            if best.is_none_or(|b| beats(gain, b.gain)) {
                best = Some(Candidate {
                    feature: f,
                    pos: p,
                    gain,
                });
            }
        }
        best
    }

    fn best_split(&self, lo: usize, hi: usize, g_tot: f64, h_tot: f64) -> Option<Candidate> {
        let n_features = self.x.n_features();
        let per_feature: Vec<Option<Candidate>> = if hi - lo >= PARALLEL_SEGMENT && n_features > 1 {
            (0..n_features)
                .into_par_iter()
                .map(|f| self.scan_feature(f, lo, hi, g_tot, h_tot))
                .collect()
        } else {
            (0..n_features)
                .map(|f| self.scan_feature(f, lo, hi, g_tot, h_tot))
                .collect()
        };
        let mut best: Option<Candidate> = None;
        for c in per_feature.into_iter().flatten() {
            if best.is_none_or(|b| beats(c.gain, b.gain)) {
                best = Some(c);
            }
        }
        best.filter(|c| c.gain > 0.0)
    }

    fn threshold(&self, c: &Candidate, lo: usize) -> f64 {
        let idx = &self.sorted[c.feature];
        let col = self.x.column(c.feature);
        midpoint(
            col[idx[lo + c.pos] as usize],
            col[idx[lo + c.pos + 1] as usize],
        )
    }

    fn partition(&mut self, split_feature: usize, lo: usize, mid: usize, hi: usize) {
        for &r in &self.sorted[split_feature][lo..mid] {
            self.goes_left[r as usize] = true;
        }
        for &r in &self.sorted[split_feature][mid..hi] {
            self.goes_left[r as usize] = false;
        }
        for f in 0..self.sorted.len() {
            if f == split_feature {
                continue;
            }
            let seg = &mut self.sorted[f][lo..hi];
            self.buf.clear();
            let mut w = 0;
            for i in 0..seg.len() {
                let r = seg[i];
                if self.goes_left[r as usize] {
                    seg[w] = r;
                    w += 1;
                } else {
                    self.buf.push(r);
                }
            }
            seg[w..].copy_from_slice(&self.buf);
        }
    }

    fn grow(&mut self, lo: usize, hi: usize, depth: usize) -> Result<usize> {
        let (g_tot, h_tot) = self.totals(lo, hi);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { leaf_weight: 0.0 });
        if depth < self.cfg.max_depth && hi - lo >= 2 {
            if let Some(c) = self.best_split(lo, hi, g_tot, h_tot) {
                let threshold = self.threshold(&c, lo);
                let mid = lo + c.pos + 1;
                self.partition(c.feature, lo, mid, hi);
                let left = self.grow(lo, mid, depth + 1)?;
                let right = self.grow(mid, hi, depth + 1)?;
                self.nodes[id] = Node::Split {
                    feature: c.feature,
                    threshold,
                    left,
                    right,
                };
                return Ok(id);
            }
        }
        self.nodes[id] = Node::Leaf {
            leaf_weight: leaf_weight(g_tot, h_tot, self.cfg.lambda_reg)?,
        };
        Ok(id)
    }

    pub(crate) fn build(mut self) -> Result<RegressionTree> {
        let n = self.sorted.first().map_or(0, Vec::len);
        if n == 0 {
            return Err(GbError::Config("cannot grow a tree on zero rows".into()));
        }
        self.grow(0, n, 0)?;
        Ok(RegressionTree { nodes: self.nodes })
    }
}

fn check_inputs(x: &FeatureMatrix, rows: &[usize], g: &[f64], h: &[f64]) -> Result<()> {
    if g.len() != x.n_rows() || h.len() != x.n_rows() {
        return Err(GbError::Dimension {
            expected: x.n_rows(),
            got: g.len().min(h.len()),
        });
    }
    if let Some(&r) = rows.iter().find(|&&r| r >= x.n_rows()) {
        return Err(GbError::Config(format!("row index {r} out of range")));
    }
    Ok(())
}

/// Best exact-greedy split of `rows`, or `None` when no split has positive
/// gain with both children meeting `min_child_weight`.
///
/// Ties are broken towards the lower feature index, then the lower threshold.
pub fn find_best_split(
    x: &FeatureMatrix,
    rows: &[usize],
    g: &[f64],
    h: &[f64],
    cfg: &TrainConfig,
) -> Result<Option<Split>> {
    check_inputs(x, rows, g, h)?;
    if rows.len() < 2 {
        return Ok(None);
    }
    let grower = Grower::new(x, g, h, cfg, presort(x, rows));
    let (g_tot, h_tot) = grower.totals(0, rows.len());
    Ok(grower
        .best_split(0, rows.len(), g_tot, h_tot)
        .map(|c| Split {
            feature: c.feature,
            threshold: grower.threshold(&c, 0),
            gain: c.gain,
        }))
}

/// Greedily grows one tree on `rows`.
pub fn grow_tree(
    x: &FeatureMatrix,
    rows: &[usize],
    g: &[f64],
    h: &[f64],
    cfg: &TrainConfig,
) -> Result<RegressionTree> {
    check_inputs(x, rows, g, h)?;
    Grower::new(x, g, h, cfg, presort(x, rows)).build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::squared_loss_grad_hess;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(max_depth: usize, lambda: f64, gamma: f64) -> TrainConfig {
        TrainConfig {
            max_depth,
            lambda_reg: lambda,
            gamma_reg: gamma,
            min_child_weight: 0.0,
            ..TrainConfig::default()
        }
    }

    fn grads(y: &[f64], yhat: f64) -> (Vec<f64>, Vec<f64>) {
        y.iter()
            .map(|&t| squared_loss_grad_hess(t, yhat))
            .map(|p| (p.g, p.h))
            .unzip()
    }

    /// Σ(r − w)² + ½λw² at the optimal w for residuals r.
    fn sse_objective(r: &[f64], lambda: f64) -> f64 {
        let s: f64 = r.iter().sum();
        let w = s / (r.len() as f64 + lambda / 2.0);
        r.iter().map(|v| (v - w) * (v - w)).sum::<f64>() + 0.5 * lambda * w * w
    }

    /// Exhaustive enumeration of every (feature, midpoint) candidate.
    fn brute_force(
        x: &FeatureMatrix,
        rows: &[usize],
        y: &[f64],
        yhat: f64,
        c: &TrainConfig,
    ) -> Option<Split> {
        let r: Vec<f64> = rows.iter().map(|&i| y[i] - yhat).collect();
        let parent = sse_objective(&r, c.lambda_reg);
        let mut best: Option<Split> = None;
        for f in 0..x.n_features() {
            let mut vals: Vec<f64> = rows.iter().map(|&i| x.get(i, f)).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let thr = midpoint(w[0], w[1]);
                let (l, rr): (Vec<usize>, Vec<usize>) =
                    (0..rows.len()).partition(|&k| x.get(rows[k], f) < thr);
                let hl = 2.0 * l.len() as f64;
                let hr = 2.0 * rr.len() as f64;
                if hl < c.min_child_weight || hr < c.min_child_weight {
                    continue;
                }
                let rl: Vec<f64> = l.iter().map(|&k| r[k]).collect();
                let rr: Vec<f64> = rr.iter().map(|&k| r[k]).collect();
                let gain = parent
                    - sse_objective(&rl, c.lambda_reg)
                    - sse_objective(&rr, c.lambda_reg)
                    - c.gamma_reg;
                if best.is_none_or(|b| beats(gain, b.gain)) {
                    best = Some(Split {
                        feature: f,
                        threshold: thr,
                        gain,
                    });
                }
            }
        }
        best.filter(|b| b.gain > 0.0)
    }

    #[test]
    fn identical_rows_have_no_split() {
        let x = FeatureMatrix::from_rows(&[[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]]).unwrap();
        let (g, h) = grads(&[0.0, 1.0, 5.0], 0.0);
        assert_eq!(
            find_best_split(&x, &[0, 1, 2], &g, &h, &cfg(3, 0.0, 0.0)).unwrap(),
            None
        );
    }

    #[test]
    fn step_data_splits_at_midpoint() {
        let x = FeatureMatrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let (g, h) = grads(&[0.0, 10.0], 5.0);
        let s = find_best_split(&x, &[0, 1], &g, &h, &cfg(1, 0.0, 0.0))
            .unwrap()
            .unwrap();
        assert_eq!((s.feature, s.threshold), (0, 0.5));
        // ½[10²/2 + 10²/2 − 0] = 50.
        assert_eq!(s.gain, 50.0);
    }

    #[test]
    fn min_child_weight_blocks_splits() {
        let x = FeatureMatrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let (g, h) = grads(&[0.0, 0.0, 9.0], 3.0);
        let c = TrainConfig {
            min_child_weight: 4.0,
            ..cfg(2, 0.0, 0.0)
        };
        let s = find_best_split(&x, &[0, 1, 2], &g, &h, &c).unwrap();
        assert_eq!(s, None);
    }

    #[test]
    fn ties_prefer_lower_feature() {
        let x = FeatureMatrix::from_rows(&[[0.0, 0.0], [1.0, 1.0]]).unwrap();
        let (g, h) = grads(&[0.0, 1.0], 0.5);
        let s = find_best_split(&x, &[0, 1], &g, &h, &cfg(1, 0.0, 0.0))
            .unwrap()
            .unwrap();
        assert_eq!(s.feature, 0);
    }

    #[test]
    fn matches_exhaustive_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..40 {
            let n = rng.random_range(2..=64);
            let rows: Vec<[f64; 8]> = (0..n)
                .map(|_| std::array::from_fn(|_| (rng.random::<f64>() * 20.0).round() / 4.0))
                .collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 3.0).collect();
            let x = FeatureMatrix::from_rows(&rows).unwrap();
            let c = TrainConfig {
                min_child_weight: [0.0, 1.0, 6.0][trial % 3],
                ..cfg(4, [0.0, 1.0, 3.5][trial % 3], [0.0, 0.01][trial % 2])
            };
            let yhat = y.iter().sum::<f64>() / n as f64;
            let (g, h) = grads(&y, yhat);
            let all: Vec<usize> = (0..n).collect();
            let got = find_best_split(&x, &all, &g, &h, &c).unwrap();
            let want = brute_force(&x, &all, &y, yhat, &c);
            match (got, want) {
                (None, None) => {}
                (Some(a), Some(b)) => {
                    assert_eq!(
                        (a.feature, a.threshold),
                        (b.feature, b.threshold),
                        "trial {trial}"
                    );
                    assert!(
                        (a.gain - b.gain).abs() < 1e-9,
                        "trial {trial}: {} vs {}",
                        a.gain,
                        b.gain
                    );
                }
                other => panic!("trial {trial}: {other:?}"),
            }
        }
    }

    #[test]
    fn constant_residuals_give_single_zero_leaf() {
        let x = FeatureMatrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let (g, h) = grads(&[4.0, 4.0, 4.0], 4.0);
        let t = grow_tree(&x, &[0, 1, 2], &g, &h, &cfg(4, 1.0, 0.0)).unwrap();
        assert_eq!(t.nodes, vec![Node::Leaf { leaf_weight: 0.0 }]);
    }

    #[test]
    fn depth_zero_is_one_leaf() {
        let x = FeatureMatrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        let (g, h) = grads(&[1.0, 2.0, 6.0], 0.0);
        let t = grow_tree(&x, &[0, 1, 2], &g, &h, &cfg(0, 2.0, 0.0)).unwrap();
        // −(−18)/(6 + 2).
        assert_eq!(t.nodes, vec![Node::Leaf { leaf_weight: 2.25 }]);
    }

    #[test]
    fn stump_on_step_data() {
        let x = FeatureMatrix::from_rows(&[[0.0], [0.0], [1.0], [1.0]]).unwrap();
        let (g, h) = grads(&[0.0, 0.0, 10.0, 10.0], 5.0);
        let t = grow_tree(&x, &[0, 1, 2, 3], &g, &h, &cfg(1, 0.0, 0.0)).unwrap();
        assert_eq!(t.depth(), 1);
        assert_eq!(t.predict_row(&[0.2]), -5.0);
        assert_eq!(t.predict_row(&[0.7]), 5.0);
        assert_eq!(t.n_leaves(), 2);
        t.validate(1, 0).unwrap();
    }

    #[test]
    fn validation_catches_malformed_trees() {
        let cyc = RegressionTree {
            nodes: vec![Node::Split {
                feature: 0,
                threshold: 1.0,
                left: 0,
                right: 0,
            }],
        };
        assert!(cyc.validate(1, 3).is_err());
        let shared = RegressionTree {
            nodes: vec![
                Node::Split {
                    feature: 0,
                    threshold: 1.0,
                    left: 1,
                    right: 1,
                },
                Node::Leaf { leaf_weight: 0.0 },
            ],
        };
        assert!(shared.validate(1, 0).is_err());
        let wide = RegressionTree {
            nodes: vec![
                Node::Split {
                    feature: 5,
                    threshold: 1.0,
                    left: 1,
                    right: 2,
                },
                Node::Leaf { leaf_weight: 0.0 },
                Node::Leaf { leaf_weight: 0.0 },
            ],
        };
        assert!(matches!(
            wide.validate(2, 0),
            Err(GbError::MalformedTree { tree: 0, .. })
        ));
        assert!(RegressionTree { nodes: vec![] }.validate(2, 0).is_err());
    }

    #[test]
    fn midpoint_guard() {
        assert_eq!(midpoint(1.0, 2.0), 1.5);
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let m = midpoint(a, b);
        assert!(a < m && m <= b);
    }
}
