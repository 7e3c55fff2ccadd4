//! Boosting loop, prediction, objective and model persistence.

use std::cmp::Ordering;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matrix::FeatureMatrix;
use crate::objective::squared_loss_grad_hess;
use crate::tree::{presort, Grower, RegressionTree};
use crate::{GbError, Result};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Boosting rounds K.
    pub k_trees: usize,
    pub max_depth: usize,
    /// Shrinkage η applied to every tree.
    pub learning_rate: f64,
    /// L2 penalty λ on leaf weights.
    pub lambda_reg: f64,
    /// Per-leaf penalty γ.
    pub gamma_reg: f64,
    /// Minimum hessian sum in each child of a split.
    pub min_child_weight: f64,
    /// Fraction of rows drawn (without replacement) for each tree.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            k_trees: 100,
            max_depth: 6,
            learning_rate: 0.1,
            lambda_reg: 1.0,
            gamma_reg: 0.0,
            min_child_weight: 1.0,
            subsample: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GbError::Config(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!(
                "learning_rate must be in (0, 1], got {}",
                self.learning_rate
            ));
        }
        if !(self.lambda_reg.is_finite() && self.lambda_reg >= 0.0) {
            return bad(format!("lambda_reg must be >= 0, got {}", self.lambda_reg));
        }
        if !(self.gamma_reg.is_finite() && self.gamma_reg >= 0.0) {
            return bad(format!("gamma_reg must be >= 0, got {}", self.gamma_reg));
        }
        if !(self.min_child_weight.is_finite() && self.min_child_weight >= 0.0) {
            return bad(format!(
                "min_child_weight must be >= 0, got {}",
                self.min_child_weight
            ));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return bad(format!(
                "subsample must be in (0, 1], got {}",
                self.subsample
            ));
        }
        Ok(())
    }
}

/// A fitted ensemble: `base_score + learning_rate · Σ tree(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoosterModel {
    pub n_features: usize,
    pub base_score: f64,
    pub learning_rate: f64,
    pub config: TrainConfig,
    pub trees: Vec<RegressionTree>,
}

fn lexicographic(x: &FeatureMatrix, y: &[f64], a: usize, b: usize) -> Ordering {
    (0..x.n_features())
        .map(|f| x.get(a, f).total_cmp(&x.get(b, f)))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| y[a].total_cmp(&y[b]))
}

/// Fits a booster on rows of `x` with targets `y`.
///
/// Rows are first put into a canonical (lexicographic) order, so without
/// subsampling the model does not depend on the input row order.
pub fn fit(x: &FeatureMatrix, y: &[f64], cfg: &TrainConfig) -> Result<BoosterModel> {
    cfg.validate()?;
    if y.len() != x.n_rows() {
        return Err(GbError::Dimension {
            expected: x.n_rows(),
            got: y.len(),
        });
    }
    if y.is_empty() {
        return Err(GbError::Config("training set is empty".into()));
    }
    if let Some(row) = y.iter().position(|v| !v.is_finite()) {
        return Err(GbError::NonFiniteTarget { row });
    }

    let n = y.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lexicographic(x, y, a, b));
    let xc = x.select(&order);
    let yc: Vec<f64> = order.iter().map(|&i| y[i]).collect();

    let base_score = yc.iter().sum::<f64>() / n as f64;
    let all_rows: Vec<usize> = (0..n).collect();
    let presorted = if cfg.k_trees > 0 {
        presort(&xc, &all_rows)
    } else {
        Vec::new()
    };
    let mut pred = vec![base_score; n];
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_sub = ((n as f64 * cfg.subsample).ceil() as usize).clamp(1, n);
    let mut in_sample = vec![true; n];
    let mut trees = Vec::with_capacity(cfg.k_trees);

    for _ in 0..cfg.k_trees {
        for i in 0..n {
            let gh = squared_loss_grad_hess(yc[i], pred[i]);
            g[i] = gh.g;
            h[i] = gh.h;
        }
        let sorted = if n_sub < n {
            in_sample.iter_mut().for_each(|b| *b = false);
            for i in rand::seq::index::sample(&mut rng, n, n_sub) {
                in_sample[i] = true;
            }
            presorted
                .iter()
                .map(|col| {
                    col.iter()
                        .copied()
                        .filter(|&r| in_sample[r as usize])
                        .collect()
                })
                .collect()
        } else {
            presorted.clone()
        };
        let tree = Grower::new(&xc, &g, &h, cfg, sorted).build()?;
        for (i, p) in pred.iter_mut().enumerate() {
            *p += cfg.learning_rate * tree.predict_matrix_row(&xc, i);
        }
        trees.push(tree);
    }

    Ok(BoosterModel {
        n_features: x.n_features(),
        base_score,
        learning_rate: cfg.learning_rate,
        config: *cfg,
        trees,
    })
}

impl BoosterModel {
    fn check_row(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(GbError::Dimension {
                expected: self.n_features,
                got: x.len(),
            });
        }
        if let Some(feature) = x.iter().position(|v| !v.is_finite()) {
            return Err(GbError::NonFiniteFeature { row: 0, feature });
        }
        Ok(())
    }

    #[inline]
    fn predict_unchecked(&self, x: impl Fn(usize) -> f64 + Copy) -> f64 {
        let sum: f64 = self
            .trees
            .iter()
            .map(|t| match t.nodes[t.leaf_index(x)] {
                crate::tree::Node::Leaf { leaf_weight } => leaf_weight,
                crate::tree::Node::Split { .. } => {
                    unreachable!("leaf_index always stops at a leaf")
                }
            })
            .sum();
        self.base_score + self.learning_rate * sum
    }

    /// Predicted depth for one feature row.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check_row(x)?;
        Ok(self.predict_unchecked(|f| x[f]))
    }

    /// Predictions for every row of `x`, in row order.
    pub fn predict_matrix(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        if x.n_features() != self.n_features {
            return Err(GbError::Dimension {
                expected: self.n_features,
                got: x.n_features(),
            });
        }
        Ok((0..x.n_rows())
            .into_par_iter()
            .map(|r| self.predict_unchecked(|f| x.get(r, f)))
            .collect())
    }

    /// Regularization Σ_t (γ·T_t + ½λ·Σ_j w²).
    pub fn regularization(&self) -> f64 {
        let (lambda, gamma) = (self.config.lambda_reg, self.config.gamma_reg);
        self.trees
            .iter()
            .map(|t| {
                gamma * t.n_leaves() as f64
                    + 0.5 * lambda * t.leaf_weights().map(|w| w * w).sum::<f64>()
            })
            .sum()
    }

    /// Total objective J = Σ(y − ŷ)² + regularization.
    pub fn objective_value(&self, x: &FeatureMatrix, y: &[f64]) -> Result<f64> {
        if y.len() != x.n_rows() {
            return Err(GbError::Dimension {
                expected: x.n_rows(),
                got: y.len(),
            });
        }
        let pred = self.predict_matrix(x)?;
        let sse: f64 = pred.iter().zip(y).map(|(p, t)| (t - p) * (t - p)).sum();
        Ok(sse + self.regularization())
    }

    pub fn validate(&self) -> Result<()> {
        if !self.base_score.is_finite() || !(self.learning_rate > 0.0 && self.learning_rate <= 1.0)
        {
            return Err(GbError::Config(
                "base_score must be finite and learning_rate in (0, 1]".into(),
            ));
        }
        for (i, t) in self.trees.iter().enumerate() {
            t.validate(self.n_features, i)?;
            if t.depth() > self.config.max_depth {
                return Err(GbError::MalformedTree {
                    tree: i,
                    msg: format!(
                        "depth {} exceeds max_depth {}",
                        t.depth(),
                        self.config.max_depth
                    ),
                });
            }
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct ModelFileRef<'a> {
    schema_version: u32,
    n_features: usize,
    base_score: f64,
    learning_rate: f64,
    config: &'a TrainConfig,
    trees: &'a [RegressionTree],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    #[allow(dead_code)]
    schema_version: u32,
    n_features: usize,
    base_score: f64,
    learning_rate: f64,
    config: TrainConfig,
    trees: Vec<RegressionTree>,
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: u32,
}

/// Serializes the model as a JSON document.
pub fn model_to_json(model: &BoosterModel) -> Result<String> {
    let doc = ModelFileRef {
        schema_version: MODEL_SCHEMA_VERSION,
        n_features: model.n_features,
        base_score: model.base_score,
        learning_rate: model.learning_rate,
        config: &model.config,
        trees: &model.trees,
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

/// Parses and validates a JSON model document.
pub fn model_from_json(text: &str) -> Result<BoosterModel> {
    let probe: VersionProbe = serde_json::from_str(text)?;
    if probe.schema_version != MODEL_SCHEMA_VERSION {
        return Err(GbError::Schema {
            found: probe.schema_version,
            expected: MODEL_SCHEMA_VERSION,
        });
    }
    let doc: ModelFile = serde_json::from_str(text)?;
    let model = BoosterModel {
        n_features: doc.n_features,
        base_score: doc.base_score,
        learning_rate: doc.learning_rate,
        config: doc.config,
        trees: doc.trees,
    };
    model.validate()?;
    Ok(model)
}

pub fn save_model(model: &BoosterModel, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(model_to_json(model)?.as_bytes())?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<BoosterModel> {
    let mut text = String::new();
    std::io::Read::read_to_string(&mut BufReader::new(File::open(path)?), &mut text)?;
    model_from_json(&text)
}
