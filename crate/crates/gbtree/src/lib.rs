//! Regularized gradient-boosted regression trees.
//!
//! Squared loss `(y − ŷ)²` with gradient `2(ŷ − y)` and hessian `2`, closed-form
//! leaf weights `−G/(H + λ)`, a per-leaf penalty `γ`, and exact greedy split
//! search over presorted feature columns. Models serialize to JSON and
//! reload bit-exactly.

mod booster;
mod error;
mod matrix;
mod objective;
mod tree;

pub use booster::{
    fit, load_model, model_from_json, model_to_json, save_model, BoosterModel, TrainConfig,
    MODEL_SCHEMA_VERSION,
};
pub use error::{GbError, Result};
pub use matrix::FeatureMatrix;
pub use objective::{leaf_weight, split_gain, squared_loss_grad_hess, GradHessPair};
pub use tree::{find_best_split, grow_tree, Node, RegressionTree, Split};
