//! The TOML run configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tofmpi_core::dataset::DatasetConfig;
use tofmpi_gbtree::TrainConfig;
use tofmpi_scene::CornerScene;
use tofmpi_tpe::{validate_space, ParamSpec, Params, TpeConfig};

use crate::{CliError, Result};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Names of the booster hyperparameters a search space may tune.
pub const TUNABLE_BOOSTER_PARAMS: [&str; 7] = [
    "k_trees",
    "max_depth",
    "learning_rate",
    "lambda_reg",
    "gamma_reg",
    "min_child_weight",
    "subsample",
];

/// Default booster search space.
pub fn default_booster_space() -> Vec<ParamSpec> {
    let p = |r: tofmpi_tpe::Result<ParamSpec>| r.expect("static space is valid");
    vec![
        p(ParamSpec::int_uniform("k_trees", 100, 1000)),
        p(ParamSpec::int_uniform("max_depth", 3, 12)),
        p(ParamSpec::log_uniform("learning_rate", 0.01, 0.3)),
        p(ParamSpec::log_uniform("lambda_reg", 1e-3, 10.0)),
        p(ParamSpec::uniform("gamma_reg", 0.0, 5.0)),
        p(ParamSpec::log_uniform("min_child_weight", 1.0, 100.0)),
        p(ParamSpec::uniform("subsample", 0.5, 1.0)),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TuningConfig {
    /// Training rows used for tuning (taken from the shuffled training split).
    pub max_rows: usize,
    /// Share of the tuning rows held out to score each trial.
    pub validation_fraction: f64,
    pub space: Vec<ParamSpec>,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            max_rows: 20_000,
            validation_fraction: 0.2,
            space: default_booster_space(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KnnConfig {
    /// Upper bound of the tuned neighbour count.
    pub k_max: usize,
    /// Trials for tuning k.
    pub trials: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self {
            k_max: 50,
            trials: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Master seed; every random stream is derived from it.
    pub seed: u64,
    pub n_samples: usize,
    /// Share of the dataset used for training.
    pub train_fraction: f64,
    pub dataset: DatasetConfig,
    /// Base booster settings; tuned values override the searched fields.
    pub train: TrainConfig,
    pub tpe: TpeConfig,
    pub tuning: TuningConfig,
    pub knn: KnnConfig,
    pub scene: CornerScene,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            seed: 0,
            n_samples: 100_000,
            train_fraction: 0.8,
            dataset: DatasetConfig::default(),
            train: TrainConfig::default(),
            tpe: TpeConfig::default(),
            tuning: TuningConfig::default(),
            knn: KnnConfig::default(),
            scene: CornerScene::default(),
        }
    }
}

impl RunConfig {
    /// Parses a TOML document. `schema_version` is mandatory and unknown keys are rejected.
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        match table
            .get("schema_version")
            .and_then(toml::Value::as_integer)
        {
            Some(v) if v == CONFIG_SCHEMA_VERSION as i64 => {}
            Some(v) => {
                return Err(CliError::Config(format!(
                    "schema_version {v} is not supported (expected {CONFIG_SCHEMA_VERSION})"
                )))
            }
            None => {
                return Err(CliError::Config(
                    "missing integer key 'schema_version'".into(),
                ))
            }
        }
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// SHA-256 of the canonical TOML serialization.
    pub fn digest(&self) -> Result<String> {
        Ok(hex_digest(self.to_toml()?.as_bytes()))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(CliError::Config(m));
        if self.n_samples == 0 {
            return cfg("n_samples must be >= 1".into());
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return cfg(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            ));
        }
        self.dataset
            .validate()
            .map_err(|e| CliError::Config(format!("dataset: {e}")))?;
        self.train
            .validate()
            .map_err(|e| CliError::Config(format!("train: {e}")))?;
        self.tpe
            .validate()
            .map_err(|e| CliError::Config(format!("tpe: {e}")))?;
        self.scene
            .validate()
            .map_err(|e| CliError::Config(format!("scene: {e}")))?;
        validate_space(&self.tuning.space).map_err(|e| CliError::Config(format!("tuning: {e}")))?;
        for s in &self.tuning.space {
            if !TUNABLE_BOOSTER_PARAMS.contains(&s.name.as_str()) {
                return cfg(format!(
                    "tuning: '{}' is not a tunable booster parameter",
                    s.name
                ));
            }
        }
        if self.tuning.max_rows < 10 {
            return cfg("tuning.max_rows must be >= 10".into());
        }
        if !(self.tuning.validation_fraction > 0.0 && self.tuning.validation_fraction < 1.0) {
            return cfg("tuning.validation_fraction must lie in (0, 1)".into());
        }
        if self.knn.k_max < 2 || self.knn.trials < 1 {
            return cfg("knn.k_max must be >= 2 and knn.trials >= 1".into());
        }
        Ok(())
    }
}

/// Applies tuned values onto `base`; integer parameters are rounded.
pub fn apply_params(base: &TrainConfig, params: &Params) -> Result<TrainConfig> {
    let mut c = *base;
    for (name, &v) in params {
        match name.as_str() {
            "k_trees" => c.k_trees = v.round() as usize,
            "max_depth" => c.max_depth = v.round() as usize,
            "learning_rate" => c.learning_rate = v,
            "lambda_reg" => c.lambda_reg = v,
            "gamma_reg" => c.gamma_reg = v,
            "min_child_weight" => c.min_child_weight = v,
            "subsample" => c.subsample = v,
            other => {
                return Err(CliError::Config(format!(
                    "unknown booster parameter '{other}'"
                )))
            }
        }
    }
    c.validate()?;
    Ok(c)
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
