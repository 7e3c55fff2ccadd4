//! Pipeline stages shared by the subcommands and the end-to-end tests.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use tofmpi_core::dataset::{generate, split_train_test, DatasetMeta, LabeledSample, N_FEATURES};
use tofmpi_core::rng::derive_key;
use tofmpi_core::sensor::ApdSensor;
use tofmpi_evalkit::{
    comparison_report, error_stats, errors_mm, histogram, knn_fit, ErrorStats, Histogram, KnnModel,
    ModelEntry, ReportRow,
};
use tofmpi_gbtree::{fit, BoosterModel, FeatureMatrix, TrainConfig};
use tofmpi_scene::{
    correct_map, error_map, render_maps, seam_concentration, trace_corner, DepthMap, RenderedMaps,
    SeamStats,
};
use tofmpi_tpe::{optimize, OptimizeResult, ParamSpec, Params, TpeConfig};

use crate::config::{apply_params, RunConfig};
use crate::{CliError, Result};

/// Histogram bin width for depth errors (mm).
pub const HISTOGRAM_BIN_MM: f64 = 1.0;

/// Pixels on either side of the seam counted as the seam band.
pub const SEAM_RADIUS_PX: f64 = 5.0;
/// Share of columns, farthest from the seam, used as the reference band.
pub const OUTER_FRACTION: f64 = 0.25;

const TAG_DATASET: u64 = 1;
const TAG_SPLIT: u64 = 2;
const TAG_TUNE_SPLIT: u64 = 3;
const TAG_TUNE_BOOSTER: u64 = 4;
const TAG_TUNE_KNN: u64 = 5;
const TAG_TRAIN: u64 = 6;
const TAG_SCENE: u64 = 7;

/// Seeds of every stage, derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub dataset: u64,
    pub train: u64,
    pub scene: u64,
}

impl Seeds {
    pub fn from_master(seed: u64) -> Self {
        Self {
            dataset: derive_key(seed, &[TAG_DATASET]),
            train: derive_key(seed, &[TAG_TRAIN]),
            scene: derive_key(seed, &[TAG_SCENE]),
        }
    }
}

/// Seeds of the split and tuning streams, derived from the dataset's own seed
/// so that every command sees the same partition of a given file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetSeeds {
    pub split: u64,
    pub tune_split: u64,
    pub tune_booster: u64,
    pub tune_knn: u64,
}

impl DatasetSeeds {
    pub fn new(dataset_seed: u64) -> Self {
        Self {
            split: derive_key(dataset_seed, &[TAG_SPLIT]),
            tune_split: derive_key(dataset_seed, &[TAG_TUNE_SPLIT]),
            tune_booster: derive_key(dataset_seed, &[TAG_TUNE_BOOSTER]),
            tune_knn: derive_key(dataset_seed, &[TAG_TUNE_KNN]),
        }
    }
}

pub fn generate_dataset(
    cfg: &RunConfig,
    n: usize,
    seed: u64,
) -> Result<(Vec<LabeledSample>, DatasetMeta)> {
    Ok(generate(n, seed, &cfg.dataset)?)
}

/// Train/test partition of a dataset.
pub fn split(
    samples: &[LabeledSample],
    cfg: &RunConfig,
    dataset_seed: u64,
) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
    Ok(split_train_test(
        samples,
        cfg.train_fraction,
        DatasetSeeds::new(dataset_seed).split,
    )?)
}

pub fn feature_rows(samples: &[LabeledSample]) -> Vec<[f64; N_FEATURES]> {
    samples.iter().map(|s| s.features.to_array()).collect()
}

pub fn targets(samples: &[LabeledSample]) -> Vec<f64> {
    samples.iter().map(|s| s.target).collect()
}

pub fn matrix(samples: &[LabeledSample]) -> Result<FeatureMatrix> {
    Ok(FeatureMatrix::from_rows(&feature_rows(samples))?)
}

/// The capped tuning subset of `train`, split into fitting and validation parts.
pub fn tuning_split(
    train: &[LabeledSample],
    cfg: &RunConfig,
    dataset_seed: u64,
) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
    // The training split is already in random order, so a prefix is a random subset.
    let capped = &train[..train.len().min(cfg.tuning.max_rows)];
    if capped.len() < 2 {
        return Err(CliError::Input(
            "need at least 2 training rows to tune".into(),
        ));
    }
    Ok(split_train_test(
        capped,
        1.0 - cfg.tuning.validation_fraction,
        DatasetSeeds::new(dataset_seed).tune_split,
    )?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoosterTuning {
    pub best_config: TrainConfig,
    pub best_loss: f64,
    pub space: Vec<ParamSpec>,
    pub tpe: TpeConfig,
    pub n_fit_rows: usize,
    pub n_validation_rows: usize,
    pub history: Vec<tofmpi_tpe::Trial>,
}

/// Tunes the booster by minimizing the validation objective (squared error
/// plus the model's regularization) on the tuning split.
pub fn tune_booster(
    train: &[LabeledSample],
    cfg: &RunConfig,
    dataset_seed: u64,
) -> Result<BoosterTuning> {
    let seeds = DatasetSeeds::new(dataset_seed);
    let (fit_rows, val_rows) = tuning_split(train, cfg, dataset_seed)?;
    let (xf, yf) = (matrix(&fit_rows)?, targets(&fit_rows));
    let (xv, yv) = (matrix(&val_rows)?, targets(&val_rows));
    let tpe = TpeConfig {
        seed: seeds.tune_booster,
        ..cfg.tpe.clone()
    };
    let base = TrainConfig {
        seed: seeds.tune_booster,
        ..cfg.train
    };
    let objective = |p: &Params| -> Result<f64> {
        let tc = apply_params(&base, p)?;
        let model = fit(&xf, &yf, &tc)?;
        Ok(model.objective_value(&xv, &yv)?)
    };
    let OptimizeResult {
        best_params,
        best_loss,
        history,
    } = optimize(objective, &cfg.tuning.space, &tpe)?;
    Ok(BoosterTuning {
        best_config: apply_params(&cfg.train, &best_params)?,
        best_loss,
        space: cfg.tuning.space.clone(),
        tpe,
        n_fit_rows: fit_rows.len(),
        n_validation_rows: val_rows.len(),
        history,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnTuning {
    pub k: usize,
    pub best_loss: f64,
    pub space: Vec<ParamSpec>,
    pub history: Vec<tofmpi_tpe::Trial>,
}

/// Tunes the KNN neighbour count on the same tuning split (validation MSE, m²).
pub fn tune_knn(train: &[LabeledSample], cfg: &RunConfig, dataset_seed: u64) -> Result<KnnTuning> {
    let (fit_rows, val_rows) = tuning_split(train, cfg, dataset_seed)?;
    let k_max = cfg.knn.k_max.min(fit_rows.len());
    let model = knn_fit(&feature_rows(&fit_rows), &targets(&fit_rows), 1)?;
    let lists = model.neighbor_lists(&feature_rows(&val_rows), k_max)?;
    let yv = targets(&val_rows);
    let space = vec![ParamSpec::int_uniform("k", 1, k_max as i64)?];
    let n_startup = cfg.tpe.n_startup.min(cfg.knn.trials.saturating_sub(1));
    let tpe = TpeConfig {
        mu_th: cfg.knn.trials,
        n_startup,
        seed: DatasetSeeds::new(dataset_seed).tune_knn,
        ..cfg.tpe.clone()
    };
    let objective = |p: &Params| -> Result<f64> {
        let k = p["k"] as usize;
        let sse: f64 = lists
            .iter()
            .zip(&yv)
            .map(|(nb, y)| (model.mean_target(nb, k) - y).powi(2))
            .sum();
        Ok(sse / yv.len() as f64)
    };
    let r = optimize(objective, &space, &tpe)?;
    Ok(KnnTuning {
        k: r.best_params["k"] as usize,
        best_loss: r.best_loss,
        space,
        history: r.history,
    })
}

/// Fits the booster on the full training split; returns the model and wall time (s).
pub fn train_booster(
    train: &[LabeledSample],
    tc: &TrainConfig,
    seed: u64,
) -> Result<(BoosterModel, f64)> {
    let (x, y) = (matrix(train)?, targets(train));
    let tc = TrainConfig { seed, ..*tc };
    let t0 = Instant::now();
    let model = fit(&x, &y, &tc)?;
    Ok((model, t0.elapsed().as_secs_f64()))
}

pub fn train_knn(train: &[LabeledSample], k: usize) -> Result<(KnnModel, f64)> {
    let t0 = Instant::now();
    let model = knn_fit(&feature_rows(train), &targets(train), k)?;
    Ok((model, t0.elapsed().as_secs_f64()))
}

/// Uncorrected depth: the highest-frequency measurement.
pub fn raw_depth(x: &[f64]) -> f64 {
    x[3]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub report: Vec<ReportRow>,
    pub raw_test: ErrorStats,
    pub booster_train: ErrorStats,
    pub booster_test: ErrorStats,
    pub raw_histogram: Histogram,
    pub corrected_histogram: Histogram,
}

/// Scores raw depth, the booster and (optionally) KNN on both splits.
pub fn evaluate(
    booster: &BoosterModel,
    booster_time_s: f64,
    knn: Option<(&KnnModel, f64)>,
    train: &[LabeledSample],
    test: &[LabeledSample],
) -> Result<Evaluation> {
    let (xtr, ytr) = (feature_rows(train), targets(train));
    let (xte, yte) = (feature_rows(test), targets(test));
    let ptr = booster.predict_matrix(&FeatureMatrix::from_rows(&xtr)?)?;
    let pte = booster.predict_matrix(&FeatureMatrix::from_rows(&xte)?)?;
    let raw_te: Vec<f64> = xte.iter().map(|x| raw_depth(x)).collect();

    let booster_pred = |x: &[f64]| booster.predict(x).unwrap_or(f64::NAN);
    let raw_pred = raw_depth;
    let mut models = vec![
        ModelEntry {
            name: "raw".into(),
            predictor: &raw_pred,
            train_time_s: 0.0,
        },
        ModelEntry {
            name: "booster".into(),
            predictor: &booster_pred,
            train_time_s: booster_time_s,
        },
    ];
    if let Some((m, t)) = knn {
        models.push(ModelEntry {
            name: format!("knn(k={})", m.k()),
            predictor: m,
            train_time_s: t,
        });
    }
    let report = comparison_report(&models, (&xtr, &ytr), (&xte, &yte))?;
    Ok(Evaluation {
        report,
        raw_test: error_stats(&raw_te, &yte)?,
        booster_train: error_stats(&ptr, &ytr)?,
        booster_test: error_stats(&pte, &yte)?,
        raw_histogram: histogram(&errors_mm(&raw_te, &yte)?, HISTOGRAM_BIN_MM)?,
        corrected_histogram: histogram(&errors_mm(&pte, &yte)?, HISTOGRAM_BIN_MM)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneRun {
    pub maps: RenderedMaps,
    pub raw_error: DepthMap,
    pub corrected: Option<DepthMap>,
    pub corrected_error: Option<DepthMap>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMetrics {
    pub raw_mae_mm: f64,
    pub corrected_mae_mm: Option<f64>,
    pub raw_seam_mae_mm: f64,
    pub raw_outer_mae_mm: f64,
    pub corrected_seam_mae_mm: Option<f64>,
    pub valid_pixels: usize,
}

impl SceneRun {
    pub fn metrics(&self) -> SceneMetrics {
        let raw = self.seam_stats();
        let corr = self
            .corrected_error
            .as_ref()
            .map(|e| seam_concentration(e, SEAM_RADIUS_PX, OUTER_FRACTION));
        SceneMetrics {
            raw_mae_mm: self.raw_error.mean_abs(),
            corrected_mae_mm: self.corrected_error.as_ref().map(DepthMap::mean_abs),
            raw_seam_mae_mm: raw.seam_mean_abs,
            raw_outer_mae_mm: raw.outer_mean_abs,
            corrected_seam_mae_mm: corr.map(|s| s.seam_mean_abs),
            valid_pixels: self.raw_error.valid_count(),
        }
    }

    pub fn seam_stats(&self) -> SeamStats {
        seam_concentration(&self.raw_error, SEAM_RADIUS_PX, OUTER_FRACTION)
    }
}

/// Renders the configured corner scene and, given a model, its corrected maps.
///
/// `noise` overrides the dataset's noise toggles when set.
pub fn render_scene(
    cfg: &RunConfig,
    seed: u64,
    model: Option<&BoosterModel>,
    toggles: Option<tofmpi_core::sensor::NoiseToggles>,
) -> Result<SceneRun> {
    let grid = trace_corner(&cfg.scene)?;
    let channels = cfg.dataset.channels()?;
    let sensor = ApdSensor::new(cfg.dataset.params, toggles.unwrap_or(cfg.dataset.toggles))?;
    let maps = render_maps(&grid, &channels, &sensor, cfg.dataset.mode, seed)?;
    let raw_error = error_map(maps.raw_highest(), &maps.truth)?;
    let corrected = model.map(|m| correct_map(m, &maps)).transpose()?;
    let corrected_error = corrected
        .as_ref()
        .map(|c| error_map(c, &maps.truth))
        .transpose()?;
    Ok(SceneRun {
        maps,
        raw_error,
        corrected,
        corrected_error,
    })
}
