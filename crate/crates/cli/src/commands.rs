//! Subcommand implementations. Each writes its outputs plus a manifest into `out`.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use tofmpi_core::dataset::{meta_path, read_csv, read_meta, write_csv, LabeledSample};
use tofmpi_core::sensor::GenerationMode;
use tofmpi_evalkit::{format_report_text, write_report_csv, ReportRow};
use tofmpi_gbtree::{load_model, save_model, BoosterModel, TrainConfig};
use tofmpi_scene::{write_csv_grid, write_pfm, write_pgm_mask, DepthMap};
use tofmpi_tpe::write_history_csv;

use crate::config::RunConfig;
use crate::manifest::write_manifest;
use crate::pipeline::{self, Seeds};
use crate::{CliError, Result};

pub const DATASET_FILE: &str = "dataset.csv";
pub const MODEL_FILE: &str = "model.json";

/// Options shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct Common {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub mode: Option<GenerationMode>,
}

impl Common {
    /// Loads and validates the effective configuration before any work starts.
    pub fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = self.mode {
            cfg.dataset.mode = m;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn out_dir(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.out).map_err(|e| CliError::io(&self.out, e))?;
        Ok(&self.out)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")
        .map_err(|e| CliError::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| CliError::io(path, e))?,
    ))
}

fn require(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Input(format!(
            "{} does not exist",
            path.display()
        )))
    }
}

/// A dataset file with its sidecar, split the same way by every command.
struct LoadedDataset {
    seed: u64,
    train: Vec<LabeledSample>,
    test: Vec<LabeledSample>,
}

fn load_dataset(cfg: &RunConfig, path: &Path) -> Result<LoadedDataset> {
    require(path)?;
    let meta = read_meta(&meta_path(path))?;
    let samples = read_csv(path)?;
    if samples.len() != meta.n_samples {
        return Err(CliError::Input(format!(
            "{} has {} rows but its metadata records {}",
            path.display(),
            samples.len(),
            meta.n_samples
        )));
    }
    let (train, test) = pipeline::split(&samples, cfg, meta.seed)?;
    Ok(LoadedDataset {
        seed: meta.seed,
        train,
        test,
    })
}

pub fn cmd_generate(common: &Common, n: Option<usize>) -> Result<PathBuf> {
    let cfg = common.load()?;
    let n = n.unwrap_or(cfg.n_samples);
    if n == 0 {
        return Err(CliError::Config("--n must be >= 1".into()));
    }
    let out = common.out_dir()?;
    let (samples, meta) =
        pipeline::generate_dataset(&cfg, n, Seeds::from_master(cfg.seed).dataset)?;
    let path = out.join(DATASET_FILE);
    write_csv(&samples, &meta, &path)?;
    let meta_name = meta_path(&path)
        .file_name()
        .unwrap()
        .to_string_lossy()
        .into_owned();
    write_manifest(
        out,
        "generate",
        &cfg,
        &[],
        &[DATASET_FILE.into(), meta_name],
    )?;
    Ok(path)
}

/// Tuned hyperparameters handed from `tune` to `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BestParams {
    pub booster: TrainConfig,
    pub booster_validation_objective: f64,
    pub knn_k: usize,
    pub knn_validation_mse_m2: f64,
}

pub fn cmd_tune(common: &Common, dataset: &Path) -> Result<BestParams> {
    let cfg = common.load()?;
    let data = load_dataset(&cfg, dataset)?;
    let out = common.out_dir()?;
    let booster = pipeline::tune_booster(&data.train, &cfg, data.seed)?;
    let knn = pipeline::tune_knn(&data.train, &cfg, data.seed)?;
    let best = BestParams {
        booster: booster.best_config,
        booster_validation_objective: booster.best_loss,
        knn_k: knn.k,
        knn_validation_mse_m2: knn.best_loss,
    };
    write_json(&out.join("best_params.json"), &best)?;
    write_json(&out.join("tuning.json"), &booster)?;
    write_history_csv(
        create(&out.join("tpe_history.csv"))?,
        &booster.history,
        &booster.space,
    )?;
    write_history_csv(
        create(&out.join("knn_history.csv"))?,
        &knn.history,
        &knn.space,
    )?;
    let outputs = [
        "best_params.json",
        "tuning.json",
        "tpe_history.csv",
        "knn_history.csv",
    ]
    .map(String::from);
    write_manifest(out, "tune", &cfg, &[dataset], &outputs)?;
    Ok(best)
}

/// Wall-clock figures are the only non-reproducible bytes a run writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub n_train: usize,
    pub booster: TrainConfig,
    pub knn_k: usize,
    pub booster_train_time_s: f64,
    pub knn_train_time_s: f64,
}

pub fn cmd_train(common: &Common, dataset: &Path, params: Option<&Path>) -> Result<BoosterModel> {
    let cfg = common.load()?;
    let best: Option<BestParams> = params.map(read_json).transpose()?;
    let data = load_dataset(&cfg, dataset)?;
    let out = common.out_dir()?;
    let tc = best.as_ref().map_or(cfg.train, |b| b.booster);
    let knn_k = best.as_ref().map_or(5, |b| b.knn_k).min(data.train.len());
    let (model, t_booster) =
        pipeline::train_booster(&data.train, &tc, Seeds::from_master(cfg.seed).train)?;
    let (_, t_knn) = pipeline::train_knn(&data.train, knn_k)?;
    save_model(&model, &out.join(MODEL_FILE))?;
    write_json(
        &out.join("train_report.json"),
        &TrainReport {
            n_train: data.train.len(),
            booster: model.config,
            knn_k,
            booster_train_time_s: t_booster,
            knn_train_time_s: t_knn,
        },
    )?;
    let mut inputs = vec![dataset];
    inputs.extend(params);
    write_manifest(
        out,
        "train",
        &cfg,
        &inputs,
        &[MODEL_FILE.into(), "train_report.json".into()],
    )?;
    Ok(model)
}

pub fn cmd_eval(common: &Common, dataset: &Path, model_path: &Path) -> Result<Vec<ReportRow>> {
    let cfg = common.load()?;
    require(model_path)?;
    let model = load_model(model_path)?;
    let report_path = model_path.with_file_name("train_report.json");
    let train_report: Option<TrainReport> = report_path
        .is_file()
        .then(|| read_json(&report_path))
        .transpose()?;
    let data = load_dataset(&cfg, dataset)?;
    let out = common.out_dir()?;
    let knn = train_report
        .as_ref()
        .map(|r| pipeline::train_knn(&data.train, r.knn_k))
        .transpose()?;
    let ev = pipeline::evaluate(
        &model,
        train_report
            .as_ref()
            .map_or(0.0, |r| r.booster_train_time_s),
        knn.as_ref()
            .map(|(m, _)| (m, train_report.as_ref().map_or(0.0, |r| r.knn_train_time_s))),
        &data.train,
        &data.test,
    )?;
    write_report_csv(create(&out.join("metrics.csv"))?, &ev.report)?;
    std::fs::write(out.join("metrics.txt"), format_report_text(&ev.report))
        .map_err(|e| CliError::io(out, e))?;
    ev.raw_histogram
        .write_csv(create(&out.join("hist_raw.csv"))?)?;
    ev.corrected_histogram
        .write_csv(create(&out.join("hist_corrected.csv"))?)?;
    write_json(&out.join("eval.json"), &ev)?;
    let outputs = [
        "metrics.csv",
        "metrics.txt",
        "hist_raw.csv",
        "hist_corrected.csv",
        "eval.json",
    ]
    .map(String::from);
    write_manifest(out, "eval", &cfg, &[dataset, model_path], &outputs)?;
    Ok(ev.report)
}

fn freq_tag(f: f64) -> String {
    format!("{}MHz", f / 1e6).replace('.', "p")
}

pub fn cmd_scene(common: &Common, model_path: Option<&Path>) -> Result<pipeline::SceneMetrics> {
    let cfg = common.load()?;
    let model = model_path
        .map(|p| {
            require(p)?;
            load_model(p).map_err(CliError::from)
        })
        .transpose()?;
    let out = common.out_dir()?;
    let run = pipeline::render_scene(
        &cfg,
        Seeds::from_master(cfg.seed).scene,
        model.as_ref(),
        None,
    )?;
    let mut outputs = Vec::new();
    let mut put = |name: String, map: &DepthMap, csv: bool| -> Result<()> {
        write_pfm(map, &out.join(format!("{name}.pfm")))?;
        outputs.push(format!("{name}.pfm"));
        if csv {
            write_csv_grid(map, &out.join(format!("{name}.csv")))?;
            outputs.push(format!("{name}.csv"));
        }
        Ok(())
    };
    put("truth".into(), &run.maps.truth, true)?;
    for (k, f) in run.maps.frequencies_hz.iter().enumerate() {
        put(
            format!("raw_{}", freq_tag(*f)),
            &run.maps.raw_depth[k],
            false,
        )?;
        put(
            format!("amplitude_{}", freq_tag(*f)),
            &run.maps.amplitude[k],
            false,
        )?;
    }
    put("raw_error".into(), &run.raw_error, true)?;
    if let (Some(c), Some(e)) = (&run.corrected, &run.corrected_error) {
        put("corrected".into(), c, true)?;
        put("corrected_error".into(), e, true)?;
    }
    write_pgm_mask(&run.maps.truth, &out.join("mask.pgm"))?;
    outputs.push("mask.pgm".into());
    let metrics = run.metrics();
    write_json(&out.join("scene_metrics.json"), &metrics)?;
    outputs.push("scene_metrics.json".into());
    let inputs: Vec<&Path> = model_path.into_iter().collect();
    write_manifest(out, "scene", &cfg, &inputs, &outputs)?;
    Ok(metrics)
}

fn find_files(dir: &Path, name: &str, found: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()
        .map_err(|e| CliError::io(dir, e))?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_files(&p, name, found)?;
        } else if p.file_name().is_some_and(|n| n == name) {
            found.push(p);
        }
    }
    Ok(())
}

fn first_file(dir: &Path, name: &str) -> Result<Option<PathBuf>> {
    let mut v = Vec::new();
    find_files(dir, name, &mut v)?;
    Ok(v.into_iter().next())
}

/// Consolidates eval, tuning and scene outputs found under `artifacts`.
pub fn cmd_report(common: &Common, artifacts: &Path) -> Result<String> {
    let cfg = common.load()?;
    if !artifacts.is_dir() {
        return Err(CliError::Input(format!(
            "{} is not a directory",
            artifacts.display()
        )));
    }
    let eval_path = first_file(artifacts, "eval.json")?
        .ok_or_else(|| CliError::Input(format!("no eval.json under {}", artifacts.display())))?;
    let ev: pipeline::Evaluation = read_json(&eval_path)?;
    let out = common.out_dir()?;
    let mut text = String::from("Depth error correction summary\n\n");
    text.push_str(&format_report_text(&ev.report));
    let mut inputs = vec![eval_path.clone()];

    if let Some(p) = first_file(artifacts, "tuning.json")? {
        let t: pipeline::BoosterTuning = read_json(&p)?;
        text.push_str(&format!(
            "\nTuned booster ({} trials, best validation objective {:.6}):\n  {}\n",
            t.history.len(),
            t.best_loss,
            serde_json::to_string(&t.best_config)?
        ));
        text.push_str("Search space (declared defaults of this tool):\n");
        for s in &t.space {
            text.push_str(&format!(
                "  {:<18} {:?} [{}, {}]\n",
                s.name, s.kind, s.min, s.max
            ));
        }
        inputs.push(p);
    }
    if let Some(p) = first_file(artifacts, "best_params.json")? {
        let b: BestParams = read_json(&p)?;
        text.push_str(&format!("Tuned KNN neighbour count: {}\n", b.knn_k));
        inputs.push(p);
    }
    if let Some(p) = first_file(artifacts, "scene_metrics.json")? {
        let s: pipeline::SceneMetrics = read_json(&p)?;
        text.push_str(&format!(
            "\nCorner scene: raw MAE {:.3} mm, corrected MAE {}, seam band raw MAE {:.3} mm, outer band raw MAE {:.3} mm\n",
            s.raw_mae_mm,
            s.corrected_mae_mm.map_or("n/a".into(), |v| format!("{v:.3} mm")),
            s.raw_seam_mae_mm,
            s.raw_outer_mae_mm
        ));
        inputs.push(p);
    }
    write_report_csv(create(&out.join("report.csv"))?, &ev.report)?;
    std::fs::write(out.join("report.txt"), &text).map_err(|e| CliError::io(out, e))?;
    let input_refs: Vec<&Path> = inputs.iter().map(PathBuf::as_path).collect();
    write_manifest(
        out,
        "report",
        &cfg,
        &input_refs,
        &["report.csv".into(), "report.txt".into()],
    )?;
    Ok(text)
}
