//! Labeled multi-frequency MPI samples: generation, splitting and CSV I/O.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::substream;
use crate::sensor::{
    simulate_measurement, ApdSensor, Channel, GenerationMode, NoiseToggles, SensorParams,
    DEFAULT_FREQUENCIES_HZ,
};
use crate::signal::ModulationConfig;
use crate::transport::{sample_scene, SceneRanges};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Number of model inputs: depth and amplitude at four frequencies.
pub const N_FEATURES: usize = 8;

pub const CSV_HEADER: [&str; N_FEATURES + 1] = [
    "d1_m", "d2_m", "d3_m", "d4_m", "a1_v2", "a2_v2", "a3_v2", "a4_v2", "target_m",
];

/// Stream tag for the train/test shuffle, disjoint from per-sample indices.
const SPLIT_STREAM: u64 = u64::MAX;

/// Depths (m) and correlation amplitudes (V²) at ascending frequencies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub depths: [f64; 4],
    pub amplitudes: [f64; 4],
}

impl FeatureVector {
    /// Canonical order `[d1, d2, d3, d4, a1, a2, a3, a4]`.
    pub fn to_array(&self) -> [f64; N_FEATURES] {
        let mut out = [0.0; N_FEATURES];
        out[..4].copy_from_slice(&self.depths);
        out[4..].copy_from_slice(&self.amplitudes);
        out
    }

    pub fn from_array(x: [f64; N_FEATURES]) -> Self {
        let mut depths = [0.0; 4];
        let mut amplitudes = [0.0; 4];
        depths.copy_from_slice(&x[..4]);
        amplitudes.copy_from_slice(&x[4..]);
        Self { depths, amplitudes }
    }

    /// Depth at the highest frequency.
    pub fn d4(&self) -> f64 {
        self.depths[3]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: FeatureVector,
    /// True direct-path distance (m).
    pub target: f64,
}

/// Everything that determines a generated dataset besides `n` and the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub ranges: SceneRanges,
    pub params: SensorParams,
    pub toggles: NoiseToggles,
    pub mode: GenerationMode,
    pub frequencies_hz: Vec<f64>,
    pub alpha: f64,
    pub m: f64,
    pub c: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        let base = ModulationConfig::standard(DEFAULT_FREQUENCIES_HZ[0]);
        Self {
            ranges: SceneRanges::default(),
            params: SensorParams::default(),
            toggles: NoiseToggles::all_on(),
            mode: GenerationMode::Analytic,
            frequencies_hz: DEFAULT_FREQUENCIES_HZ.to_vec(),
            alpha: base.alpha,
            m: base.m,
            c: base.c,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        self.ranges.validate()?;
        self.params.validate()?;
        if self.frequencies_hz.len() != 4 {
            return Err(Error::config(format!(
                "exactly 4 modulation frequencies are required, got {}",
                self.frequencies_hz.len()
            )));
        }
        if self.frequencies_hz.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(
                "modulation frequencies must be strictly ascending",
            ));
        }
        self.channels().map(|_| ())
    }

    pub fn modulation(&self, f: f64) -> Result<ModulationConfig> {
        ModulationConfig::new(f, self.alpha, self.m, self.c)
    }

    pub fn channels(&self) -> Result<Vec<Channel>> {
        self.frequencies_hz
            .iter()
            .map(|&f| Channel::new(self.modulation(f)?, &self.params))
            .collect()
    }
}

/// Provenance stamped next to every dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub schema_version: u32,
    pub n_samples: usize,
    pub seed: u64,
    pub mode: GenerationMode,
    pub frequencies_hz: Vec<f64>,
    pub alpha: f64,
    pub m: f64,
    pub c: f64,
    pub sampling: String,
    #[serde(flatten)]
    pub ranges: SceneRanges,
    #[serde(flatten)]
    pub params: SensorParams,
    #[serde(flatten)]
    pub toggles: NoiseToggles,
}

impl DatasetMeta {
    pub fn new(n_samples: usize, seed: u64, cfg: &DatasetConfig) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            n_samples,
            seed,
            mode: cfg.mode,
            frequencies_hz: cfg.frequencies_hz.clone(),
            alpha: cfg.alpha,
            m: cfg.m,
            c: cfg.c,
            sampling: "independent-uniform".to_string(),
            ranges: cfg.ranges,
            params: cfg.params,
            toggles: cfg.toggles,
        }
    }

    pub fn config(&self) -> DatasetConfig {
        DatasetConfig {
            ranges: self.ranges,
            params: self.params,
            toggles: self.toggles,
            mode: self.mode,
            frequencies_hz: self.frequencies_hz.clone(),
            alpha: self.alpha,
            m: self.m,
            c: self.c,
        }
    }
}

/// Builds sample `index` from its own substreams.
pub fn generate_sample(
    index: u64,
    seed: u64,
    ranges: &SceneRanges,
    channels: &[Channel],
    sensor: &ApdSensor,
    mode: GenerationMode,
) -> Result<LabeledSample> {
    let scene = sample_scene(&mut substream(seed, &[index, 0]), ranges);
    let mut depths = [0.0; 4];
    let mut amplitudes = [0.0; 4];
    for (k, ch) in channels.iter().enumerate() {
        let mut rng = substream(seed, &[index, 1 + k as u64]);
        let rec = simulate_measurement(&scene, ch, sensor, &mut rng, mode)?;
        depths[k] = rec.depth;
        amplitudes[k] = rec.amplitude;
    }
    Ok(LabeledSample {
        features: FeatureVector { depths, amplitudes },
        target: scene.d_as,
    })
}

/// Generates `n` samples; sample `i` depends only on `(seed, i, cfg)`.
pub fn generate(
    n: usize,
    seed: u64,
    cfg: &DatasetConfig,
) -> Result<(Vec<LabeledSample>, DatasetMeta)> {
    if n == 0 {
        return Err(Error::config("sample count must be >= 1"));
    }
    cfg.validate()?;
    let channels = cfg.channels()?;
    let sensor = ApdSensor::new(cfg.params, cfg.toggles)?;
    let samples = (0..n as u64)
        .into_par_iter()
        .map(|i| generate_sample(i, seed, &cfg.ranges, &channels, &sensor, cfg.mode))
        .collect::<Result<Vec<_>>>()?;
    Ok((samples, DatasetMeta::new(n, seed, cfg)))
}

/// Seeded shuffle, then the first ⌈n·fraction⌉ samples go to training.
pub fn split_train_test<T: Clone>(
    samples: &[T],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>)> {
    if samples.is_empty() {
        return Err(Error::config("cannot split an empty sample list"));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::config(format!(
            "split fraction must be in (0, 1), got {fraction}"
        )));
    }
    let n = samples.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut substream(seed, &[SPLIT_STREAM]));
    let n_train = ((n as f64 * fraction) - 1e-9).ceil().clamp(0.0, n as f64) as usize;
    let train = order[..n_train]
        .iter()
        .map(|&i| samples[i].clone())
        .collect();
    let test = order[n_train..]
        .iter()
        .map(|&i| samples[i].clone())
        .collect();
    Ok((train, test))
}

/// Sidecar path `<dir>/<stem>.meta.json` for a dataset file.
pub fn meta_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    csv_path.with_file_name(format!("{stem}.meta.json"))
}

/// Writes the samples as CSV.
pub fn write_samples_csv(samples: &[LabeledSample], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(File::create(path)?));
    w.write_record(CSV_HEADER)?;
    let mut fields: Vec<String> = Vec::with_capacity(N_FEATURES + 1);
    for s in samples {
        fields.clear();
        fields.extend(s.features.to_array().iter().map(|v| v.to_string()));
        fields.push(s.target.to_string());
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the CSV and its metadata sidecar.
pub fn write_csv(samples: &[LabeledSample], meta: &DatasetMeta, path: &Path) -> Result<()> {
    write_samples_csv(samples, path)?;
    write_meta(meta, &meta_path(path))
}

pub fn write_meta(meta: &DatasetMeta, path: &Path) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, meta)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

pub fn read_meta(path: &Path) -> Result<DatasetMeta> {
    let meta: DatasetMeta = serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?;
    if meta.schema_version != SCHEMA_VERSION {
        return Err(Error::config(format!(
            "dataset schema version {} is not supported (expected {SCHEMA_VERSION})",
            meta.schema_version
        )));
    }
    Ok(meta)
}

/// Reads a dataset CSV. Row numbers in errors count data rows from 1; the
/// header is row 0.
pub fn read_csv(path: &Path) -> Result<Vec<LabeledSample>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(std::io::BufReader::new(File::open(path)?));
    let mut records = r.records();
    let header = match records.next() {
        Some(h) => h?,
        None => {
            return Err(Error::Parse {
                row: 0,
                msg: "missing header".into(),
            })
        }
    };
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Parse {
            row: 0,
            msg: format!(
                "unexpected header '{}', expected '{}'",
                header.iter().collect::<Vec<_>>().join(","),
                CSV_HEADER.join(",")
            ),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in records.enumerate() {
        let row = i + 1;
        let rec = rec?;
        if rec.len() != N_FEATURES + 1 {
            return Err(Error::Parse {
                row,
                msg: format!("expected {} fields, found {}", N_FEATURES + 1, rec.len()),
            });
        }
        let mut vals = [0.0; N_FEATURES + 1];
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                row,
                msg: format!(
                    "column {} ('{}'): cannot parse '{field}' as a number",
                    j + 1,
                    CSV_HEADER[j]
                ),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    msg: format!("column {} ('{}') is not finite", j + 1, CSV_HEADER[j]),
                });
            }
            vals[j] = v;
        }
        let mut x = [0.0; N_FEATURES];
        x.copy_from_slice(&vals[..N_FEATURES]);
        out.push(LabeledSample {
            features: FeatureVector::from_array(x),
            target: vals[N_FEATURES],
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::{net_phasor, TwoPathScene};
    use proptest::prelude::*;

    fn noise_free() -> DatasetConfig {
        DatasetConfig {
            toggles: NoiseToggles::all_off(),
            ..DatasetConfig::default()
        }
    }

    #[test]
    fn single_predictable_sample() {
        let scene = TwoPathScene {
            gamma_r: 0.1794,
            d_as: 1.8,
            d_ab: 0.1,
            rho_sas: 0.6,
            rho_sab: 0.5,
            rho_aba: 0.5,
            rho_bas: 0.5,
        };
        let cfg = DatasetConfig {
            ranges: SceneRanges::fixed(&scene),
            ..noise_free()
        };
        let (samples, meta) = generate(1, 3, &cfg).unwrap();
        assert_eq!(meta.n_samples, 1);
        let s = samples[0];
        assert_eq!(s.target, 1.8);
        for (k, &f) in DEFAULT_FREQUENCIES_HZ.iter().enumerate() {
            let c = ModulationConfig::standard(f);
            let net = net_phasor(&scene, &c).unwrap();
            let d = crate::signal::phase_to_depth(net.phase, &c).unwrap();
            assert!((s.features.depths[k] - d).abs() < 1e-12);
            assert!((s.features.amplitudes[k] - net.amplitude).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_bad_config() {
        assert!(generate(0, 1, &DatasetConfig::default()).is_err());
        let bad = DatasetConfig {
            frequencies_hz: vec![25e6, 12.5e6, 31.25e6, 18.75e6],
            ..DatasetConfig::default()
        };
        assert!(matches!(generate(5, 1, &bad), Err(Error::Config(_))));
    }

    #[test]
    fn noise_free_depths_are_bounded() {
        let (samples, _) = generate(2000, 21, &noise_free()).unwrap();
        for s in &samples {
            for d in s.features.depths {
                assert!(d >= s.target - 1e-9 && d <= s.target + 0.15 + 1e-9);
            }
        }
    }

    #[test]
    fn noisy_d4_error_median_is_non_negative() {
        let (samples, _) = generate(4000, 5, &DatasetConfig::default()).unwrap();
        let mut err: Vec<f64> = samples.iter().map(|s| s.features.d4() - s.target).collect();
        err.sort_by(f64::total_cmp);
        assert!(err[err.len() / 2] >= 0.0);
    }

    #[test]
    fn parallel_matches_sequential() {
        let cfg = DatasetConfig::default();
        let (par, _) = generate(300, 8, &cfg).unwrap();
        let channels = cfg.channels().unwrap();
        let sensor = ApdSensor::new(cfg.params, cfg.toggles).unwrap();
        let seq: Vec<_> = (0..300)
            .map(|i| generate_sample(i, 8, &cfg.ranges, &channels, &sensor, cfg.mode).unwrap())
            .collect();
        assert_eq!(par, seq);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let (three, _) = pool.install(|| generate(300, 8, &cfg)).unwrap();
        assert_eq!(par, three);
    }

    #[test]
    fn split_examples() {
        let xs: Vec<u32> = (0..10).collect();
        let (tr, te) = split_train_test(&xs, 0.8, 4).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        let mut all: Vec<u32> = tr.iter().chain(&te).copied().collect();
        all.sort();
        assert_eq!(all, xs);
        assert_eq!(split_train_test(&xs, 0.8, 4).unwrap(), (tr, te));
        assert!(split_train_test::<u32>(&[], 0.8, 4).is_err());
        assert!(split_train_test(&xs, 1.0, 4).is_err());
        let (tr, _) = split_train_test(&xs[..7], 0.8, 4).unwrap();
        assert_eq!(tr.len(), 6);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let meta = DatasetMeta::new(0, 1, &DatasetConfig::default());

        write_csv(&[], &meta, &path).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            CSV_HEADER.join(",") + "\n"
        );
        assert!(read_csv(&path).unwrap().is_empty());
        assert_eq!(read_meta(&dir.path().join("data.meta.json")).unwrap(), meta);

        let (samples, meta) = generate(10_000, 2, &DatasetConfig::default()).unwrap();
        write_csv(&samples[..1], &meta, &path).unwrap();
        assert_eq!(read_csv(&path).unwrap(), samples[..1].to_vec());
        write_csv(&samples, &meta, &path).unwrap();
        let back = read_csv(&path).unwrap();
        for (a, b) in back.iter().zip(&samples) {
            for (x, y) in a.features.to_array().iter().zip(b.features.to_array()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
            assert_eq!(a.target.to_bits(), b.target.to_bits());
        }
        assert_eq!(back.len(), samples.len());
    }

    #[test]
    fn csv_errors_name_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        let header = CSV_HEADER.join(",");

        std::fs::write(&path, "a,b\n").unwrap();
        assert!(matches!(read_csv(&path), Err(Error::Parse { row: 0, .. })));

        std::fs::write(&path, format!("{header}\n1,2,3,4,5,6,7,8,9\n1,2,3\n")).unwrap();
        assert!(matches!(read_csv(&path), Err(Error::Parse { row: 2, .. })));

        std::fs::write(&path, format!("{header}\n1,2,3,4,5,6,7,NaN,9\n")).unwrap();
        let err = read_csv(&path).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 1, .. }));
        assert!(err.to_string().contains("row 1"));

        std::fs::write(&path, format!("{header}\n1,2,3,4,5,6,7,x,9\n")).unwrap();
        assert!(matches!(read_csv(&path), Err(Error::Parse { row: 1, .. })));
    }

    #[test]
    fn meta_path_uses_stem() {
        assert_eq!(
            meta_path(Path::new("out/train.csv")),
            Path::new("out/train.meta.json")
        );
    }

    proptest! {
        #[test]
        fn split_is_a_partition(n in 1usize..200, frac in 0.05f64..0.95, seed: u64) {
            let xs: Vec<usize> = (0..n).collect();
            let (tr, te) = split_train_test(&xs, frac, seed).unwrap();
            prop_assert_eq!(tr.len(), (n as f64 * frac - 1e-9).ceil() as usize);
            let mut all: Vec<usize> = tr.into_iter().chain(te).collect();
            all.sort();
            prop_assert_eq!(all, xs);
        }
    }
}
