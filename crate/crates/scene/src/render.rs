use rayon::prelude::*;
use tofmpi_core::rng::substream;
use tofmpi_core::sensor::{
    simulate_measurement, ApdSensor, Channel, GenerationMode, MeasurementRecord,
};
use tofmpi_gbtree::BoosterModel;

use crate::geometry::SceneGrid;
use crate::maps::DepthMap;
use crate::{Result, SceneError};

/// Per-frequency raw depth (m) and amplitude maps plus the true distance map.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedMaps {
    pub frequencies_hz: Vec<f64>,
    pub raw_depth: Vec<DepthMap>,
    pub amplitude: Vec<DepthMap>,
    pub truth: DepthMap,
}

impl RenderedMaps {
    pub fn width(&self) -> usize {
        self.truth.width
    }

    pub fn height(&self) -> usize {
        self.truth.height
    }

    /// Depths in channel order followed by amplitudes in channel order.
    pub fn features(&self, col: usize, row: usize) -> Option<Vec<f64>> {
        let mut x = Vec::with_capacity(2 * self.raw_depth.len());
        for m in &self.raw_depth {
            x.push(m.get(col, row)?);
        }
        for m in &self.amplitude {
            x.push(m.get(col, row)?);
        }
        Some(x)
    }

    /// Raw map at the highest modulation frequency.
    pub fn raw_highest(&self) -> &DepthMap {
        self.raw_depth.last().expect("at least one channel")
    }
}

/// Measures every unmasked pixel at every channel.
///
/// Pixel `i` at channel `k` draws from substream `(seed, [i, k])`, so maps do
/// not depend on the thread count.
pub fn render_maps(
    grid: &SceneGrid,
    channels: &[Channel],
    sensor: &ApdSensor,
    mode: GenerationMode,
    seed: u64,
) -> Result<RenderedMaps> {
    if channels.is_empty() {
        return Err(SceneError::Config(
            "at least one modulation channel is required".into(),
        ));
    }
    let records: Vec<Option<Vec<MeasurementRecord>>> = grid
        .pixels
        .par_iter()
        .enumerate()
        .map(|(i, px)| {
            px.as_ref()
                .map(|px| {
                    channels
                        .iter()
                        .enumerate()
                        .map(|(k, ch)| {
                            let mut rng = substream(seed, &[i as u64, k as u64]);
                            simulate_measurement(&px.scene, ch, sensor, &mut rng, mode)
                        })
                        .collect::<std::result::Result<Vec<_>, _>>()
                })
                .transpose()
        })
        .collect::<std::result::Result<_, _>>()?;

    let (w, h) = (grid.width, grid.height);
    let pick = |k: usize, f: fn(&MeasurementRecord) -> f64| {
        DepthMap::from_fn(w, h, |c, r| records[r * w + c].as_ref().map(|v| f(&v[k])))
    };
    Ok(RenderedMaps {
        frequencies_hz: channels.iter().map(|c| c.cfg.f).collect(),
        raw_depth: (0..channels.len()).map(|k| pick(k, |m| m.depth)).collect(),
        amplitude: (0..channels.len())
            .map(|k| pick(k, |m| m.amplitude))
            .collect(),
        truth: DepthMap::from_fn(w, h, |c, r| grid.get(c, r).map(|p| p.scene.d_as)),
    })
}

/// A per-pixel depth correction model.
pub trait DepthCorrector: Sync {
    fn n_features(&self) -> usize;
    fn correct(&self, features: &[f64]) -> Result<f64>;
}

impl DepthCorrector for BoosterModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn correct(&self, features: &[f64]) -> Result<f64> {
        Ok(self.predict(features)?)
    }
}

/// Applies `model` to every unmasked pixel.
pub fn correct_map(model: &dyn DepthCorrector, maps: &RenderedMaps) -> Result<DepthMap> {
    let expected = 2 * maps.raw_depth.len();
    if model.n_features() != expected {
        return Err(SceneError::Schema {
            expected,
            got: model.n_features(),
        });
    }
    let (w, h) = (maps.width(), maps.height());
    let values: Vec<Option<f64>> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            maps.features(i % w, i / w)
                .map(|x| model.correct(&x))
                .transpose()
        })
        .collect::<Result<_>>()?;
    Ok(DepthMap::from_fn(w, h, |c, r| values[r * w + c]))
}

/// Mean absolute error near the seam versus in the outermost columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeamStats {
    pub seam_mean_abs: f64,
    pub outer_mean_abs: f64,
}

impl SeamStats {
    pub fn concentrated(&self) -> bool {
        self.seam_mean_abs > self.outer_mean_abs
    }
}

/// Compares columns within `radius_px` of the centre seam against the
/// `outer_fraction` of columns farthest from it.
pub fn seam_concentration(err: &DepthMap, radius_px: f64, outer_fraction: f64) -> SeamStats {
    let half = 0.5 * err.width as f64;
    let offset = |c: usize| (c as f64 + 0.5 - half).abs();
    let cut = (1.0 - outer_fraction) * half;
    SeamStats {
        seam_mean_abs: err.mean_abs_where(|c| offset(c) <= radius_px),
        outer_mean_abs: err.mean_abs_where(|c| offset(c) >= cut),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{trace_corner, CornerScene};
    use crate::maps::error_map;
    use tofmpi_core::sensor::{NoiseToggles, SensorParams};

    fn small() -> CornerScene {
        CornerScene {
            width: 32,
            height: 8,
            ..CornerScene::default()
        }
    }

    fn render(scene: &CornerScene, toggles: NoiseToggles, mpi: bool, seed: u64) -> RenderedMaps {
        let params = SensorParams::default();
        let channels = Channel::standard_set(&params).unwrap();
        let sensor = ApdSensor::new(params, toggles).unwrap();
        let mut grid = trace_corner(scene).unwrap();
        if !mpi {
            grid = grid.without_mpi();
        }
        render_maps(&grid, &channels, &sensor, GenerationMode::Analytic, seed).unwrap()
    }

    struct Stub(fn(&[f64]) -> f64, usize);

    impl DepthCorrector for Stub {
        fn n_features(&self) -> usize {
            self.1
        }
        fn correct(&self, x: &[f64]) -> Result<f64> {
            Ok((self.0)(x))
        }
    }

    #[test]
    fn no_mpi_no_noise_matches_truth() {
        let m = render(&small(), NoiseToggles::all_off(), false, 1);
        for raw in &m.raw_depth {
            let e = error_map(raw, &m.truth).unwrap();
            assert!(e.values.iter().all(|v| v.abs() < 0.1), "{:?}", e.values);
        }
    }

    #[test]
    fn noise_free_error_peaks_near_the_seam() {
        let s = CornerScene {
            width: 128,
            height: 4,
            ..CornerScene::default()
        };
        let m = render(&s, NoiseToggles::all_off(), true, 1);
        let e = error_map(m.raw_highest(), &m.truth).unwrap();
        let st = seam_concentration(&e, 5.0, 0.25);
        assert!(st.concentrated(), "{st:?}");
        // MPI only ever lengthens the measured path.
        assert!(e.values.iter().all(|&v| v >= -1e-6));
        // Decay beyond the peak along one row.
        let row: Vec<f64> = (64..128).map(|c| e.get(c, 1).unwrap()).collect();
        let peak = row
            .iter()
            .cloned()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0;
        assert!(row[peak..].windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }

    #[test]
    fn reproducible_for_fixed_seed() {
        let a = render(&small(), NoiseToggles::all_on(), true, 9);
        let b = render(&small(), NoiseToggles::all_on(), true, 9);
        let c = render(&small(), NoiseToggles::all_on(), true, 10);
        assert_eq!(a, b);
        assert_ne!(a.raw_depth, c.raw_depth);
    }

    #[test]
    fn stub_correctors() {
        let m = render(&small(), NoiseToggles::all_on(), true, 3);
        let identity = correct_map(&Stub(|x| x[3], 8), &m).unwrap();
        assert_eq!(&identity, m.raw_highest());
        let truth = m.truth.clone();
        let perfect = DepthMap::from_fn(m.width(), m.height(), |c, r| truth.get(c, r));
        assert_eq!(error_map(&perfect, &m.truth).unwrap().mean_abs(), 0.0);
        assert!(matches!(
            correct_map(&Stub(|x| x[0], 7), &m),
            Err(SceneError::Schema { .. })
        ));
    }
}
