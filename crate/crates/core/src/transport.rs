//! Two-path light transport for a coaxial scanner.
//!
//! The sensor S sees target point A directly and also through one lumped
//! detour A → B → A. Both paths lose intensity with the square of the direct
//! distance `d_AS`; the detour additionally carries three reflectance factors
//! and a longer travel time.

use std::f64::consts::TAU;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::signal::{
    depth_to_phase, superpose, ModulationConfig, Phasor, SampledTrace, TraceTiming,
};
use crate::{Error, Result};

/// Base correlation strength Γ_R at unit distance and unit reflectance (V²).
pub const GAMMA_R: f64 = 0.1794;

/// One pixel's multipath configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPathScene {
    pub gamma_r: f64,
    pub d_as: f64,
    pub d_ab: f64,
    pub rho_sas: f64,
    pub rho_sab: f64,
    pub rho_aba: f64,
    pub rho_bas: f64,
}

fn unit_interval(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in [0, 1], got {v}")))
    }
}

impl TwoPathScene {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_r.is_finite() && self.gamma_r > 0.0) {
            return Err(Error::domain(format!(
                "gamma_r must be > 0, got {}",
                self.gamma_r
            )));
        }
        if !(self.d_as.is_finite() && self.d_as > 0.0) {
            return Err(Error::domain(format!(
                "d_as must be > 0, got {}",
                self.d_as
            )));
        }
        if !(self.d_ab.is_finite() && self.d_ab >= 0.0) {
            return Err(Error::domain(format!(
                "d_ab must be >= 0, got {}",
                self.d_ab
            )));
        }
        unit_interval("rho_sas", self.rho_sas)?;
        unit_interval("rho_sab", self.rho_sab)?;
        unit_interval("rho_aba", self.rho_aba)?;
        unit_interval("rho_bas", self.rho_bas)
    }

    /// Product ρ_SAB·ρ_ABA·ρ_BAS of the detour.
    pub fn mpi_product(&self) -> f64 {
        self.rho_sab * self.rho_aba * self.rho_bas
    }

    /// Copy with the detour switched off.
    pub fn without_mpi(mut self) -> Self {
        self.rho_sab = 0.0;
        self
    }
}

/// Sampling box for [`TwoPathScene`]; every free field is drawn uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneRanges {
    pub gamma_r: f64,
    pub d_as_min: f64,
    pub d_as_max: f64,
    pub d_ab_min: f64,
    pub d_ab_max: f64,
    pub rho_sas_min: f64,
    pub rho_sas_max: f64,
    pub rho_sab_min: f64,
    pub rho_sab_max: f64,
    pub rho_aba_min: f64,
    pub rho_aba_max: f64,
    pub rho_bas_min: f64,
    pub rho_bas_max: f64,
}

impl Default for SceneRanges {
    fn default() -> Self {
        Self {
            gamma_r: GAMMA_R,
            d_as_min: 1.4,
            d_as_max: 2.4,
            d_ab_min: 0.0,
            d_ab_max: 0.15,
            rho_sas_min: 0.0,
            rho_sas_max: 1.0,
            rho_sab_min: 0.0,
            rho_sab_max: 1.0,
            rho_aba_min: 0.0,
            rho_aba_max: 1.0,
            rho_bas_min: 0.0,
            rho_bas_max: 1.0,
        }
    }
}

impl SceneRanges {
    /// Ranges that always produce exactly `scene`.
    pub fn fixed(scene: &TwoPathScene) -> Self {
        Self {
            gamma_r: scene.gamma_r,
            d_as_min: scene.d_as,
            d_as_max: scene.d_as,
            d_ab_min: scene.d_ab,
            d_ab_max: scene.d_ab,
            rho_sas_min: scene.rho_sas,
            rho_sas_max: scene.rho_sas,
            rho_sab_min: scene.rho_sab,
            rho_sab_max: scene.rho_sab,
            rho_aba_min: scene.rho_aba,
            rho_aba_max: scene.rho_aba,
            rho_bas_min: scene.rho_bas,
            rho_bas_max: scene.rho_bas,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pairs = [
            ("d_as", self.d_as_min, self.d_as_max),
            ("d_ab", self.d_ab_min, self.d_ab_max),
            ("rho_sas", self.rho_sas_min, self.rho_sas_max),
            ("rho_sab", self.rho_sab_min, self.rho_sab_max),
            ("rho_aba", self.rho_aba_min, self.rho_aba_max),
            ("rho_bas", self.rho_bas_min, self.rho_bas_max),
        ];
        for (name, lo, hi) in pairs {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::config(format!(
                    "{name} range [{lo}, {hi}] is empty or non-finite"
                )));
            }
        }
        // Both corners of the box must be valid scenes.
        let lo = TwoPathScene {
            gamma_r: self.gamma_r,
            d_as: self.d_as_min,
            d_ab: self.d_ab_min,
            rho_sas: self.rho_sas_min,
            rho_sab: self.rho_sab_min,
            rho_aba: self.rho_aba_min,
            rho_bas: self.rho_bas_min,
        };
        let hi = TwoPathScene {
            gamma_r: self.gamma_r,
            d_as: self.d_as_max,
            d_ab: self.d_ab_max,
            rho_sas: self.rho_sas_max,
            rho_sab: self.rho_sab_max,
            rho_aba: self.rho_aba_max,
            rho_bas: self.rho_bas_max,
        };
        lo.validate()
            .and(hi.validate())
            .map_err(|e| Error::config(format!("scene ranges: {e}")))
    }
}

/// Direct-path phasor: Γ_R·ρ_SAS/d_AS² at the round-trip phase of d_AS.
pub fn direct_phasor(scene: &TwoPathScene, cfg: &ModulationConfig) -> Result<Phasor> {
    Phasor::new(
        scene.gamma_r * scene.rho_sas / (scene.d_as * scene.d_as),
        depth_to_phase(scene.d_as, cfg)?,
    )
}

/// Detour phasor: Γ_R·ρ_SAB·ρ_ABA·ρ_BAS/d_AS² at the phase of d_AS + d_AB.
pub fn multipath_phasor(scene: &TwoPathScene, cfg: &ModulationConfig) -> Result<Phasor> {
    Phasor::new(
        scene.gamma_r * scene.mpi_product() / (scene.d_as * scene.d_as),
        depth_to_phase(scene.d_as + scene.d_ab, cfg)?,
    )
}

/// Sum of the direct and detour phasors.
pub fn net_phasor(scene: &TwoPathScene, cfg: &ModulationConfig) -> Result<Phasor> {
    superpose(&[direct_phasor(scene, cfg)?, multipath_phasor(scene, cfg)?])
}

/// Draws a scene with each free field independent and uniform over its range.
///
/// Fields are drawn in declaration order (d_as, d_ab, ρ_SAS, ρ_SAB, ρ_ABA, ρ_BAS),
/// one uniform per field even when the range is degenerate.
pub fn sample_scene(rng: &mut impl Rng, ranges: &SceneRanges) -> TwoPathScene {
    let mut next = |lo: f64, hi: f64| {
        let u: f64 = rng.random();
        if lo == hi {
            lo
        } else {
            (lo + (hi - lo) * u).min(hi)
        }
    };
    TwoPathScene {
        gamma_r: ranges.gamma_r,
        d_as: next(ranges.d_as_min, ranges.d_as_max),
        d_ab: next(ranges.d_ab_min, ranges.d_ab_max),
        rho_sas: next(ranges.rho_sas_min, ranges.rho_sas_max),
        rho_sab: next(ranges.rho_sab_min, ranges.rho_sab_max),
        rho_aba: next(ranges.rho_aba_min, ranges.rho_aba_max),
        rho_bas: next(ranges.rho_bas_min, ranges.rho_bas_max),
    }
}

/// Received optical power at time `t` for calibration power `p0` (W).
#[inline]
pub fn optical_power_at(scene: &TwoPathScene, cfg: &ModulationConfig, p0: f64, t: f64) -> f64 {
    let inv_d2 = 1.0 / (scene.d_as * scene.d_as);
    let w = TAU * cfg.f;
    let direct = scene.rho_sas * (1.0 + cfg.alpha * (w * (t - 2.0 * scene.d_as / cfg.c)).cos());
    let detour = scene.mpi_product()
        * (1.0 + cfg.alpha * (w * (t - 2.0 * (scene.d_as + scene.d_ab) / cfg.c)).cos());
    (p0 * inv_d2 * (direct + detour)).max(0.0)
}

/// Samples the received optical power over `timing`.
pub fn optical_power_trace(
    scene: &TwoPathScene,
    cfg: &ModulationConfig,
    p0: f64,
    timing: TraceTiming,
) -> Result<SampledTrace> {
    if !(p0.is_finite() && p0 > 0.0) {
        return Err(Error::domain(format!(
            "calibration power must be > 0, got {p0}"
        )));
    }
    scene.validate()?;
    Ok(SampledTrace::from_fn(timing, |t| {
        optical_power_at(scene, cfg, p0, t)
    }))
}
