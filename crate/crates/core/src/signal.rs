//! AMCW modulation math: phasors, four-tap demodulation and phase/depth
//! conversion.
//!
//! Taps are fixed at demodulation phase shifts {0, π/2, π, 3π/2}. Phases are
//! always reported in `[0, 2π)`; a zero-amplitude phasor carries phase 0.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Speed of light used by default (m/s).
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Number of demodulation taps.
pub const N_TAP: usize = 4;

/// Modulation and demodulation settings for one frequency channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationConfig {
    /// Modulation frequency (Hz).
    pub f: f64,
    /// Modulation contrast α.
    pub alpha: f64,
    /// Demodulation signal amplitude (V).
    pub m: f64,
    /// Speed of light (m/s).
    pub c: f64,
}

impl ModulationConfig {
    pub fn new(f: f64, alpha: f64, m: f64, c: f64) -> Result<Self> {
        let cfg = Self { f, alpha, m, c };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Default constants (α = 1, m = 0.4785 V, c = 3e8 m/s) at frequency `f`.
    pub fn standard(f: f64) -> Self {
        Self {
            f,
            alpha: 1.0,
            m: 0.4785,
            c: SPEED_OF_LIGHT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f.is_finite() && self.f > 0.0) {
            return Err(Error::config(format!(
                "modulation frequency must be > 0, got {}",
                self.f
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config(format!(
                "modulation contrast must be in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.m.is_finite() && self.m > 0.0) {
            return Err(Error::config(format!(
                "demodulation amplitude must be > 0, got {}",
                self.m
            )));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::config(format!(
                "speed of light must be > 0, got {}",
                self.c
            )));
        }
        Ok(())
    }

    /// Angular frequency w = 2πf.
    pub fn omega(&self) -> f64 {
        TAU * self.f
    }

    /// Depth span representable without phase wrapping, c/(2f).
    pub fn unambiguous_range(&self) -> f64 {
        self.c / (2.0 * self.f)
    }

    /// Demodulation time shift of tap `n`, i.e. a phase shift of nπ/2.
    pub fn tap_shift(&self, n: usize) -> f64 {
        n as f64 * (PI / 2.0) / self.omega()
    }
}

/// Cross-correlation phasor: amplitude (V²) and phase (rad, `[0, 2π)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phasor {
    pub amplitude: f64,
    pub phase: f64,
}

impl Phasor {
    /// Builds a phasor, normalizing the phase into `[0, 2π)`.
    pub fn new(amplitude: f64, phase: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(Error::domain(format!(
                "phasor amplitude must be finite and >= 0, got {amplitude}"
            )));
        }
        if !phase.is_finite() {
            return Err(Error::domain("phasor phase must be finite"));
        }
        Ok(Self {
            amplitude,
            phase: if amplitude == 0.0 {
                0.0
            } else {
                wrap_phase(phase)
            },
        })
    }

    pub fn zero() -> Self {
        Self {
            amplitude: 0.0,
            phase: 0.0,
        }
    }

    /// Real and imaginary parts.
    pub fn to_cartesian(self) -> (f64, f64) {
        let (s, c) = self.phase.sin_cos();
        (self.amplitude * c, self.amplitude * s)
    }

    fn from_cartesian(re: f64, im: f64) -> Self {
        let amplitude = re.hypot(im);
        if amplitude == 0.0 {
            return Self::zero();
        }
        Self {
            amplitude,
            phase: wrap_phase(im.atan2(re)),
        }
    }
}

/// Four cross-correlation samples at phase shifts 0, π/2, π and 3π/2 (V²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TapSet {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl TapSet {
    pub fn new(c0: f64, c1: f64, c2: f64, c3: f64) -> Result<Self> {
        if ![c0, c1, c2, c3].iter().all(|v| v.is_finite()) {
            return Err(Error::domain("tap values must be finite"));
        }
        Ok(Self { c0, c1, c2, c3 })
    }

    pub fn as_array(&self) -> [f64; N_TAP] {
        [self.c0, self.c1, self.c2, self.c3]
    }

    /// In-phase difference c0 − c2.
    pub fn in_phase(&self) -> f64 {
        self.c0 - self.c2
    }

    /// Quadrature difference c3 − c1.
    pub fn quadrature(&self) -> f64 {
        self.c3 - self.c1
    }
}

/// Uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTrace {
    sample_interval: f64,
    values: Vec<f64>,
}

impl SampledTrace {
    pub fn new(sample_interval: f64, values: Vec<f64>) -> Result<Self> {
        if !(sample_interval.is_finite() && sample_interval > 0.0) {
            return Err(Error::config(format!(
                "sample interval must be > 0, got {sample_interval}"
            )));
        }
        if values.is_empty() {
            return Err(Error::config("trace must contain at least one sample"));
        }
        Ok(Self {
            sample_interval,
            values,
        })
    }

    /// Samples `f(t)` at `t_i = i·dt` for `i in 0..timing.n_samples`.
    pub fn from_fn(timing: TraceTiming, f: impl FnMut(f64) -> f64) -> Self {
        let mut f = f;
        let dt = timing.sample_interval;
        let values = (0..timing.n_samples).map(|i| f(i as f64 * dt)).collect();
        Self {
            sample_interval: dt,
            values,
        }
    }

    pub fn sample_interval(&self) -> f64 {
        self.sample_interval
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Integration time T_int = sample_interval × sample count.
    pub fn t_int(&self) -> f64 {
        self.sample_interval * self.values.len() as f64
    }

    pub fn timing(&self) -> TraceTiming {
        TraceTiming {
            sample_interval: self.sample_interval,
            n_samples: self.values.len(),
        }
    }

    pub fn map(mut self, f: impl FnMut(f64) -> f64) -> Self {
        let mut f = f;
        for v in &mut self.values {
            *v = f(*v);
        }
        self
    }
}

/// Sampling grid of a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceTiming {
    pub sample_interval: f64,
    pub n_samples: usize,
}

/// Default trace grid for demodulation tests: 200 periods at 64 samples per period.
pub const DEFAULT_PERIODS: usize = 200;
pub const DEFAULT_SAMPLES_PER_PERIOD: usize = 64;

const PERIOD_TOLERANCE: f64 = 1e-6;

impl TraceTiming {
    /// `periods` whole modulation periods at `samples_per_period` samples each.
    pub fn whole_periods(
        cfg: &ModulationConfig,
        periods: usize,
        samples_per_period: usize,
    ) -> Result<Self> {
        if periods == 0 || samples_per_period < 2 {
            return Err(Error::config(
                "need at least one period and two samples per period",
            ));
        }
        Ok(Self {
            sample_interval: 1.0 / (cfg.f * samples_per_period as f64),
            n_samples: periods * samples_per_period,
        })
    }

    pub fn default_for(cfg: &ModulationConfig) -> Self {
        Self::whole_periods(cfg, DEFAULT_PERIODS, DEFAULT_SAMPLES_PER_PERIOD)
            .expect("static defaults are valid")
    }

    /// Fixed sample interval `dt` with the whole-period sample count whose
    /// duration is nearest to `target` seconds (ties go to the shorter trace).
    pub fn nearest_whole_periods(cfg: &ModulationConfig, dt: f64, target: f64) -> Result<Self> {
        if !(dt > 0.0 && target > 0.0) {
            return Err(Error::config(
                "sample interval and target duration must be > 0",
            ));
        }
        if cfg.f * dt > 0.5 {
            return Err(Error::config(format!(
                "sample interval {dt} s gives fewer than 2 samples per period at {} Hz",
                cfg.f
            )));
        }
        let upper = (2.0 * target / dt).ceil() as usize + 1;
        let mut best: Option<usize> = None;
        for n in 1..=upper {
            let periods = n as f64 * dt * cfg.f;
            if (periods - periods.round()).abs() > PERIOD_TOLERANCE || periods.round() < 1.0 {
                continue;
            }
            let err = (n as f64 * dt - target).abs();
            match best {
                Some(b) if (b as f64 * dt - target).abs() <= err => {}
                _ => best = Some(n),
            }
        }
        let n_samples = best.ok_or_else(|| {
            Error::config(format!(
                "no whole-period trace with sample interval {dt} s at {} Hz up to {} samples",
                cfg.f, upper
            ))
        })?;
        Ok(Self {
            sample_interval: dt,
            n_samples,
        })
    }

    pub fn duration(&self) -> f64 {
        self.sample_interval * self.n_samples as f64
    }

    /// Number of modulation periods spanned, if whole.
    pub fn whole_period_count(&self, cfg: &ModulationConfig) -> Option<u64> {
        let periods = self.duration() * cfg.f;
        let rounded = periods.round();
        ((periods - rounded).abs() <= PERIOD_TOLERANCE && rounded >= 1.0).then_some(rounded as u64)
    }
}

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_phase(phase: f64) -> f64 {
    let p = phase.rem_euclid(TAU);
    if p >= TAU {
        0.0
    } else {
        p
    }
}

/// Phase delay of a target at distance `d`: 4πfd/c reduced modulo 2π.
pub fn depth_to_phase(d: f64, cfg: &ModulationConfig) -> Result<f64> {
    if !(d.is_finite() && d >= 0.0) {
        return Err(Error::domain(format!(
            "distance must be finite and >= 0, got {d}"
        )));
    }
    Ok(wrap_phase(2.0 * TAU * cfg.f * d / cfg.c))
}

/// Distance for a phase delay in `[0, 2π)`: c·φ/(4πf).
pub fn phase_to_depth(phi: f64, cfg: &ModulationConfig) -> Result<f64> {
    if !(0.0..TAU).contains(&phi) {
        return Err(Error::domain(format!(
            "phase must lie in [0, 2pi), got {phi}"
        )));
    }
    Ok(cfg.c * phi / (2.0 * TAU * cfg.f))
}

/// Phase from four taps via the full-quadrant arctangent of (c3−c1, c0−c2).
pub fn four_tap_phase(taps: &TapSet) -> Result<f64> {
    let (q, i) = (taps.quadrature(), taps.in_phase());
    if q == 0.0 && i == 0.0 {
        return Err(Error::ZeroSignal);
    }
    Ok(wrap_phase(q.atan2(i)))
}

/// Correlation amplitude √((c3−c1)² + (c2−c0)²)/2.
pub fn four_tap_amplitude(taps: &TapSet) -> f64 {
    taps.quadrature().hypot(taps.in_phase()) / 2.0
}

/// Noise-free taps c_n = Γ·cos(nπ/2 + φ).
pub fn phasor_to_taps(p: &Phasor) -> TapSet {
    let (re, im) = p.to_cartesian();
    // cos(nπ/2 + φ) for n = 0..3 is cos φ, −sin φ, −cos φ, sin φ.
    TapSet {
        c0: re,
        c1: -im,
        c2: -re,
        c3: im,
    }
}

/// Phasor recovered from four taps (phase 0 when the taps carry no signal).
pub fn taps_to_phasor(taps: &TapSet) -> Phasor {
    let amplitude = four_tap_amplitude(taps);
    match four_tap_phase(taps) {
        Ok(phase) if amplitude > 0.0 => Phasor { amplitude, phase },
        _ => Phasor::zero(),
    }
}

/// Complex sum of phasors. Exact cancellation yields amplitude 0, phase 0.
pub fn superpose(components: &[Phasor]) -> Result<Phasor> {
    if components.is_empty() {
        return Err(Error::domain("superpose needs at least one phasor"));
    }
    if let [single] = components {
        return Ok(*single);
    }
    let (re, im) = components.iter().fold((0.0, 0.0), |(re, im), p| {
        let (r, i) = p.to_cartesian();
        (re + r, im + i)
    });
    Ok(Phasor::from_cartesian(re, im))
}

fn check_whole_periods(received: &SampledTrace, cfg: &ModulationConfig) -> Result<()> {
    if received.len() < 2 {
        return Err(Error::config("trace must hold at least two samples"));
    }
    if cfg.f * received.sample_interval() > 0.5 {
        return Err(Error::config(
            "trace has fewer than 2 samples per modulation period",
        ));
    }
    if received.timing().whole_period_count(cfg).is_none() {
        return Err(Error::config(format!(
            "trace spans {} modulation periods; a whole number is required",
            received.t_int() * cfg.f
        )));
    }
    Ok(())
}

/// Rectangle-rule cross correlation (1/T_int)·Σ r(t_i)·m·cos(w(t_i + τ_n))·Δt.
pub fn demodulate_trace(
    received: &SampledTrace,
    cfg: &ModulationConfig,
    tau_n: f64,
) -> Result<f64> {
    check_whole_periods(received, cfg)?;
    let w = cfg.omega();
    let dt = received.sample_interval();
    let sum: f64 = received
        .values()
        .iter()
        .enumerate()
        .map(|(i, r)| r * (w * (i as f64 * dt + tau_n)).cos())
        .sum();
    Ok(cfg.m * sum / received.len() as f64)
}

/// All four taps of a trace in one pass.
///
/// Equivalent to calling [`demodulate_trace`] at each [`ModulationConfig::tap_shift`],
/// using cos(θ + nπ/2) ∈ {cos θ, −sin θ, −cos θ, sin θ}.
pub fn demodulate_taps(received: &SampledTrace, cfg: &ModulationConfig) -> Result<TapSet> {
    check_whole_periods(received, cfg)?;
    let w = cfg.omega();
    let dt = received.sample_interval();
    let (mut sc, mut ss) = (0.0, 0.0);
    for (i, r) in received.values().iter().enumerate() {
        let (s, c) = (w * i as f64 * dt).sin_cos();
        sc += r * c;
        ss += r * s;
    }
    let scale = cfg.m / received.len() as f64;
    let (ci, cq) = (sc * scale, ss * scale);
    Ok(TapSet {
        c0: ci,
        c1: -cq,
        c2: -ci,
        c3: cq,
    })
}
