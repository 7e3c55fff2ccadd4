//! Avalanche-photodiode response and noise chain.
//!
//! Optical power is turned into photons per transit window, then into
//! photoelectrons, amplified by the avalanche process, joined by dark and
//! TIA electrons and finally converted to a voltage through the TIA gain.
//! Thermal and residual noise are added on the voltage side.
//!
//! [`simulate_measurement`] runs the chain over a whole trace (or its
//! closed-form tap statistics in [`GenerationMode::Analytic`]) and returns the
//! four-tap depth and amplitude for one modulation frequency.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::signal::{
    demodulate_taps, four_tap_amplitude, four_tap_phase, phase_to_depth, phasor_to_taps,
    ModulationConfig, TapSet, TraceTiming, SPEED_OF_LIGHT,
};
use crate::transport::{net_phasor, optical_power_at, TwoPathScene};
use crate::{Error, Result};

/// Elementary charge used throughout the sensor chain (C).
pub const ELECTRON_CHARGE: f64 = 1.602_176_63e-19;

/// Modulation frequencies of the four channels (Hz), ascending.
pub const DEFAULT_FREQUENCIES_HZ: [f64; 4] = [12.5e6, 18.75e6, 25e6, 31.25e6];

/// Physical constants and noise magnitudes of the APD receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorParams {
    /// Quantum efficiency η.
    pub eta: f64,
    /// Avalanche gain M.
    pub m_gain: f64,
    /// Excess noise factor F.
    pub f_excess: f64,
    /// Elementary charge (C).
    pub q: f64,
    /// Carrier transit time (s); also the trace sample interval.
    pub t_transit: f64,
    /// Active area (cm²).
    pub p_a: f64,
    /// Dark-current figure of merit (A/cm²).
    pub i_fm: f64,
    /// Temperature (K).
    pub temp: f64,
    /// Bandgap energy (J).
    pub e_g: f64,
    /// Boltzmann constant (J/K).
    pub k_b: f64,
    /// Bandwidth (Hz).
    pub bw: f64,
    /// TIA noise spectral intensity (A²/Hz).
    pub s_tia: f64,
    /// Circuit load (Ω).
    pub r_load: f64,
    /// TIA gain (V/A).
    pub g_tia: f64,
    /// Laser wavelength (m).
    pub wavelength: f64,
    /// Planck constant (J·s).
    pub h_planck: f64,
    /// Std of the background-light electron noise.
    pub eps_back_sigma: f64,
    /// Std of the residual voltage noise (V).
    pub eps_rand_sigma: f64,
    /// Target trace duration (s); rounded to whole modulation periods.
    pub integration_time: f64,
}

impl Default for SensorParams {
    fn default() -> Self {
        Self {
            eta: 0.67,
            m_gain: 50.0,
            f_excess: 4.862,
            q: ELECTRON_CHARGE,
            t_transit: 6e-9,
            p_a: 0.7854e-2,
            i_fm: 1e-9,
            temp: 297.0,
            e_g: 1.1116 * ELECTRON_CHARGE,
            k_b: 1.380_649e-23,
            bw: 50e6,
            s_tia: 4.314e-24,
            r_load: 50.0,
            g_tia: 5e4,
            wavelength: 852e-9,
            h_planck: 6.626_068_96e-34,
            eps_back_sigma: 0.0,
            eps_rand_sigma: 0.0,
            integration_time: 16e-6,
        }
    }
}

impl SensorParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m_gain", self.m_gain),
            ("q", self.q),
            ("t_transit", self.t_transit),
            ("p_a", self.p_a),
            ("i_fm", self.i_fm),
            ("temp", self.temp),
            ("e_g", self.e_g),
            ("k_b", self.k_b),
            ("r_load", self.r_load),
            ("g_tia", self.g_tia),
            ("wavelength", self.wavelength),
            ("h_planck", self.h_planck),
            ("integration_time", self.integration_time),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!(
                    "sensor parameter {name} must be > 0, got {v}"
                )));
            }
        }
        let non_negative = [
            ("bw", self.bw),
            ("s_tia", self.s_tia),
            ("eps_back_sigma", self.eps_back_sigma),
            ("eps_rand_sigma", self.eps_rand_sigma),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!(
                    "sensor parameter {name} must be >= 0, got {v}"
                )));
            }
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::config(format!(
                "quantum efficiency must be in (0, 1], got {}",
                self.eta
            )));
        }
        if !(self.f_excess.is_finite() && self.f_excess >= 1.0) {
            return Err(Error::config(format!(
                "excess noise factor must be >= 1, got {}",
                self.f_excess
            )));
        }
        Ok(())
    }

    /// Photon energy E_p = h·c/λ (J).
    pub fn photon_energy(&self) -> f64 {
        self.h_planck * SPEED_OF_LIGHT / self.wavelength
    }

    /// Volts per electron per transit window, q·G/t_transit.
    pub fn volts_per_electron(&self) -> f64 {
        self.q * self.g_tia / self.t_transit
    }

    /// Unrounded dark electron mean P_A·I_FM·T^{3/2}·t·exp(−E_g/2k_BT)/q.
    pub fn dark_electron_mean(&self) -> f64 {
        let charge = self.p_a
            * self.i_fm
            * self.temp.powf(1.5)
            * self.t_transit
            * (-self.e_g / (2.0 * self.k_b * self.temp)).exp();
        charge / self.q
    }

    /// Std of TIA noise in electrons, √(t²·S_TIA·BW)/q.
    pub fn tia_sigma_electrons(&self) -> f64 {
        (self.t_transit * self.t_transit * self.s_tia * self.bw).sqrt() / self.q
    }

    /// RMS thermal noise current √(4k_B·T·BW/R_Load) (A).
    pub fn thermal_current(&self) -> f64 {
        (4.0 * self.k_b * self.temp * self.bw / self.r_load).sqrt()
    }

    /// Thermal noise voltage std G·I_thermal (V).
    pub fn thermal_sigma_volts(&self) -> f64 {
        self.g_tia * self.thermal_current()
    }

    /// Noise-free volts per watt of received power, η·M·q·G/E_p.
    pub fn volts_per_watt(&self) -> f64 {
        self.eta * self.m_gain * self.q * self.g_tia / self.photon_energy()
    }
}

/// Independent switches for each noise source.
///
/// `quantize_counts` controls rounding of photon and electron counts to
/// integers. [`NoiseToggles::noise_off`] keeps it on; [`NoiseToggles::all_off`]
/// also disables it, making the chain exactly linear in optical power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseToggles {
    pub shot: bool,
    pub avalanche: bool,
    pub dark: bool,
    pub tia: bool,
    pub thermal: bool,
    pub background: bool,
    pub residual: bool,
    pub quantize_counts: bool,
}

impl Default for NoiseToggles {
    fn default() -> Self {
        Self::all_on()
    }
}

impl NoiseToggles {
    pub fn all_on() -> Self {
        Self {
            shot: true,
            avalanche: true,
            dark: true,
            tia: true,
            thermal: true,
            background: true,
            residual: true,
            quantize_counts: true,
        }
    }

    /// Every random source disabled; counts are still rounded.
    pub fn noise_off() -> Self {
        Self {
            shot: false,
            avalanche: false,
            dark: false,
            tia: false,
            thermal: false,
            background: false,
            residual: false,
            quantize_counts: true,
        }
    }

    /// Fully deterministic and linear chain.
    pub fn all_off() -> Self {
        Self {
            quantize_counts: false,
            ..Self::noise_off()
        }
    }

    pub fn any_noise(&self) -> bool {
        self.shot
            || self.avalanche
            || self.dark
            || self.tia
            || self.thermal
            || self.background
            || self.residual
    }
}

/// How a measurement is produced from a scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GenerationMode {
    /// Per-sample noise chain over a full trace, then demodulation.
    Trace,
    /// Noise-free phasor taps plus Gaussian tap noise of matching variance.
    #[default]
    Analytic,
}

impl std::str::FromStr for GenerationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trace" => Ok(Self::Trace),
            "analytic" => Ok(Self::Analytic),
            other => Err(Error::config(format!(
                "unknown generation mode '{other}' (expected trace|analytic)"
            ))),
        }
    }
}

impl std::fmt::Display for GenerationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Trace => "trace",
            Self::Analytic => "analytic",
        })
    }
}

/// Depth and amplitude reported at one modulation frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub depth: f64,
    pub amplitude: f64,
    pub f: f64,
}

/// Validated sensor parameters with their derived constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ApdSensor {
    params: SensorParams,
    toggles: NoiseToggles,
    photon_energy: f64,
    volts_per_electron: f64,
    dark_mean: f64,
    tia_sigma: f64,
    thermal_sigma: f64,
}

impl ApdSensor {
    pub fn new(params: SensorParams, toggles: NoiseToggles) -> Result<Self> {
        params.validate()?;
        let raw_dark = params.dark_electron_mean();
        Ok(Self {
            params,
            toggles,
            photon_energy: params.photon_energy(),
            volts_per_electron: params.volts_per_electron(),
            dark_mean: if toggles.quantize_counts {
                raw_dark.round()
            } else {
                raw_dark
            },
            tia_sigma: params.tia_sigma_electrons(),
            thermal_sigma: params.thermal_sigma_volts(),
        })
    }

    pub fn params(&self) -> &SensorParams {
        &self.params
    }

    pub fn toggles(&self) -> &NoiseToggles {
        &self.toggles
    }

    /// Dark electron mean as used by the chain (rounded when counts are quantized).
    pub fn dark_mean(&self) -> f64 {
        self.dark_mean
    }

    #[inline]
    fn quantize(&self, x: f64) -> f64 {
        if self.toggles.quantize_counts {
            x.round()
        } else {
            x
        }
    }

    /// Full chain for one transit window, returning the output voltage.
    pub fn voltage_sample(&self, p_opt: f64, rng: &mut impl Rng) -> f64 {
        let p = &self.params;
        let t = &self.toggles;

        let mut n_ph = self.quantize(p_opt * p.t_transit / self.photon_energy);
        if t.shot {
            n_ph = poisson(n_ph, rng);
        }

        let mut n_e = n_ph * p.eta;
        if t.background && p.eps_back_sigma > 0.0 {
            n_e += p.eps_back_sigma * gauss(rng);
        }
        let n_e = self.quantize(n_e).max(0.0);

        let mut n_apd = p.m_gain * n_e;
        if t.avalanche && n_e > 0.0 {
            n_apd += p.m_gain * (p.f_excess * n_e).sqrt() * gauss(rng);
        }
        let n_apd = self.quantize(n_apd).max(0.0);

        let n_dark = if t.dark {
            poisson(self.dark_mean, rng)
        } else {
            self.dark_mean
        };
        let n_tia = if t.tia && self.tia_sigma > 0.0 {
            self.quantize(self.tia_sigma * gauss(rng))
        } else {
            0.0
        };

        let mut v = (n_apd + n_dark + n_tia) * self.volts_per_electron;
        if t.thermal && self.thermal_sigma > 0.0 {
            v += self.thermal_sigma * gauss(rng);
        }
        if t.residual && p.eps_rand_sigma > 0.0 {
            v += p.eps_rand_sigma * gauss(rng);
        }
        v
    }

    /// Mean per-sample voltage variance for a mean photon count `n_mean`,
    /// counting only the enabled noise sources.
    pub fn voltage_variance(&self, n_mean: f64) -> f64 {
        let p = &self.params;
        let t = &self.toggles;
        let mut electrons = 0.0;
        if t.shot {
            electrons += p.eta * p.eta * n_mean;
        }
        if t.background {
            electrons += p.eps_back_sigma * p.eps_back_sigma;
        }
        let mut amplified = p.m_gain * p.m_gain * electrons;
        if t.avalanche {
            amplified += p.m_gain * p.m_gain * p.f_excess * p.eta * n_mean;
        }
        if t.dark {
            amplified += self.dark_mean;
        }
        if t.tia {
            amplified += self.tia_sigma * self.tia_sigma;
        }
        let k = self.volts_per_electron;
        let mut var = k * k * amplified;
        if t.thermal {
            var += self.thermal_sigma * self.thermal_sigma;
        }
        if t.residual {
            var += p.eps_rand_sigma * p.eps_rand_sigma;
        }
        var
    }
}

#[inline]
fn gauss(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

#[inline]
fn poisson(mean: f64, rng: &mut impl Rng) -> f64 {
    if mean > 0.0 {
        Poisson::new(mean).map(|d| d.sample(rng)).unwrap_or(mean)
    } else {
        0.0
    }
}

/// Calibration power p0 (W) mapping a unit-reflectance target at 1 m to a
/// noise-free demodulated amplitude of `gamma_r`.
pub fn calibrate(params: &SensorParams, cfg: &ModulationConfig, gamma_r: f64) -> f64 {
    2.0 * gamma_r / (params.volts_per_watt() * cfg.alpha * cfg.m)
}

fn non_negative_power(p_opt: f64) -> Result<()> {
    if p_opt.is_finite() && p_opt >= 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "optical power must be finite and >= 0, got {p_opt}"
        )))
    }
}

/// Photons received in one transit window, round(p·t/E_p).
pub fn photon_count(p_opt: f64, params: &SensorParams) -> Result<u64> {
    non_negative_power(p_opt)?;
    Ok((p_opt * params.t_transit / params.photon_energy()).round() as u64)
}

/// One Poisson draw with mean `n`.
pub fn apply_shot_noise(n: u64, rng: &mut impl Rng) -> u64 {
    poisson(n as f64, rng) as u64
}

/// One background-light electron perturbation N(0, ε_back²), unclamped.
pub fn background_electrons(params: &SensorParams, rng: &mut impl Rng) -> f64 {
    if params.eps_back_sigma > 0.0 {
        params.eps_back_sigma * gauss(rng)
    } else {
        0.0
    }
}

/// round(n·η + ε_back), clamped at 0.
pub fn photoelectron_count(n_shot: u64, params: &SensorParams, rng: &mut impl Rng) -> u64 {
    (n_shot as f64 * params.eta + background_electrons(params, rng))
        .round()
        .max(0.0) as u64
}

/// Avalanche mean M·n_e.
pub fn avalanche_mean(n_e: u64, params: &SensorParams) -> u64 {
    (params.m_gain * n_e as f64).round() as u64
}

/// One draw of N(M·n_e, M²·F·n_e), rounded and clamped at 0.
pub fn avalanche_multiply(n_e: u64, params: &SensorParams, rng: &mut impl Rng) -> u64 {
    let n = n_e as f64;
    let draw = params.m_gain * n + params.m_gain * (params.f_excess * n).sqrt() * gauss(rng);
    draw.round().max(0.0) as u64
}

/// Voltage n·q/t_transit·G.
pub fn electrons_to_voltage(n: f64, params: &SensorParams) -> f64 {
    n * params.volts_per_electron()
}

/// Poisson draw around the rounded dark electron mean.
pub fn dark_electron_count(params: &SensorParams, rng: &mut impl Rng) -> u64 {
    poisson(params.dark_electron_mean().round(), rng) as u64
}

/// Zero-mean TIA noise in electrons, rounded.
pub fn tia_noise_electrons(params: &SensorParams, rng: &mut impl Rng) -> i64 {
    let sigma = params.tia_sigma_electrons();
    if sigma > 0.0 {
        (sigma * gauss(rng)).round() as i64
    } else {
        0
    }
}

/// Zero-mean thermal noise voltage with std G·I_thermal.
pub fn thermal_noise_voltage(params: &SensorParams, rng: &mut impl Rng) -> f64 {
    let sigma = params.thermal_sigma_volts();
    if sigma > 0.0 {
        sigma * gauss(rng)
    } else {
        0.0
    }
}

/// Total APD output voltage for instantaneous power `p_opt`.
pub fn apd_voltage_sample(p_opt: f64, sensor: &ApdSensor, rng: &mut impl Rng) -> Result<f64> {
    non_negative_power(p_opt)?;
    Ok(sensor.voltage_sample(p_opt, rng))
}

/// One modulation frequency together with its trace sampling grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub cfg: ModulationConfig,
    pub timing: TraceTiming,
}

impl Channel {
    /// Samples every transit window over the whole-period span nearest the
    /// sensor's integration time.
    pub fn new(cfg: ModulationConfig, params: &SensorParams) -> Result<Self> {
        cfg.validate()?;
        let timing =
            TraceTiming::nearest_whole_periods(&cfg, params.t_transit, params.integration_time)?;
        Ok(Self { cfg, timing })
    }

    pub fn standard_set(params: &SensorParams) -> Result<Vec<Self>> {
        DEFAULT_FREQUENCIES_HZ
            .iter()
            .map(|&f| Self::new(ModulationConfig::standard(f), params))
            .collect()
    }
}

/// Taps for one scene at one channel, before phase extraction.
pub fn measure_taps(
    scene: &TwoPathScene,
    channel: &Channel,
    sensor: &ApdSensor,
    rng: &mut impl Rng,
    mode: GenerationMode,
) -> Result<TapSet> {
    scene.validate()?;
    let cfg = &channel.cfg;
    let p0 = calibrate(sensor.params(), cfg, scene.gamma_r);
    match mode {
        GenerationMode::Trace => {
            let trace = crate::signal::SampledTrace::from_fn(channel.timing, |t| {
                sensor.voltage_sample(optical_power_at(scene, cfg, p0, t), rng)
            });
            demodulate_taps(&trace, cfg)
        }
        GenerationMode::Analytic => {
            let mut taps = phasor_to_taps(&net_phasor(scene, cfg)?);
            if sensor.toggles().any_noise() {
                let p = sensor.params();
                let dc_power =
                    p0 * (scene.rho_sas + scene.mpi_product()) / (scene.d_as * scene.d_as);
                let n_mean = dc_power * p.t_transit / p.photon_energy();
                let var = sensor.voltage_variance(n_mean);
                let sigma = cfg.m * (var / (2.0 * channel.timing.n_samples as f64)).sqrt();
                let e_i = sigma * gauss(rng);
                let e_q = sigma * gauss(rng);
                taps.c0 += e_i;
                taps.c2 -= e_i;
                taps.c1 += e_q;
                taps.c3 -= e_q;
            }
            Ok(taps)
        }
    }
}

/// Depth and amplitude of one scene at one channel.
pub fn simulate_measurement(
    scene: &TwoPathScene,
    channel: &Channel,
    sensor: &ApdSensor,
    rng: &mut impl Rng,
    mode: GenerationMode,
) -> Result<MeasurementRecord> {
    let taps = measure_taps(scene, channel, sensor, rng, mode)?;
    let phase = four_tap_phase(&taps)?;
    Ok(MeasurementRecord {
        depth: phase_to_depth(phase, &channel.cfg)?,
        amplitude: four_tap_amplitude(&taps),
        f: channel.cfg.f,
    })
}
