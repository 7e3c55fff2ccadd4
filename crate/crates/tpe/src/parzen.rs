//! Truncated Gaussian Parzen estimators over one search dimension.
//!
//! Kernels live in the internal space of the dimension (log values for
//! `log_uniform`, the half-integer-padded range for `int_uniform`). Each
//! kernel is renormalized to the bounds, and a prior kernel centered on the
//! bounds' midpoint with width equal to the range is always included.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use statrs::function::erf::{erf_inv, erfc};

use crate::space::{ParamKind, ParamSpec};
use crate::{Result, TpeError};

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

fn std_normal_quantile(p: f64) -> f64 {
    SQRT_2 * erf_inv(2.0 * p - 1.0)
}

#[derive(Debug, Clone)]
struct Kernel {
    mu: f64,
    sigma: f64,
    /// Φ((lo − μ)/σ).
    cdf_lo: f64,
    /// Probability mass inside the bounds.
    mass: f64,
}

/// Equal-weight mixture of truncated Gaussian kernels.
#[derive(Debug, Clone)]
pub struct ParzenEstimator {
    spec: ParamSpec,
    lo: f64,
    hi: f64,
    kernels: Vec<Kernel>,
}

impl ParzenEstimator {
    /// Builds the estimator from observed values (in user units).
    ///
    /// Each observation gets bandwidth `max(nearest-neighbour distance, range/√n)`,
    /// capped at the range.
    pub fn new(points: &[f64], spec: &ParamSpec) -> Self {
        let (lo, hi) = spec.internal_bounds();
        let range = hi - lo;
        let mut us: Vec<f64> = points.iter().map(|&x| spec.to_internal(x)).collect();
        us.sort_by(f64::total_cmp);
        let n = us.len();
        let floor = if n > 0 {
            range / (n as f64).sqrt()
        } else {
            range
        };

        let make = |mu: f64, sigma: f64| {
            let cdf_lo = std_normal_cdf((lo - mu) / sigma);
            let mass = (std_normal_cdf((hi - mu) / sigma) - cdf_lo).max(f64::MIN_POSITIVE);
            Kernel {
                mu,
                sigma,
                cdf_lo,
                mass,
            }
        };
        let mut kernels = Vec::with_capacity(n + 1);
        kernels.push(make(0.5 * (lo + hi), range));
        for (i, &u) in us.iter().enumerate() {
            let left = if i > 0 { u - us[i - 1] } else { f64::INFINITY };
            let right = if i + 1 < n {
                us[i + 1] - u
            } else {
                f64::INFINITY
            };
            let nn = left.min(right);
            let sigma = if nn.is_finite() { nn.max(floor) } else { floor }.min(range);
            kernels.push(make(u, sigma));
        }
        Self {
            spec: spec.clone(),
            lo,
            hi,
            kernels,
        }
    }

    fn pdf_internal(&self, u: f64) -> f64 {
        let s: f64 = self
            .kernels
            .iter()
            .map(|k| std_normal_pdf((u - k.mu) / k.sigma) / (k.sigma * k.mass))
            .sum();
        s / self.kernels.len() as f64
    }

    fn cdf_internal(&self, u: f64) -> f64 {
        let u = u.clamp(self.lo, self.hi);
        let s: f64 = self
            .kernels
            .iter()
            .map(|k| ((std_normal_cdf((u - k.mu) / k.sigma) - k.cdf_lo) / k.mass).clamp(0.0, 1.0))
            .sum();
        s / self.kernels.len() as f64
    }

    /// Density at `x` in user units; for integer parameters the probability of `x`.
    pub fn pdf(&self, x: f64) -> Result<f64> {
        if !self.spec.contains(x) {
            return Err(TpeError::Domain(format!(
                "{x} is outside parameter '{}' bounds [{}, {}]",
                self.spec.name, self.spec.min, self.spec.max
            )));
        }
        Ok(match self.spec.kind {
            ParamKind::Uniform => self.pdf_internal(x),
            ParamKind::LogUniform => self.pdf_internal(x.ln()) / x,
            ParamKind::IntUniform => self.cdf_internal(x + 0.5) - self.cdf_internal(x - 0.5),
        })
    }

    /// Draws one value in user units.
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        let k = &self.kernels[rng.random_range(0..self.kernels.len())];
        let p = k.cdf_lo + rng.random::<f64>() * k.mass;
        let z = std_normal_quantile(p.clamp(1e-300, 1.0 - 1e-16));
        let u = if z.is_finite() {
            k.mu + k.sigma * z
        } else {
            k.mu
        };
        self.spec.from_internal(u.clamp(self.lo, self.hi))
    }
}

/// Density of the Parzen mixture over `points` at `x`.
pub fn parzen_pdf(points: &[f64], spec: &ParamSpec, x: f64) -> Result<f64> {
    spec.validate()?;
    ParzenEstimator::new(points, spec).pdf(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        // Composite Simpson.
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn prior_only_is_nearly_flat() {
        let s = ParamSpec::uniform("x", 0.0, 1.0).unwrap();
        let mid = parzen_pdf(&[], &s, 0.5).unwrap();
        let edge = parzen_pdf(&[], &s, 0.0).unwrap();
        assert!(edge / mid > 0.85 && mid < 1.2, "{edge} {mid}");
    }

    #[test]
    fn single_midpoint_is_the_mode() {
        let s = ParamSpec::uniform("x", -2.0, 6.0).unwrap();
        let at = parzen_pdf(&[2.0], &s, 2.0).unwrap();
        for x in [-2.0, -1.0, 0.0, 1.0, 1.9, 2.1, 3.0, 5.0, 6.0] {
            assert!(parzen_pdf(&[2.0], &s, x).unwrap() < at);
        }
    }

    #[test]
    fn integrates_to_one() {
        let pts = [0.31, 0.29, 0.35, 0.8, 0.02];
        let s = ParamSpec::uniform("x", 0.0, 1.0).unwrap();
        let total = integrate(|x| parzen_pdf(&pts, &s, x).unwrap(), 0.0, 1.0, 4000);
        assert!((total - 1.0).abs() < 1e-3, "{total}");

        let s = ParamSpec::log_uniform("eta", 0.01, 0.3).unwrap();
        let pts = [0.02, 0.05, 0.051, 0.2];
        let total = integrate(|x| parzen_pdf(&pts, &s, x).unwrap(), 0.01, 0.3, 20000);
        assert!((total - 1.0).abs() < 1e-3, "{total}");

        let s = ParamSpec::int_uniform("depth", 3, 12).unwrap();
        let pts = [4.0, 4.0, 9.0];
        let total: f64 = (3..=12)
            .map(|k| parzen_pdf(&pts, &s, k as f64).unwrap())
            .sum();
        assert!((total - 1.0).abs() < 1e-9, "{total}");
    }

    #[test]
    fn out_of_bounds_is_rejected() {
        let s = ParamSpec::uniform("x", 0.0, 1.0).unwrap();
        assert!(matches!(
            parzen_pdf(&[0.5], &s, 1.5),
            Err(TpeError::Domain(_))
        ));
        let k = ParamSpec::int_uniform("k", 1, 5).unwrap();
        assert!(parzen_pdf(&[2.0], &k, 2.5).is_err());
    }

    #[test]
    fn samples_respect_bounds_and_kinds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for s in [
            ParamSpec::uniform("a", 0.0, 5.0).unwrap(),
            ParamSpec::log_uniform("b", 1e-3, 10.0).unwrap(),
            ParamSpec::int_uniform("c", 100, 1000).unwrap(),
        ] {
            let est = ParzenEstimator::new(&[s.min, s.max, s.min], &s);
            for _ in 0..2000 {
                let x = est.sample(&mut rng);
                assert!(s.contains(x), "{} -> {x}", s.name);
            }
        }
    }
}
