use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Result, TpeError};

/// Parameter assignment keyed by name.
pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Uniform,
    LogUniform,
    IntUniform,
}

/// One search dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
    pub min: f64,
    pub max: f64,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, kind: ParamKind, min: f64, max: f64) -> Result<Self> {
        let spec = Self {
            name: name.into(),
            kind,
            min,
            max,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn uniform(name: &str, min: f64, max: f64) -> Result<Self> {
        Self::new(name, ParamKind::Uniform, min, max)
    }

    pub fn log_uniform(name: &str, min: f64, max: f64) -> Result<Self> {
        Self::new(name, ParamKind::LogUniform, min, max)
    }

    pub fn int_uniform(name: &str, min: i64, max: i64) -> Result<Self> {
        Self::new(name, ParamKind::IntUniform, min as f64, max as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(TpeError::Space(format!("parameter '{}': {msg}", self.name)));
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return bad(format!(
                "bounds [{}, {}] must satisfy min < max",
                self.min, self.max
            ));
        }
        match self.kind {
            ParamKind::LogUniform if self.min <= 0.0 => bad("log_uniform requires min > 0".into()),
            ParamKind::IntUniform if self.min.fract() != 0.0 || self.max.fract() != 0.0 => {
                bad("int_uniform bounds must be integers".into())
            }
            _ => Ok(()),
        }
    }

    /// Bounds of the internal space the kernels live in.
    pub(crate) fn internal_bounds(&self) -> (f64, f64) {
        match self.kind {
            ParamKind::Uniform => (self.min, self.max),
            ParamKind::LogUniform => (self.min.ln(), self.max.ln()),
            ParamKind::IntUniform => (self.min - 0.5, self.max + 0.5),
        }
    }

    pub(crate) fn to_internal(&self, x: f64) -> f64 {
        match self.kind {
            ParamKind::LogUniform => x.ln(),
            ParamKind::Uniform | ParamKind::IntUniform => x,
        }
    }

    pub(crate) fn from_internal(&self, u: f64) -> f64 {
        let x = match self.kind {
            ParamKind::Uniform => u,
            ParamKind::LogUniform => u.exp(),
            ParamKind::IntUniform => u.round(),
        };
        x.clamp(self.min, self.max)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max && (self.kind != ParamKind::IntUniform || x.fract() == 0.0)
    }
}

/// Validates a whole space: non-empty, valid dimensions, unique names.
pub fn validate_space(space: &[ParamSpec]) -> Result<()> {
    if space.is_empty() {
        return Err(TpeError::Space("search space is empty".into()));
    }
    for (i, s) in space.iter().enumerate() {
        s.validate()?;
        if space[..i].iter().any(|o| o.name == s.name) {
            return Err(TpeError::Space(format!(
                "duplicate parameter name '{}'",
                s.name
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(ParamSpec::uniform("x", 0.0, 1.0).is_ok());
        assert!(ParamSpec::uniform("x", 1.0, 1.0).is_err());
        assert!(ParamSpec::log_uniform("x", 0.0, 1.0).is_err());
        assert!(ParamSpec::new("k", ParamKind::IntUniform, 0.5, 3.0).is_err());
        let a = ParamSpec::uniform("x", 0.0, 1.0).unwrap();
        assert!(validate_space(&[a.clone(), a]).is_err());
        assert!(validate_space(&[]).is_err());
    }

    #[test]
    fn internal_round_trip() {
        let s = ParamSpec::log_uniform("eta", 0.01, 0.3).unwrap();
        assert!((s.from_internal(s.to_internal(0.05)) - 0.05).abs() < 1e-15);
        let k = ParamSpec::int_uniform("k", 3, 12).unwrap();
        assert_eq!(k.internal_bounds(), (2.5, 12.5));
        assert_eq!(k.from_internal(12.49), 12.0);
        assert_eq!(k.from_internal(2.5), 3.0);
        assert!(k.contains(7.0) && !k.contains(7.5));
    }
}
