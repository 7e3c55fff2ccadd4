use std::fmt::Display;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::parzen::ParzenEstimator;
use crate::space::{validate_space, ParamSpec, Params};
use crate::{Result, TpeError};

/// One evaluated point. `loss` is `None` when the objective failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub iteration: usize,
    pub params: Params,
    pub loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TpeConfig {
    /// Total number of trials.
    pub mu_th: usize,
    pub n_startup: usize,
    pub gamma_quantile: f64,
    pub n_candidates: usize,
    pub seed: u64,
}

impl Default for TpeConfig {
    fn default() -> Self {
        Self {
            mu_th: 30,
            n_startup: 10,
            gamma_quantile: 0.25,
            n_candidates: 24,
            seed: 0,
        }
    }
}

impl TpeConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TpeError::Config(m.into()));
        if self.mu_th == 0 {
            return bad("mu_th must be at least 1");
        }
        if self.n_startup >= self.mu_th {
            return bad("n_startup must be smaller than mu_th");
        }
        if !(self.gamma_quantile > 0.0 && self.gamma_quantile < 1.0) {
            return bad("gamma_quantile must lie in (0, 1)");
        }
        if self.n_candidates == 0 {
            return bad("n_candidates must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub best_params: Params,
    pub best_loss: f64,
    pub history: Vec<Trial>,
}

fn prior_draw(space: &[ParamSpec], rng: &mut impl Rng) -> Params {
    space
        .iter()
        .map(|s| {
            let (lo, hi) = s.internal_bounds();
            (s.name.clone(), s.from_internal(rng.random_range(lo..hi)))
        })
        .collect()
}

/// Proposes the next parameter set given the trials so far.
///
/// While fewer than `n_startup` trials exist (or none has completed) this is
/// a uniform draw over the space.
pub fn suggest(
    history: &[Trial],
    space: &[ParamSpec],
    cfg: &TpeConfig,
    rng: &mut impl Rng,
) -> Params {
    let mut done: Vec<(f64, &Trial)> = history
        .iter()
        .filter_map(|t| t.loss.map(|l| (l, t)))
        .collect();
    if history.len() < cfg.n_startup || done.is_empty() {
        return prior_draw(space, rng);
    }
    done.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.iteration.cmp(&b.1.iteration)));
    let n_good = ((cfg.gamma_quantile * done.len() as f64).ceil() as usize).clamp(1, done.len());
    let (good, bad) = done.split_at(n_good);

    let models: Vec<(ParzenEstimator, ParzenEstimator)> = space
        .iter()
        .map(|s| {
            let pts = |set: &[(f64, &Trial)]| -> Vec<f64> {
                set.iter().map(|(_, t)| t.params[&s.name]).collect()
            };
            (
                ParzenEstimator::new(&pts(good), s),
                ParzenEstimator::new(&pts(bad), s),
            )
        })
        .collect();

    let mut best: Option<(f64, Params)> = None;
    for _ in 0..cfg.n_candidates {
        let mut cand = Params::new();
        let mut score = 0.0;
        for (s, (l, g)) in space.iter().zip(&models) {
            let x = l.sample(rng);
            let (pl, pg) = (l.pdf(x).unwrap_or(0.0), g.pdf(x).unwrap_or(0.0));
            score += pl.max(f64::MIN_POSITIVE).ln() - pg.max(f64::MIN_POSITIVE).ln();
            cand.insert(s.name.clone(), x);
        }
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, cand));
        }
    }
    best.map(|(_, p)| p).expect("n_candidates >= 1")
}

fn run<E, F, S>(
    mut objective: F,
    space: &[ParamSpec],
    n: usize,
    seed: u64,
    mut propose: S,
) -> Result<OptimizeResult>
where
    E: Display,
    F: FnMut(&Params) -> std::result::Result<f64, E>,
    S: FnMut(&[Trial], &mut ChaCha8Rng) -> Params,
{
    validate_space(space)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut history: Vec<Trial> = Vec::with_capacity(n);
    for iteration in 0..n {
        let params = propose(&history, &mut rng);
        let (loss, error) = match objective(&params) {
            Ok(l) if l.is_finite() => (Some(l), None),
            Ok(l) => (
                None,
                Some(format!("objective returned non-finite loss {l}")),
            ),
            Err(e) => (None, Some(e.to_string())),
        };
        history.push(Trial {
            iteration,
            params,
            loss,
            error,
        });
    }
    let best = history
        .iter()
        .filter_map(|t| t.loss.map(|l| (l, t)))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or(TpeError::NoCompletedTrials)?;
    Ok(OptimizeResult {
        best_params: best.1.params.clone(),
        best_loss: best.0,
        history,
    })
}

/// Runs exactly `cfg.mu_th` sequential trials and returns the best one.
///
/// Failing or non-finite evaluations are kept in the history with `loss = None`
/// and ignored by the density models.
pub fn optimize<E, F>(objective: F, space: &[ParamSpec], cfg: &TpeConfig) -> Result<OptimizeResult>
where
    E: Display,
    F: FnMut(&Params) -> std::result::Result<f64, E>,
{
    cfg.validate()?;
    run(objective, space, cfg.mu_th, cfg.seed, |h, rng| {
        suggest(h, space, cfg, rng)
    })
}

/// Pure prior sampling with the same bookkeeping as [`optimize`].
pub fn random_search<E, F>(
    objective: F,
    space: &[ParamSpec],
    n_trials: usize,
    seed: u64,
) -> Result<OptimizeResult>
where
    E: Display,
    F: FnMut(&Params) -> std::result::Result<f64, E>,
{
    run(objective, space, n_trials, seed, |_, rng| {
        prior_draw(space, rng)
    })
}

/// Writes `iteration,loss,<params in space order>`; failed trials get an empty loss.
pub fn write_history_csv(mut w: impl Write, history: &[Trial], space: &[ParamSpec]) -> Result<()> {
    write!(w, "iteration,loss")?;
    for s in space {
        write!(w, ",{}", s.name)?;
    }
    writeln!(w)?;
    for t in history {
        write!(w, "{},", t.iteration)?;
        if let Some(l) = t.loss {
            write!(w, "{l}")?;
        }
        for s in space {
            match t.params.get(&s.name) {
                Some(v) => write!(w, ",{v}")?,
                None => write!(w, ",")?,
            }
        }
        writeln!(w)?;
    }
    Ok(())
}
