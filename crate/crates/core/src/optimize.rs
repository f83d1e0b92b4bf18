//! Fitting the noise scale and the debiasing / post-nonlinear parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::divergence::{MeasureValue, Objective, Params, PnlTransform};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ThetaMethod {
    /// Minimizer of the quadratic in `theta`, clamped to the range.
    ClosedForm,
    /// Bisection on the sign of the analytic derivative.
    Bisection,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum LrSchedule {
    Constant,
    /// Triangular cycle between `0.1 * step_size` and `step_size`.
    Cyclic { period: usize },
}

impl LrSchedule {
    pub fn rate(&self, step_size: f64, iteration: usize) -> f64 {
        match *self {
            Self::Constant => step_size,
            Self::Cyclic { period } => {
                let period = period.max(2);
                let phase = (iteration % period) as f64 / period as f64;
                let tri = 1.0 - (2.0 * phase - 1.0).abs();
                let lo = 0.1 * step_size;
                lo + (step_size - lo) * tri
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitConfig {
    pub theta_range: (f64, f64),
    pub theta_method: ThetaMethod,
    /// Gradient-descent learning rate for the debiasing and transform parameters.
    pub step_size: f64,
    /// Gradient steps between two refits of `theta`.
    pub theta_update_period: usize,
    pub max_iters: usize,
    /// Stop when the objective changes less than this between two refits.
    pub tolerance: f64,
    pub lr_schedule: LrSchedule,
    /// Whether the debiasing slope is fitted.
    pub debias: bool,
    /// Extra randomized starting points, tried after the fixed one.
    pub restarts: usize,
    pub restart_seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            theta_range: (1e-8, 100.0),
            theta_method: ThetaMethod::ClosedForm,
            step_size: 1.0,
            theta_update_period: 10,
            max_iters: 500,
            tolerance: 1e-8,
            lr_schedule: LrSchedule::Constant,
            debias: false,
            restarts: 0,
            restart_seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.theta_range;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::Config(format!("bad theta range [{lo}, {hi}]")));
        }
        if self.max_iters == 0 || self.theta_update_period == 0 {
            return Err(Error::Config(
                "max_iters and theta_update_period must be at least 1".into(),
            ));
        }
        if !(self.step_size > 0.0 && self.tolerance > 0.0) {
            return Err(Error::Config("step size and tolerance must be positive".into()));
        }
        Ok(())
    }
}

/// Minimizes the raw measure over `theta` with the other parameters of
/// `params` held fixed.
pub fn fit_theta(objective: &Objective, params: &Params, config: &FitConfig) -> Result<f64> {
    let (lo, hi) = config.theta_range;
    match config.theta_method {
        ThetaMethod::ClosedForm => {
            let theta = objective.theta_closed_form(params);
            if !theta.is_finite() {
                return Err(Error::Numeric(format!("closed-form theta is {theta}")));
            }
            Ok(theta.clamp(lo, hi))
        }
        ThetaMethod::Bisection => bisect_theta(objective, params, lo, hi),
    }
}

fn bisect_theta(objective: &Objective, params: &Params, lo: f64, hi: f64) -> Result<f64> {
    let slope = |theta: f64| -> Result<f64> {
        let (raw, g) = objective.gradient(&Params { theta, ..*params });
        if raw.is_finite() && g.theta.is_finite() {
            Ok(g.theta)
        } else {
            Err(Error::Numeric(format!("non-finite objective at theta = {theta}")))
        }
    };
    if slope(lo)? >= 0.0 {
        return Ok(lo);
    }
    if slope(hi)? <= 0.0 {
        return Ok(hi);
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if slope(mid)? > 0.0 {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Outcome of [`fit_joint`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointFit {
    pub params: Params,
    pub measure: MeasureValue,
    /// Best raw objective seen so far, recorded at each `theta` refit.
    pub history: Vec<f64>,
    pub iterations: usize,
}

/// Alternating fit: gradient steps on the debiasing slope and transform
/// parameters with `theta` held fixed, `theta` refitted every
/// `theta_update_period` steps. Returns the parameters with the smallest raw
/// measure observed; the normalized value is reported alongside.
///
/// With nothing to fit besides `theta` this is exactly [`fit_theta`].
pub fn fit_joint(objective: &Objective, init: &Params, config: &FitConfig) -> Result<JointFit> {
    config.validate()?;
    let mut best = descend(objective, init, config)?;
    if config.restarts > 0 && has_free_params(init, config) {
        let mut rng = ChaCha8Rng::seed_from_u64(config.restart_seed);
        for _ in 0..config.restarts {
            let mut start = *init;
            if config.debias {
                start.debias.w = rng.random_range(-1.0..1.0);
            }
            if init.pnl.is_some() {
                start.pnl = Some(PnlTransform::new(
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                ));
            }
            let fit = descend(objective, &start, config)?;
            if fit.measure.raw < best.measure.raw {
                best = fit;
            }
        }
    }
    Ok(best)
}

fn has_free_params(params: &Params, config: &FitConfig) -> bool {
    config.debias || params.pnl.is_some()
}

fn descend(objective: &Objective, init: &Params, config: &FitConfig) -> Result<JointFit> {
    let mut p = *init;
    p.theta = fit_theta(objective, &p, config)?;
    let first = objective.measure(&p);
    if !first.normalized.is_finite() {
        return Err(Error::Diverged { iteration: 0 });
    }
    let mut best = (first, p);
    let mut history = vec![first.raw];
    if !has_free_params(&p, config) {
        return Ok(JointFit {
            params: p,
            measure: first,
            history,
            iterations: 0,
        });
    }

    let mut last = first.raw;
    let mut iterations = 0;
    for it in 0..config.max_iters {
        iterations = it + 1;
        let (raw, g) = objective.gradient(&p);
        if !raw.is_finite() {
            return Err(Error::Diverged { iteration: it });
        }
        let lr = config.lr_schedule.rate(config.step_size, it);
        if config.debias {
            p.debias.w -= lr * g.w;
        }
        if let Some(t) = p.pnl.as_mut() {
            t.a -= lr * g.omega[0];
            t.b -= lr * g.omega[1];
            t.c -= lr * g.omega[2];
        }
        if (it + 1) % config.theta_update_period == 0 {
            p.theta = fit_theta(objective, &p, config)?;
            let m = objective.measure(&p);
            if !m.normalized.is_finite() {
                return Err(Error::Diverged { iteration: it });
            }
            if m.raw < best.0.raw {
                best = (m, p);
            }
            history.push(best.0.raw);
            if (last - m.raw).abs() < config.tolerance {
                break;
            }
            last = m.raw;
        }
    }
    Ok(JointFit {
        params: best.1,
        measure: best.0,
        history,
        iterations,
    })
}
