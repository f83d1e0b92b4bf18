//! Scoring both causal directions and turning the scores into a verdict.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::divergence::{DebiasAnchor, DebiasFn, Objective, Params, PnlTransform};
use crate::error::{Error, Result};
use crate::noise::NoiseSource;
use crate::optimize::{fit_joint, FitConfig, LrSchedule};
use crate::pairdata::{default_batch_frac, make_batches, select_positions, SamplePair};
use crate::mix_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Mode {
    /// Additive noise.
    Anm,
    /// Additive noise after a fitted `y + a tanh(b y + c)` transform.
    Pnl,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Anm => "anm",
            Self::Pnl => "pnl",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "anm" => Ok(Self::Anm),
            "pnl" => Ok(Self::Pnl),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BatchFrac {
    /// Chosen from the sample size by [`default_batch_frac`].
    Auto,
    Fixed(f64),
}

impl BatchFrac {
    pub fn resolve(&self, n: usize) -> f64 {
        match *self {
            Self::Auto => default_batch_frac(n),
            Self::Fixed(f) => f,
        }
    }
}

impl FromStr for BatchFrac {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Self::Auto);
        }
        s.parse::<f64>()
            .ok()
            .filter(|f| *f > 0.0 && *f <= 1.0)
            .map(Self::Fixed)
            .ok_or_else(|| Error::Config(format!("batch fraction must be \"auto\" or in (0, 1], got {s:?}")))
    }
}

impl fmt::Display for BatchFrac {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Auto => f.write_str("auto"),
            Self::Fixed(v) => write!(f, "{v}"),
        }
    }
}

/// Everything needed to score one direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub noise: NoiseSource,
    pub batch_frac: BatchFrac,
    pub max_positions: usize,
    pub fit: FitConfig,
    pub debias_anchor: DebiasAnchor,
    /// Starting point of the fit; `theta` is refitted before any step.
    pub init_w: f64,
    pub init_pnl: PnlTransform,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Anm,
            noise: NoiseSource::Normal,
            batch_frac: BatchFrac::Auto,
            max_positions: 50,
            fit: FitConfig::default(),
            debias_anchor: DebiasAnchor::Row,
            init_w: 0.0,
            init_pnl: PnlTransform::new(0.1, 0.1, 0.0),
        }
    }
}

impl PipelineConfig {
    pub fn anm(noise: NoiseSource) -> Self {
        Self {
            noise,
            ..Self::default()
        }
    }

    /// Post-nonlinear mode with a fitted debiasing slope and cyclic learning rate.
    pub fn pnl(noise: NoiseSource) -> Self {
        let mut cfg = Self {
            mode: Mode::Pnl,
            noise,
            ..Self::default()
        };
        cfg.fit.debias = true;
        cfg.fit.lr_schedule = LrSchedule::Cyclic { period: 50 };
        cfg
    }

    fn init_params(&self) -> Params {
        Params {
            theta: 1.0,
            debias: DebiasFn::new(self.init_w),
            pnl: (self.mode == Mode::Pnl).then_some(self.init_pnl),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Direction {
    XToY,
    YToX,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::XToY => "x->y",
            Self::YToX => "y->x",
        })
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x->y" => Ok(Self::XToY),
            "y->x" => Ok(Self::YToX),
            other => Err(Error::Config(format!("unknown direction {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Decision {
    XToY,
    YToX,
    Independent,
}

impl From<Direction> for Decision {
    fn from(d: Direction) -> Self {
        match d {
            Direction::XToY => Self::XToY,
            Direction::YToX => Self::YToX,
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::XToY => "x->y",
            Self::YToX => "y->x",
            Self::Independent => "independent",
        })
    }
}

/// Fitted, variance-normalized measure for one hypothesized direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirectionScore {
    pub direction: Direction,
    pub mode: Mode,
    /// Raw measure divided by the fitted noise variance.
    pub loss: f64,
    pub raw: f64,
    pub params: Params,
    /// Whether the fitted transform (if any) is strictly increasing.
    pub invertible: bool,
}

/// Fits the measure with the cause taken from the column named by `direction`.
pub fn score_direction(
    pairs: &SamplePair,
    direction: Direction,
    config: &PipelineConfig,
    seed: u64,
) -> Result<DirectionScore> {
    let oriented = match direction {
        Direction::XToY => pairs.clone(),
        Direction::YToX => pairs.swapped(),
    };
    let positions = select_positions(oriented.xs(), config.max_positions);
    let frac = config.batch_frac.resolve(oriented.len());
    let batches = make_batches(oriented.xs(), &positions, frac)?;
    let objective =
        Objective::new(&oriented, &batches, &config.noise, seed)?.with_anchor(config.debias_anchor);
    let fit = fit_joint(&objective, &config.init_params(), &config.fit)?;
    Ok(DirectionScore {
        direction,
        mode: config.mode,
        loss: fit.measure.normalized,
        raw: fit.measure.raw,
        params: fit.params,
        invertible: fit.params.pnl.is_none_or(|t| t.is_invertible()),
    })
}

fn score_both(
    pairs: &SamplePair,
    config: &PipelineConfig,
    seed: u64,
) -> Result<(DirectionScore, DirectionScore)> {
    let (xy, yx) = rayon::join(
        || score_direction(pairs, Direction::XToY, config, seed),
        || score_direction(pairs, Direction::YToX, config, seed),
    );
    Ok((xy?, yx?))
}

/// Losses closer than this are treated as equal.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub decision: Decision,
    pub x_to_y: DirectionScore,
    pub y_to_x: DirectionScore,
    pub p_value: Option<f64>,
    pub alpha: Option<f64>,
    pub bootstrap: Option<BootstrapResult>,
}

/// Scores both directions and picks the one with the strictly smaller loss.
pub fn divot(pairs: &SamplePair, config: &PipelineConfig, seed: u64) -> Result<Verdict> {
    let (x_to_y, y_to_x) = score_both(pairs, config, seed)?;
    let decision = compare(x_to_y.loss, y_to_x.loss);
    Ok(Verdict {
        decision,
        x_to_y,
        y_to_x,
        p_value: None,
        alpha: None,
        bootstrap: None,
    })
}

fn compare(x_to_y: f64, y_to_x: f64) -> Decision {
    if (x_to_y - y_to_x).abs() <= TIE_TOLERANCE {
        Decision::Independent
    } else if x_to_y < y_to_x {
        Decision::XToY
    } else {
        Decision::YToX
    }
}

/// Like [`divot`], but the direction is only reported when the bootstrap
/// losses of the two directions differ significantly at level `alpha`;
/// otherwise the variables are declared independent.
pub fn divot_with_bootstrap(
    pairs: &SamplePair,
    config: &PipelineConfig,
    replicates: usize,
    alpha: f64,
    seed: u64,
) -> Result<Verdict> {
    let (x_to_y, y_to_x) = score_both(pairs, config, seed)?;
    let boot = bootstrap_test(pairs, config, replicates, seed)?;
    let decision = if boot.p_value >= alpha {
        Decision::Independent
    } else {
        compare(boot.mean_x_to_y, boot.mean_y_to_x)
    };
    Ok(Verdict {
        decision,
        x_to_y,
        y_to_x,
        p_value: Some(boot.p_value),
        alpha: Some(alpha),
        bootstrap: Some(boot),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapResult {
    pub replicates: usize,
    /// `(x->y, y->x)` loss of each replicate.
    pub losses: Vec<(f64, f64)>,
    pub mean_x_to_y: f64,
    pub mean_y_to_x: f64,
    pub t_statistic: f64,
    pub p_value: f64,
    /// Both loss samples had zero variance; the p-value is then set to 1.
    pub degenerate: bool,
}

/// Resamples the rows `replicates` times with replacement, scores both
/// directions on each resample and compares the two loss samples with a
/// two-sided Welch t-test.
///
/// Replicate `b` resamples with seed `seed ^ b`.
pub fn bootstrap_test(
    pairs: &SamplePair,
    config: &PipelineConfig,
    replicates: usize,
    seed: u64,
) -> Result<BootstrapResult> {
    if replicates < 2 {
        return Err(Error::Config(format!(
            "need at least 2 bootstrap replicates, got {replicates}"
        )));
    }
    let losses = (0..replicates as u64)
        .into_par_iter()
        .map(|b| {
            let rseed = seed ^ b;
            let sample = pairs.resample(rseed);
            let (xy, yx) = score_both(&sample, config, mix_seed(rseed))?;
            Ok((xy.loss, yx.loss))
        })
        .collect::<Result<Vec<_>>>()?;
    let a: Vec<f64> = losses.iter().map(|l| l.0).collect();
    let b: Vec<f64> = losses.iter().map(|l| l.1).collect();
    let test = welch_t_test(&a, &b)?;
    Ok(BootstrapResult {
        replicates,
        mean_x_to_y: mean(&a),
        mean_y_to_x: mean(&b),
        losses,
        t_statistic: test.t,
        p_value: test.p_value,
        degenerate: test.degenerate,
    })
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sample_var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
    pub degenerate: bool,
}

/// Two-sided Welch unequal-variance t-test.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InsufficientData(
            "t-test needs at least 2 values per sample".into(),
        ));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sample_var(a) / na, sample_var(b) / nb);
    let diff = mean(a) - mean(b);
    if va + vb == 0.0 {
        return Ok(TTest {
            t: 0.0,
            df: na + nb - 2.0,
            p_value: 1.0,
            degenerate: true,
        });
    }
    let t = diff / (va + vb).sqrt();
    let df = (va + vb).powi(2) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Numeric(e.to_string()))?;
    let p_value = (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0);
    if !p_value.is_finite() {
        return Err(Error::Numeric(format!("t-test p-value is {p_value}")));
    }
    Ok(TTest {
        t,
        df,
        p_value,
        degenerate: false,
    })
}
