//! The variance-based divergence measure.
//!
//! Within a batch every row is treated as sitting at the same cause value. The
//! effect values of the batch are optionally passed through a post-nonlinear
//! transform, a linear debiasing term is subtracted, and the result is sorted
//! and matched against the sorted scaled noise draws (the 1D optimal coupling).
//! The matched differences are the effect-axis velocities; their sample
//! variance, averaged over batches, is the measure. It is zero exactly when
//! every batch is a shifted copy of the hypothesized noise.
//!
//! For fixed sort permutations the measure is a smooth function of
//! `(theta, w, omega)`, which is what [`Objective::gradient`] differentiates.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::noise::{sorted_batch_draws, NoiseModel, Source};
use crate::pairdata::{BatchSet, SamplePair};

/// Linear debiasing `g(x) = w * x`, subtracted from the effect values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct DebiasFn {
    pub w: f64,
}

impl DebiasFn {
    pub fn new(w: f64) -> Self {
        Self { w }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.w * x
    }
}

/// Which cause value the debiasing term is evaluated at.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub enum DebiasAnchor {
    /// Each row's own cause value.
    #[default]
    Row,
    /// The batch's anchor position. The batch mean absorbs this term, so it
    /// leaves the measure unchanged.
    Position,
}

/// `y + a * tanh(b * y + c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PnlTransform {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl PnlTransform {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub fn identity() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    pub fn apply(&self, y: f64) -> f64 {
        y + self.a * (self.b * y + self.c).tanh()
    }

    /// Strictly increasing everywhere iff `a * b > -1`.
    pub fn is_invertible(&self) -> bool {
        self.a * self.b > -1.0
    }
}

impl Default for PnlTransform {
    fn default() -> Self {
        Self::identity()
    }
}

/// Elementwise post-nonlinear transform.
pub fn pnl_transform(ys: &[f64], omega: &PnlTransform) -> Vec<f64> {
    ys.iter().map(|&y| omega.apply(y)).collect()
}

/// A measure estimate and its value relative to the fitted noise variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasureValue {
    pub raw: f64,
    pub normalized: f64,
}

impl MeasureValue {
    pub fn new(raw: f64, noise_variance: f64) -> Self {
        Self {
            raw,
            normalized: raw / noise_variance,
        }
    }
}

/// Parameters the measure depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Params {
    pub theta: f64,
    pub debias: DebiasFn,
    pub pnl: Option<PnlTransform>,
}

impl Params {
    pub fn anm(theta: f64) -> Self {
        Self {
            theta,
            debias: DebiasFn::default(),
            pnl: None,
        }
    }
}

/// Partial derivatives of the raw measure.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Gradient {
    pub theta: f64,
    pub w: f64,
    /// With respect to `(a, b, c)` of the transform; zero when none is set.
    pub omega: [f64; 3],
}

/// Rows of one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchData {
    pub position: f64,
    /// Cause value of each row.
    pub xs: Vec<f64>,
    /// Effect value of each row.
    pub ys: Vec<f64>,
}

/// The measure as a function of [`Params`], with source draws frozen.
#[derive(Debug, Clone)]
pub struct Objective {
    batches: Vec<BatchData>,
    draws: Vec<Vec<f64>>,
    centered_draws: Vec<Vec<f64>>,
    unit_variance: f64,
    anchor: DebiasAnchor,
}

fn centered(v: &[f64]) -> Vec<f64> {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - m).collect()
}

impl Objective {
    /// Gathers the rows of each batch from `pairs` (whose `xs` is the cause)
    /// and draws the batch noise from one stream seeded with `seed`.
    pub fn new(
        pairs: &SamplePair,
        batches: &BatchSet,
        source: &dyn Source,
        seed: u64,
    ) -> Result<Self> {
        let data: Vec<BatchData> = batches
            .positions
            .iter()
            .zip(&batches.batches)
            .map(|(&position, rows)| BatchData {
                position,
                xs: rows.iter().map(|&i| pairs.xs()[i]).collect(),
                ys: rows.iter().map(|&i| pairs.ys()[i]).collect(),
            })
            .collect();
        let sizes: Vec<usize> = data.iter().map(|b| b.ys.len()).collect();
        let draws = sorted_batch_draws(source, &sizes, seed);
        Self::from_parts(data, draws, source.unit_variance())
    }

    /// Builds an objective from explicit batches and sorted source draws.
    pub fn from_parts(
        batches: Vec<BatchData>,
        draws: Vec<Vec<f64>>,
        unit_variance: f64,
    ) -> Result<Self> {
        if batches.is_empty() {
            return Err(Error::InsufficientData("no batches".into()));
        }
        if batches.len() != draws.len() {
            return Err(Error::Shape {
                expected: batches.len(),
                actual: draws.len(),
            });
        }
        for (b, d) in batches.iter().zip(&draws) {
            if b.ys.len() < 2 {
                return Err(Error::InsufficientBatch { size: b.ys.len() });
            }
            if b.xs.len() != b.ys.len() {
                return Err(Error::Shape {
                    expected: b.ys.len(),
                    actual: b.xs.len(),
                });
            }
            if d.len() != b.ys.len() {
                return Err(Error::Shape {
                    expected: b.ys.len(),
                    actual: d.len(),
                });
            }
        }
        let centered_draws = draws.iter().map(|d| centered(d)).collect();
        Ok(Self {
            batches,
            draws,
            centered_draws,
            unit_variance,
            anchor: DebiasAnchor::Row,
        })
    }

    pub fn with_anchor(mut self, anchor: DebiasAnchor) -> Self {
        self.anchor = anchor;
        self
    }

    pub fn batches(&self) -> &[BatchData] {
        &self.batches
    }

    pub fn unit_variance(&self) -> f64 {
        self.unit_variance
    }

    /// Transformed, debiased effect values of one batch, with the stable
    /// permutation that sorts them.
    fn residuals(&self, batch: &BatchData, params: &Params) -> (Vec<f64>, Vec<usize>) {
        let u: Vec<f64> = batch
            .ys
            .iter()
            .zip(&batch.xs)
            .map(|(&y, &x)| {
                let y = params.pnl.map_or(y, |t| t.apply(y));
                let at = match self.anchor {
                    DebiasAnchor::Row => x,
                    DebiasAnchor::Position => batch.position,
                };
                y - params.debias.eval(at)
            })
            .collect();
        let mut perm: Vec<usize> = (0..u.len()).collect();
        perm.sort_by(|&i, &j| u[i].total_cmp(&u[j]));
        let sorted = perm.iter().map(|&i| u[i]).collect();
        (sorted, perm)
    }

    /// Centered velocities `sort(u) - theta * s - mean(...)` of one batch.
    fn centered_velocities(&self, sorted: &[f64], draws: &[f64], theta: f64) -> Vec<f64> {
        let v: Vec<f64> = sorted.iter().zip(draws).map(|(r, s)| r - theta * s).collect();
        centered(&v)
    }

    pub fn raw(&self, params: &Params) -> f64 {
        let total: f64 = self
            .batches
            .iter()
            .zip(&self.draws)
            .map(|(batch, draws)| {
                let (sorted, _) = self.residuals(batch, params);
                let e = self.centered_velocities(&sorted, draws, params.theta);
                e.iter().map(|v| v * v).sum::<f64>() / (e.len() - 1) as f64
            })
            .sum();
        total / self.batches.len() as f64
    }

    pub fn measure(&self, params: &Params) -> MeasureValue {
        let var = params.theta * params.theta * self.unit_variance;
        MeasureValue::new(self.raw(params), var)
    }

    /// Raw measure and its gradient with the sort permutations held fixed.
    pub fn gradient(&self, params: &Params) -> (f64, Gradient) {
        let mut g = Gradient::default();
        let mut total = 0.0;
        for (batch, draws) in self.batches.iter().zip(&self.draws) {
            let (sorted, perm) = self.residuals(batch, params);
            let e = self.centered_velocities(&sorted, draws, params.theta);
            let denom = (e.len() - 1) as f64;
            total += e.iter().map(|v| v * v).sum::<f64>() / denom;
            for (k, &row) in perm.iter().enumerate() {
                // d/d(sorted_k) of ||P d||^2 / (N - 1), with P the centering projection
                let dr = 2.0 * e[k] / denom;
                g.theta -= dr * draws[k];
                let x = match self.anchor {
                    DebiasAnchor::Row => batch.xs[row],
                    DebiasAnchor::Position => batch.position,
                };
                g.w -= dr * x;
                if let Some(t) = params.pnl {
                    let y = batch.ys[row];
                    let th = (t.b * y + t.c).tanh();
                    let sech2 = 1.0 - th * th;
                    g.omega[0] += dr * th;
                    g.omega[1] += dr * t.a * sech2 * y;
                    g.omega[2] += dr * t.a * sech2;
                }
            }
        }
        let nb = self.batches.len() as f64;
        g.theta /= nb;
        g.w /= nb;
        g.omega.iter_mut().for_each(|v| *v /= nb);
        (total / nb, g)
    }

    /// Unconstrained minimizer over `theta` of the raw measure with the other
    /// parameters fixed.
    ///
    /// `theta > 0` never reorders the sorted draws, so the measure is a
    /// quadratic in `theta`, minimized at
    /// `sum_b <r_b, s_b> / (N_b - 1)  /  sum_b |s_b|^2 / (N_b - 1)`
    /// with `r_b`, `s_b` the batch-centered sorted residuals and draws.
    pub fn theta_closed_form(&self, params: &Params) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (batch, cs) in self.batches.iter().zip(&self.centered_draws) {
            let (sorted, _) = self.residuals(batch, params);
            let scale = 1.0 / (sorted.len() - 1) as f64;
            num += scale * sorted.iter().zip(cs).map(|(r, s)| r * s).sum::<f64>();
            den += scale * cs.iter().map(|s| s * s).sum::<f64>();
        }
        num / den
    }
}

/// The measure for `pairs` (cause in `xs`) at a given noise model.
pub fn variance_divergence(
    pairs: &SamplePair,
    batches: &BatchSet,
    noise: &NoiseModel,
    debias: DebiasFn,
    pnl: Option<PnlTransform>,
    seed: u64,
) -> Result<MeasureValue> {
    let objective = Objective::new(pairs, batches, &noise.source, seed)?;
    Ok(objective.measure(&Params {
        theta: noise.theta(),
        debias,
        pnl,
    }))
}
