//! Hypothesized noise distributions `e = theta * e_source`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A fixed source distribution that the scale parameter reparameterizes.
pub trait Source {
    /// Fills `out` with i.i.d. draws.
    fn fill(&self, rng: &mut dyn RngCore, out: &mut [f64]);

    /// Variance of one unscaled draw.
    fn unit_variance(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseSource {
    /// N(0, 1)
    Normal,
    /// U(0, 1)
    Uniform,
    /// Beta(0.5, 0.5)
    Beta,
    /// Laplace(0, 1)
    Laplace,
}

impl NoiseSource {
    pub const ALL: [NoiseSource; 4] = [Self::Normal, Self::Uniform, Self::Beta, Self::Laplace];
}

impl Source for NoiseSource {
    fn fill(&self, rng: &mut dyn RngCore, out: &mut [f64]) {
        match self {
            Self::Normal => out.iter_mut().for_each(|v| *v = StandardNormal.sample(rng)),
            Self::Uniform => out.iter_mut().for_each(|v| *v = rng.random::<f64>()),
            Self::Beta => {
                let beta = Beta::new(0.5, 0.5).expect("valid beta parameters");
                out.iter_mut().for_each(|v| *v = beta.sample(rng));
            }
            Self::Laplace => out.iter_mut().for_each(|v| {
                // inverse CDF on u in (-1/2, 1/2)
                let u: f64 = rng.random::<f64>() - 0.5;
                *v = -u.signum() * (1.0 - 2.0 * u.abs()).ln();
            }),
        }
    }

    fn unit_variance(&self) -> f64 {
        match self {
            Self::Normal => 1.0,
            Self::Uniform => 1.0 / 12.0,
            Self::Beta => 0.125,
            Self::Laplace => 2.0,
        }
    }
}

impl fmt::Display for NoiseSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Normal => "normal",
            Self::Uniform => "uniform",
            Self::Beta => "beta",
            Self::Laplace => "laplace",
        })
    }
}

impl FromStr for NoiseSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" | "gaussian" | "standard-normal" => Ok(Self::Normal),
            "uniform" => Ok(Self::Uniform),
            "beta" => Ok(Self::Beta),
            "laplace" => Ok(Self::Laplace),
            other => Err(Error::Config(format!("unknown noise source {other:?}"))),
        }
    }
}

/// A source distribution together with its positive scale `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub source: NoiseSource,
    theta: f64,
}

impl NoiseModel {
    pub fn new(source: NoiseSource, theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::Config(format!("noise scale must be positive, got {theta}")));
        }
        Ok(Self { source, theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Unscaled draws from the source, deterministic in `seed`.
    pub fn sample_source(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = vec![0.0; n];
        self.source.fill(&mut rng, &mut out);
        out
    }

    /// Scaled draws `theta * e_source`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut v = self.sample_source(n, seed);
        v.iter_mut().for_each(|e| *e *= self.theta);
        v
    }

    /// Var(theta * e_source), in closed form.
    pub fn variance(&self) -> f64 {
        self.theta * self.theta * self.source.unit_variance()
    }
}

/// One ascending vector of unscaled source draws per batch, all taken from a
/// single stream seeded once.
pub fn sorted_batch_draws(source: &dyn Source, sizes: &[usize], seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sizes
        .iter()
        .map(|&n| {
            let mut v = vec![0.0; n];
            source.fill(&mut rng, &mut v);
            v.sort_by(f64::total_cmp);
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn uniform_support() {
        let m = NoiseModel::new(NoiseSource::Uniform, 3.0).unwrap();
        for seed in 0..5 {
            assert!(m.sample_source(1000, seed).iter().all(|v| (0.0..1.0).contains(v)));
        }
    }

    #[test]
    fn seeded_draws_repeat() {
        for src in NoiseSource::ALL {
            let m = NoiseModel::new(src, 1.0).unwrap();
            assert_eq!(m.sample_source(64, 9), m.sample_source(64, 9));
            assert_ne!(m.sample_source(64, 9), m.sample_source(64, 10));
        }
    }

    #[test]
    fn normal_moments() {
        let m = NoiseModel::new(NoiseSource::Normal, 1.0).unwrap();
        let (mean, var) = mean_var(&m.sample_source(1_000_000, 1));
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn closed_form_variances() {
        let v = |s, t| NoiseModel::new(s, t).unwrap().variance();
        assert_eq!(v(NoiseSource::Uniform, 1.0), 1.0 / 12.0);
        assert_eq!(v(NoiseSource::Normal, 2.0), 4.0);
        assert_eq!(v(NoiseSource::Beta, 1.0), 0.125);
        assert_eq!(v(NoiseSource::Laplace, 1.0), 2.0);
    }

    #[test]
    fn empirical_variances_match() {
        for (src, tol) in [
            (NoiseSource::Beta, 0.002),
            (NoiseSource::Uniform, 0.002),
            (NoiseSource::Laplace, 0.02),
        ] {
            let m = NoiseModel::new(src, 1.0).unwrap();
            let (_, var) = mean_var(&m.sample_source(1_000_000, 3));
            assert!((var - m.variance()).abs() < tol, "{src}: {var}");
        }
    }

    #[test]
    fn nonpositive_scale_rejected() {
        assert!(NoiseModel::new(NoiseSource::Normal, 0.0).is_err());
        assert!(NoiseModel::new(NoiseSource::Normal, -1.0).is_err());
        assert!(NoiseModel::new(NoiseSource::Normal, f64::NAN).is_err());
    }

    #[test]
    fn names_round_trip() {
        for src in NoiseSource::ALL {
            assert_eq!(src.to_string().parse::<NoiseSource>().unwrap(), src);
        }
        assert!("cauchy".parse::<NoiseSource>().is_err());
    }
}
