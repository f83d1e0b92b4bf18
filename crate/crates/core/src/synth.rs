//! Seeded generators for the synthetic benchmark processes.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::noise::{NoiseSource, Source};
use crate::pairdata::SamplePair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    Linear,
    Cubic,
    Sine,
    Piecewise,
}

impl Mechanism {
    pub const ALL: [Mechanism; 4] = [Self::Linear, Self::Cubic, Self::Sine, Self::Piecewise];

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Linear => x,
            Self::Cubic => 0.1 * (2.5 * x).powi(3) - 0.1 * x,
            Self::Sine => (4.0 * x).sin(),
            Self::Piecewise => piecewise(x),
        }
    }
}

/// Discontinuous at zero: `0.5x^3 - x` for `x <= 0`, `1 - 0.5x^3 + x` above.
pub fn piecewise(x: f64) -> f64 {
    if x <= 0.0 {
        0.5 * x.powi(3) - x
    } else {
        1.0 - 0.5 * x.powi(3) + x
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Linear => "linear",
            Self::Cubic => "cubic",
            Self::Sine => "sine",
            Self::Piecewise => "piecewise",
        })
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Self::Linear),
            "cubic" => Ok(Self::Cubic),
            "sine" | "sin" => Ok(Self::Sine),
            "piecewise" | "piece" => Ok(Self::Piecewise),
            other => Err(Error::Config(format!("unknown mechanism {other:?}"))),
        }
    }
}

/// Additive noise of the effect (and of the cause in confounded processes).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum GenNoise {
    /// `U(0, 1) + shift`
    Uniform { shift: f64 },
    /// Laplace(0, 1)
    Laplace,
}

impl Default for GenNoise {
    fn default() -> Self {
        Self::Uniform { shift: 0.0 }
    }
}

impl GenNoise {
    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            Self::Uniform { shift } => rng.random::<f64>() + shift,
            Self::Laplace => {
                let mut v = [0.0];
                NoiseSource::Laplace.fill(rng, &mut v);
                v[0]
            }
        }
    }
}

/// Hidden common cause `U ~ U(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Confounder {
    /// `x = u`, `y = u`
    Identical,
    /// `x = e_x + w_x u`, `y = e_y + w_y u`
    Independent { w_x: f64, w_y: f64 },
    /// `x = e_x + w_x u`, `y = weight * f(x) + e_y + w_y u`
    Causal { w_x: f64, w_y: f64 },
}

impl Confounder {
    pub fn fcm_id(&self) -> u8 {
        match self {
            Self::Identical => 1,
            Self::Independent { .. } => 2,
            Self::Causal { .. } => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneratorSpec {
    pub mechanism: Mechanism,
    pub weight: f64,
    pub noise: GenNoise,
    pub confounder: Option<Confounder>,
    pub n: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    /// `y = f(x) + e`, `x ~ U(-1, 1)`, `e ~ U(0, 1)`.
    pub fn anm(mechanism: Mechanism, n: usize, seed: u64) -> Self {
        Self {
            mechanism,
            weight: 1.0,
            noise: GenNoise::default(),
            confounder: None,
            n,
            seed,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_noise(mut self, noise: GenNoise) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_confounder(mut self, confounder: Confounder) -> Self {
        self.confounder = Some(confounder);
        self
    }
}

/// Draws `spec.n` observations. The first column is the cause when there is one.
pub fn generate(spec: &GeneratorSpec) -> Result<SamplePair> {
    if spec.n < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 samples, got {}",
            spec.n
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut xs = Vec::with_capacity(spec.n);
    let mut ys = Vec::with_capacity(spec.n);
    let f = |x: f64| spec.weight * spec.mechanism.eval(x);
    for _ in 0..spec.n {
        let (x, y) = match spec.confounder {
            None => {
                let x = rng.random_range(-1.0..1.0);
                let e = spec.noise.draw(&mut rng);
                (x, f(x) + e)
            }
            Some(Confounder::Identical) => {
                let u: f64 = rng.random();
                (u, u)
            }
            Some(Confounder::Independent { w_x, w_y }) => {
                let u: f64 = rng.random();
                let ex = spec.noise.draw(&mut rng);
                let ey = spec.noise.draw(&mut rng);
                (ex + w_x * u, ey + w_y * u)
            }
            Some(Confounder::Causal { w_x, w_y }) => {
                let u: f64 = rng.random();
                let ex = spec.noise.draw(&mut rng);
                let ey = spec.noise.draw(&mut rng);
                let x = ex + w_x * u;
                (x, f(x) + ey + w_y * u)
            }
        };
        xs.push(x);
        ys.push(y);
    }
    SamplePair::new(xs, ys)
}
