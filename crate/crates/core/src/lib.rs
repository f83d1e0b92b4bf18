//! Causal direction discovery between two observed variables with
//! one-dimensional optimal transport.
//!
//! For a hypothesized direction `cause -> effect`, observations are grouped
//! into batches of nearby cause values. Each batch of effect values is coupled
//! to a sample of hypothesized noise by sorting (the optimal 1D transport
//! plan), and the spread of the resulting displacements measures how far the
//! batch is from being a shifted copy of the noise. Under an additive noise
//! model this measure vanishes in the causal direction only. The measure is
//! minimized over the noise scale (and, optionally, a debiasing slope and a
//! post-nonlinear transform), normalized by the fitted noise variance, and
//! compared across the two directions.
//!
//! ```no_run
//! use otcause::{divot, preprocess, load_pairs, NoiseSource, PipelineConfig};
//!
//! let raw = load_pairs("pair0001.txt", None)?;
//! let data = preprocess(&raw, 500, 2.0, 0)?;
//! let verdict = divot(&data, &PipelineConfig::anm(NoiseSource::Normal), 0)?;
//! println!("{}", verdict.decision);
//! # Ok::<(), otcause::Error>(())
//! ```

pub mod cli;
pub mod decide;
pub mod divergence;
pub mod error;
pub mod multivar;
pub mod noise;
pub mod optimize;
pub mod ot1d;
pub mod pairdata;
pub mod synth;

pub use decide::{
    bootstrap_test, divot, divot_with_bootstrap, score_direction, welch_t_test, BatchFrac,
    BootstrapResult, Decision, Direction, DirectionScore, Mode, PipelineConfig, Verdict,
};
pub use divergence::{
    pnl_transform, variance_divergence, DebiasAnchor, DebiasFn, MeasureValue, Objective, Params,
    PnlTransform,
};
pub use error::{Error, Result};
pub use multivar::{
    multivariate_measure, orient_skeleton, DagOrientation, MultivarScore, OrientResult, Skeleton,
};
pub use noise::{NoiseModel, NoiseSource, Source};
pub use optimize::{fit_joint, fit_theta, FitConfig, JointFit, LrSchedule, ThetaMethod};
pub use ot1d::{conditional_w2, w2_squared_1d, Coupling};
pub use pairdata::{load_pairs, make_batches, preprocess, select_positions, BatchSet, SamplePair};
pub use synth::{generate, Confounder, GeneratorSpec, Mechanism};

/// Derives an independent stream seed from `seed` (SplitMix64 finalizer).
pub fn mix_seed(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
