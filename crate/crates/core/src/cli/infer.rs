//! Single-pair inference.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use super::config::RunConfig;
use crate::decide::{divot, divot_with_bootstrap, DirectionScore, Verdict};
use crate::error::{Error, Result};
use crate::pairdata::{load_pairs, preprocess};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionRecord {
    pub loss: f64,
    pub raw: f64,
    pub theta: f64,
    pub w: f64,
    /// `(a, b, c)` of the fitted transform, PNL mode only.
    pub omega: Option<[f64; 3]>,
    pub invertible: bool,
}

impl From<&DirectionScore> for DirectionRecord {
    fn from(s: &DirectionScore) -> Self {
        Self {
            loss: s.loss,
            raw: s.raw,
            theta: s.params.theta,
            w: s.params.debias.w,
            omega: s.params.pnl.map(|t| [t.a, t.b, t.c]),
            invertible: s.invertible,
        }
    }
}

/// What `infer` prints and writes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InferRecord {
    pub file: String,
    pub n: usize,
    pub mode: String,
    pub noise: String,
    pub seed: u64,
    pub config_digest: String,
    pub decision: String,
    pub x_to_y: DirectionRecord,
    pub y_to_x: DirectionRecord,
    pub p_value: Option<f64>,
    pub alpha: Option<f64>,
    pub bootstrap_replicates: Option<usize>,
}

/// Runs the configured pipeline on one pair, using the first seed.
pub fn run_pair(path: &Path, config: &RunConfig) -> Result<(InferRecord, Verdict)> {
    config.validate()?;
    let seed = config.seeds[0];
    let raw = load_pairs(path, None)?;
    let data = preprocess(&raw, config.max_n, config.k_std, seed)?;
    let pipeline = config.pipeline();
    let verdict = if config.bootstrap > 0 {
        divot_with_bootstrap(&data, &pipeline, config.bootstrap, config.alpha, seed)?
    } else {
        divot(&data, &pipeline, seed)?
    };
    let record = InferRecord {
        file: path.display().to_string(),
        n: data.len(),
        mode: config.mode.to_string(),
        noise: config.noise.to_string(),
        seed,
        config_digest: config.digest(),
        decision: verdict.decision.to_string(),
        x_to_y: (&verdict.x_to_y).into(),
        y_to_x: (&verdict.y_to_x).into(),
        p_value: verdict.p_value,
        alpha: verdict.alpha,
        bootstrap_replicates: verdict.bootstrap.as_ref().map(|b| b.replicates),
    };
    Ok((record, verdict))
}

/// Writes `bytes` to `path` through a sibling temporary file, so a failed
/// run never leaves a partial report behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp"));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

/// Infers the direction of one pair file, prints the JSON record and writes it
/// to `config.out` when set.
pub fn cmd_infer(path: &Path, config: &RunConfig) -> Result<InferRecord> {
    let (record, _) = run_pair(path, config)?;
    let json = serde_json::to_string_pretty(&record).expect("record is serializable") + "\n";
    if let Some(out) = &config.out {
        write_atomic(out, json.as_bytes())?;
    }
    print!("{json}");
    Ok(record)
}
