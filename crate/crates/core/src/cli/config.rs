//! Run configuration: a plain `key = value` file, overridden by flags.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::decide::{BatchFrac, Mode, PipelineConfig};
use crate::error::{Error, Result};
use crate::noise::NoiseSource;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub noise: NoiseSource,
    pub batch_frac: BatchFrac,
    pub max_positions: usize,
    pub max_n: usize,
    /// Rows beyond this many standard deviations are trimmed.
    pub k_std: f64,
    /// Bootstrap replicates; 0 disables the significance test.
    pub bootstrap: usize,
    pub alpha: f64,
    pub seeds: Vec<u64>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Anm,
            noise: NoiseSource::Normal,
            batch_frac: BatchFrac::Auto,
            max_positions: 50,
            max_n: 500,
            k_std: 2.0,
            bootstrap: 0,
            alpha: 0.05,
            seeds: vec![0],
            out: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

/// Comma-separated seeds; `a..b` expands to the half-open range.
pub fn parse_seeds(value: &str) -> Result<Vec<u64>> {
    let mut seeds = Vec::new();
    for part in value.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once("..") {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (parse_num("seeds", a)?, parse_num("seeds", b)?);
                seeds.extend(a..b);
            }
            None => seeds.push(parse_num("seeds", part)?),
        }
    }
    if seeds.is_empty() {
        return Err(Error::Config("no seeds given".into()));
    }
    Ok(seeds)
}

impl RunConfig {
    /// Sets one option by name, as spelled in a config file.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim().replace('-', "_").as_str() {
            "mode" => self.mode = value.parse()?,
            "noise" => self.noise = value.parse()?,
            "batch_frac" => self.batch_frac = value.parse()?,
            "positions" | "max_positions" => self.max_positions = parse_num(key, value)?,
            "max_n" => self.max_n = parse_num(key, value)?,
            "k_std" => self.k_std = parse_num(key, value)?,
            "bootstrap" => self.bootstrap = parse_num(key, value)?,
            "alpha" => self.alpha = parse_num(key, value)?,
            "seed" | "seeds" => self.seeds = parse_seeds(value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            other => return Err(Error::Config(format!("unknown option {other:?}"))),
        }
        Ok(())
    }

    pub fn parse_file_text(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: lineno + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            self.set(key, value).map_err(|e| Error::Parse {
                line: lineno + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::default();
        cfg.parse_file_text(&text)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_positions == 0 || self.max_n < 2 {
            return Err(Error::Config(
                "positions must be at least 1 and max_n at least 2".into(),
            ));
        }
        if !(self.k_std > 0.0) {
            return Err(Error::Config(format!("k_std must be positive, got {}", self.k_std)));
        }
        if self.bootstrap == 1 {
            return Err(Error::Config("bootstrap needs at least 2 replicates".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }

    pub fn pipeline(&self) -> PipelineConfig {
        let mut cfg = match self.mode {
            Mode::Anm => PipelineConfig::anm(self.noise),
            Mode::Pnl => PipelineConfig::pnl(self.noise),
        };
        cfg.batch_frac = self.batch_frac;
        cfg.max_positions = self.max_positions;
        cfg
    }

    /// Canonical text of every setting that affects results.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = write!(
            s,
            "mode={}\nnoise={}\nbatch_frac={}\nmax_positions={}\nmax_n={}\nk_std={}\nbootstrap={}\nalpha={}\nseeds={}\n",
            self.mode,
            self.noise,
            self.batch_frac,
            self.max_positions,
            self.max_n,
            self.k_std,
            self.bootstrap,
            self.alpha,
            seeds.join(",")
        );
        s
    }

    /// First 12 hex digits of the SHA-256 of [`canonical`](Self::canonical).
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.canonical().as_bytes());
        hex::encode(&hash[..6])
    }
}
