//! Command-line surface: `infer`, `bench` and `orient`.

pub mod bench;
pub mod config;
pub mod infer;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use bench::{cmd_bench, run_suite, summarize, BenchOptions, BenchRecord, Suite, SummaryRow};
pub use config::RunConfig;
pub use infer::{cmd_infer, InferRecord};

use crate::error::Result;
use crate::multivar::{
    load_columns, orient_skeleton, standardize_columns, OrientResult, Skeleton, MAX_EDGES,
};

#[derive(Debug, Parser)]
#[command(name = "otcause", version, about = "Cause-effect direction from optimal transport")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Infer the direction of one pair file
    Infer {
        /// Whitespace-separated two-column file
        file: PathBuf,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Run a benchmark suite and write CSV reports
    Bench {
        #[arg(long)]
        suite: Suite,
        /// Trials per cell (default: 100 synthetic, 5 significance and confounder, 3 tuebingen)
        #[arg(long)]
        reps: Option<usize>,
        /// Comma-separated sample sizes of generated data
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// Directory holding the pair files listed in --meta
        #[arg(long)]
        data_dir: Option<PathBuf>,
        /// CSV with columns filename,direction
        #[arg(long)]
        meta: Option<PathBuf>,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Orient the edges of a skeleton over a multi-column data file
    Orient {
        /// Whitespace-separated table, one column per variable
        data: PathBuf,
        /// Edge list, one "i j" pair of 0-based column indices per line
        #[arg(long)]
        skeleton: PathBuf,
        #[arg(long, default_value_t = MAX_EDGES)]
        max_edges: usize,
        #[command(flatten)]
        run: RunFlags,
    },
}

/// Options shared by every subcommand. Flags override the config file.
#[derive(Debug, Args, Default)]
pub struct RunFlags {
    /// Plain-text key=value file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// anm or pnl
    #[arg(long)]
    pub mode: Option<String>,
    /// normal, uniform, beta or laplace
    #[arg(long)]
    pub noise: Option<String>,
    /// Fraction of rows per batch, or "auto"
    #[arg(long)]
    pub batch_frac: Option<String>,
    #[arg(long)]
    pub positions: Option<usize>,
    #[arg(long)]
    pub max_n: Option<usize>,
    /// Trim rows beyond this many standard deviations
    #[arg(long)]
    pub k_std: Option<f64>,
    /// Bootstrap replicates (0 = off)
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Seed list, e.g. "0,1,2" or "0..3"
    #[arg(long, visible_alias = "seed")]
    pub seeds: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunFlags {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let pairs: [(&str, Option<String>); 9] = [
            ("mode", self.mode.clone()),
            ("noise", self.noise.clone()),
            ("batch_frac", self.batch_frac.clone()),
            ("positions", self.positions.map(|v| v.to_string())),
            ("max_n", self.max_n.map(|v| v.to_string())),
            ("k_std", self.k_std.map(|v| v.to_string())),
            ("bootstrap", self.bootstrap.map(|v| v.to_string())),
            ("alpha", self.alpha.map(|v| v.to_string())),
            ("seeds", self.seeds.clone()),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Serialize)]
struct OrientRecord<'a> {
    data: String,
    config_digest: String,
    /// Directed `(parent, child)` edges of the chosen orientation.
    edges: &'a [(usize, usize)],
    score: f64,
    candidates: usize,
    ties: usize,
    result: &'a OrientResult,
}

/// Orients a skeleton with every variable given the configured noise source.
pub fn cmd_orient(
    data: &Path,
    skeleton: &Path,
    max_edges: usize,
    config: &RunConfig,
) -> Result<OrientResult> {
    let cols = standardize_columns(&load_columns(data)?)?;
    let skeleton = Skeleton::load(skeleton, cols.len())?;
    let noises = vec![config.noise; cols.len()];
    let result = orient_skeleton(
        &cols,
        &skeleton,
        &noises,
        &config.pipeline(),
        max_edges,
        config.seeds[0],
    )?;
    let record = OrientRecord {
        data: data.display().to_string(),
        config_digest: config.digest(),
        edges: result.best.dag.edges(),
        score: result.best.score.total,
        candidates: result.candidates,
        ties: result.ties.len(),
        result: &result,
    };
    let json = serde_json::to_string_pretty(&record).expect("record is serializable") + "\n";
    if let Some(out) = &config.out {
        infer::write_atomic(out, json.as_bytes())?;
    }
    print!("{json}");
    Ok(result)
}

/// Dispatches a parsed command line.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Infer { file, run } => {
            cmd_infer(file, &run.resolve()?)?;
        }
        Command::Bench {
            suite,
            reps,
            sizes,
            data_dir,
            meta,
            run,
        } => {
            let opts = BenchOptions {
                reps: *reps,
                sizes: sizes.clone(),
                data_dir: data_dir.clone(),
                meta: meta.clone(),
            };
            cmd_bench(*suite, &run.resolve()?, &opts)?;
        }
        Command::Orient {
            data,
            skeleton,
            max_edges,
            run,
        } => {
            cmd_orient(data, skeleton, *max_edges, &run.resolve()?)?;
        }
    }
    Ok(())
}
