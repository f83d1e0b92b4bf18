//! Benchmark suites and their CSV reports.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::infer::write_atomic;
use crate::decide::{divot, divot_with_bootstrap, Decision, Direction, PipelineConfig, Verdict};
use crate::error::{Error, Result};
use crate::pairdata::{load_pairs, preprocess, SamplePair};
use crate::synth::{generate, Confounder, GeneratorSpec, Mechanism};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Synthetic,
    Tuebingen,
    Confounder,
    Significance,
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Synthetic => "synthetic",
            Self::Tuebingen => "tuebingen",
            Self::Confounder => "confounder",
            Self::Significance => "significance",
        })
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "synthetic" => Ok(Self::Synthetic),
            "tuebingen" | "tubingen" => Ok(Self::Tuebingen),
            "confounder" => Ok(Self::Confounder),
            "significance" => Ok(Self::Significance),
            other => Err(Error::Config(format!("unknown suite {other:?}"))),
        }
    }
}

/// Suite options that are not part of [`RunConfig`].
#[derive(Debug, Clone, Default)]
pub struct BenchOptions {
    /// Trials per cell; seeds run from the first configured seed upwards.
    /// Ignored when more than one seed is configured.
    pub reps: Option<usize>,
    /// Sample sizes of generated data.
    pub sizes: Option<Vec<usize>>,
    pub data_dir: Option<PathBuf>,
    pub meta: Option<PathBuf>,
}

/// One row of the long-format report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub suite: String,
    pub dataset: String,
    pub param: String,
    /// Requested sample size (0 for corpus files).
    pub size: usize,
    /// Rows left after preprocessing.
    pub n: usize,
    pub seed: u64,
    pub truth: String,
    pub decision: String,
    pub correct: bool,
    pub loss_x_to_y: f64,
    pub loss_y_to_x: f64,
    pub p_value: Option<f64>,
    pub config_digest: String,
    pub wall_ms: f64,
}

/// Aggregate of the records sharing `(suite, dataset, param, size)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub suite: String,
    pub dataset: String,
    pub param: String,
    pub size: usize,
    pub trials: usize,
    pub accuracy: f64,
    /// Standard deviation of per-seed accuracy (corpus suite only).
    pub accuracy_sd: Option<f64>,
    pub median_p: Option<f64>,
    pub mean_wall_ms: f64,
}

struct Task {
    dataset: String,
    param: String,
    truth: Decision,
    seed: u64,
    bootstrap: usize,
    data: Source,
}

enum Source {
    Generated(GeneratorSpec),
    File(PathBuf),
}

fn trial_seeds(config: &RunConfig, opts: &BenchOptions, default_reps: usize) -> Vec<u64> {
    if config.seeds.len() > 1 {
        return config.seeds.clone();
    }
    let base = config.seeds[0];
    (0..opts.reps.unwrap_or(default_reps) as u64)
        .map(|r| base.wrapping_add(r))
        .collect()
}

#[derive(Debug, Deserialize)]
struct MetaRow {
    filename: String,
    direction: String,
}

/// Reads `filename,direction` rows (with that header). Lines starting with `#`
/// are skipped.
pub fn load_meta(path: &Path) -> Result<Vec<(String, Direction)>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, row) in reader.deserialize::<MetaRow>().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(i + 2, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        rows.push((row.filename, row.direction.parse()?));
    }
    Ok(rows)
}

fn build_tasks(suite: Suite, config: &RunConfig, opts: &BenchOptions) -> Result<Vec<Task>> {
    let boot = if config.bootstrap > 0 { config.bootstrap } else { 50 };
    let mut tasks = Vec::new();
    let generated = |dataset: String, param: String, truth, seed, bootstrap, spec| Task {
        dataset,
        param,
        truth,
        seed,
        bootstrap,
        data: Source::Generated(spec),
    };
    match suite {
        Suite::Synthetic => {
            let sizes = opts.sizes.clone().unwrap_or_else(|| vec![100, 200, 500]);
            for m in Mechanism::ALL {
                for &n in &sizes {
                    for seed in trial_seeds(config, opts, 100) {
                        tasks.push(generated(
                            m.to_string(),
                            String::new(),
                            Decision::XToY,
                            seed,
                            config.bootstrap,
                            GeneratorSpec::anm(m, n, seed),
                        ));
                    }
                }
            }
        }
        Suite::Significance => {
            let n = opts.sizes.as_ref().map_or(1000, |s| s[0]);
            for m in Mechanism::ALL {
                for w in [0.01, 0.02, 0.03, 0.04, 0.05] {
                    for seed in trial_seeds(config, opts, 5) {
                        tasks.push(generated(
                            m.to_string(),
                            format!("w={w}"),
                            Decision::XToY,
                            seed,
                            boot,
                            GeneratorSpec::anm(m, n, seed).with_weight(w),
                        ));
                    }
                }
            }
        }
        Suite::Confounder => {
            let n = opts.sizes.as_ref().map_or(1000, |s| s[0]);
            let mut cells = vec![(
                "fcm1".to_string(),
                String::new(),
                Decision::Independent,
                Mechanism::Linear,
                Confounder::Identical,
            )];
            let grid2 = [0.1, 1.0, 10.0];
            for w_x in grid2 {
                for w_y in grid2 {
                    cells.push((
                        "fcm2".into(),
                        format!("wx={w_x};wy={w_y}"),
                        Decision::Independent,
                        Mechanism::Linear,
                        Confounder::Independent { w_x, w_y },
                    ));
                }
            }
            let grid3 = [0.1, 1.0, 10.0, 100.0];
            for m in [Mechanism::Linear, Mechanism::Sine] {
                for w_x in grid3 {
                    for w_y in grid3 {
                        cells.push((
                            format!("fcm3-{m}"),
                            format!("wx={w_x};wy={w_y}"),
                            Decision::XToY,
                            m,
                            Confounder::Causal { w_x, w_y },
                        ));
                    }
                }
            }
            for (dataset, param, truth, m, c) in cells {
                for seed in trial_seeds(config, opts, 5) {
                    tasks.push(generated(
                        dataset.clone(),
                        param.clone(),
                        truth,
                        seed,
                        boot,
                        GeneratorSpec::anm(m, n, seed).with_confounder(c),
                    ));
                }
            }
        }
        Suite::Tuebingen => {
            let (dir, meta) = match (&opts.data_dir, &opts.meta) {
                (Some(d), Some(m)) => (d, m),
                _ => {
                    return Err(Error::Config(
                        "the tuebingen suite needs --data-dir and --meta".into(),
                    ))
                }
            };
            let pairs = load_meta(meta)?;
            if pairs.is_empty() {
                return Err(Error::InsufficientData(format!(
                    "{} lists no pairs",
                    meta.display()
                )));
            }
            for seed in trial_seeds(config, opts, 3) {
                for (file, direction) in &pairs {
                    tasks.push(Task {
                        dataset: file.clone(),
                        param: String::new(),
                        truth: (*direction).into(),
                        seed,
                        bootstrap: config.bootstrap,
                        data: Source::File(dir.join(file)),
                    });
                }
            }
        }
    }
    Ok(tasks)
}

fn run_task(task: &Task, config: &RunConfig, pipeline: &PipelineConfig) -> Result<(usize, Verdict, f64)> {
    let data: SamplePair = match &task.data {
        Source::Generated(spec) => {
            // generated samples are used at their full size
            preprocess(&generate(spec)?, config.max_n.max(spec.n), config.k_std, task.seed)?
        }
        Source::File(path) => preprocess(&load_pairs(path, None)?, config.max_n, config.k_std, task.seed)?,
    };
    let start = Instant::now();
    let verdict = if task.bootstrap > 0 {
        divot_with_bootstrap(&data, pipeline, task.bootstrap, config.alpha, task.seed)?
    } else {
        divot(&data, pipeline, task.seed)?
    };
    Ok((data.len(), verdict, start.elapsed().as_secs_f64() * 1e3))
}

/// Runs every trial of `suite`. Records come back in a fixed order
/// regardless of scheduling.
pub fn run_suite(suite: Suite, config: &RunConfig, opts: &BenchOptions) -> Result<Vec<BenchRecord>> {
    config.validate()?;
    let tasks = build_tasks(suite, config, opts)?;
    info!("{suite}: {} trials", tasks.len());
    let pipeline = config.pipeline();
    let digest = config.digest();
    tasks
        .par_iter()
        .map(|task| {
            let (n, verdict, wall_ms) = run_task(task, config, &pipeline).map_err(|e| match &task.data {
                Source::File(p) => Error::Config(format!("{}: {e}", p.display())),
                Source::Generated(_) => e,
            })?;
            Ok(BenchRecord {
                suite: suite.to_string(),
                dataset: task.dataset.clone(),
                param: task.param.clone(),
                size: match &task.data {
                    Source::Generated(spec) => spec.n,
                    Source::File(_) => 0,
                },
                n,
                seed: task.seed,
                truth: task.truth.to_string(),
                decision: verdict.decision.to_string(),
                correct: verdict.decision == task.truth,
                loss_x_to_y: verdict.x_to_y.loss,
                loss_y_to_x: verdict.y_to_x.loss,
                p_value: verdict.p_value,
                config_digest: digest.clone(),
                wall_ms,
            })
        })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[k] } else { 0.5 * (v[k - 1] + v[k]) })
}

/// Per-cell accuracy. For the corpus suite, all pairs are pooled into one
/// `all` row whose spread is taken across seeds.
pub fn summarize(records: &[BenchRecord]) -> Vec<SummaryRow> {
    let corpus = records.first().is_some_and(|r| r.suite == Suite::Tuebingen.to_string());
    if corpus {
        let mut by_seed: BTreeMap<u64, Vec<&BenchRecord>> = BTreeMap::new();
        for r in records {
            by_seed.entry(r.seed).or_default().push(r);
        }
        let acc: Vec<f64> = by_seed
            .values()
            .map(|rs| rs.iter().filter(|r| r.correct).count() as f64 / rs.len() as f64)
            .collect();
        let m = mean(&acc);
        let sd = if acc.len() > 1 {
            (acc.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (acc.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        return vec![SummaryRow {
            suite: records[0].suite.clone(),
            dataset: "all".into(),
            param: String::new(),
            size: 0,
            trials: records.len(),
            accuracy: m,
            accuracy_sd: Some(sd),
            median_p: median(records.iter().filter_map(|r| r.p_value).collect()),
            mean_wall_ms: mean(&records.iter().map(|r| r.wall_ms).collect::<Vec<_>>()),
        }];
    }
    let mut cells: Vec<((String, String, usize), Vec<&BenchRecord>)> = Vec::new();
    for r in records {
        let key = (r.dataset.clone(), r.param.clone(), r.size);
        match cells.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => cells.push((key, vec![r])),
        }
    }
    cells
        .into_iter()
        .map(|((dataset, param, size), rs)| SummaryRow {
            suite: rs[0].suite.clone(),
            dataset,
            param,
            size,
            trials: rs.len(),
            accuracy: rs.iter().filter(|r| r.correct).count() as f64 / rs.len() as f64,
            accuracy_sd: None,
            median_p: median(rs.iter().filter_map(|r| r.p_value).collect()),
            mean_wall_ms: mean(&rs.iter().map(|r| r.wall_ms).collect::<Vec<_>>()),
        })
        .collect()
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// `report.csv` -> `report.summary.csv`
pub fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.summary.csv"))
}

/// Runs a suite, writes the per-trial report to `config.out` (and the summary
/// next to it), and prints the summary.
pub fn cmd_bench(suite: Suite, config: &RunConfig, opts: &BenchOptions) -> Result<Vec<SummaryRow>> {
    let records = run_suite(suite, config, opts)?;
    let summary = summarize(&records);
    let summary_csv = to_csv(&summary)?;
    if let Some(out) = &config.out {
        write_atomic(out, to_csv(&records)?.as_bytes())?;
        write_atomic(&summary_path(out), summary_csv.as_bytes())?;
    }
    print!("{summary_csv}");
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(seed: u64, correct: bool) -> BenchRecord {
        BenchRecord {
            suite: "tuebingen".into(),
            dataset: format!("pair{seed}"),
            param: String::new(),
            size: 0,
            n: 10,
            seed,
            truth: "x->y".into(),
            decision: if correct { "x->y" } else { "y->x" }.into(),
            correct,
            loss_x_to_y: 0.0,
            loss_y_to_x: 0.0,
            p_value: None,
            config_digest: String::new(),
            wall_ms: 1.0,
        }
    }

    #[test]
    fn corpus_summary_spread_across_seeds() {
        // seed 0: 1/2 correct, seed 1: 2/2 correct
        let rs = vec![record(0, true), record(0, false), record(1, true), record(1, true)];
        let s = summarize(&rs);
        assert_eq!(s.len(), 1);
        assert!((s[0].accuracy - 0.75).abs() < 1e-15);
        let sd = (2.0f64 * 0.25f64.powi(2)).sqrt();
        assert!((s[0].accuracy_sd.unwrap() - sd).abs() < 1e-15);
    }

    #[test]
    fn suite_names() {
        for s in [Suite::Synthetic, Suite::Tuebingen, Suite::Confounder, Suite::Significance] {
            assert_eq!(s.to_string().parse::<Suite>().unwrap(), s);
        }
        assert_eq!(summary_path(Path::new("out/r.csv")), Path::new("out/r.summary.csv"));
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(vec![4.0, 1.0]), Some(2.5));
        assert_eq!(median(vec![]), None);
    }

    #[test]
    fn seeds_from_reps_or_list() {
        let mut cfg = RunConfig::default();
        cfg.seeds = vec![7];
        let opts = BenchOptions {
            reps: Some(3),
            ..Default::default()
        };
        assert_eq!(trial_seeds(&cfg, &opts, 100), vec![7, 8, 9]);
        cfg.seeds = vec![1, 5];
        assert_eq!(trial_seeds(&cfg, &opts, 100), vec![1, 5]);
    }
}
