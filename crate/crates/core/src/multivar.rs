//! Orienting the edges of a known skeleton.
//!
//! Every acyclic orientation of the skeleton is scored with a sum of
//! per-variable measures: each variable is batched by nearest neighbours in the
//! space of its parents and fitted against its own noise, roots as a single
//! batch of the whole sample. The orientation with the smallest sum wins.
//!
//! A variable's summand depends only on the variable and its parent set, so
//! the summands are computed once per distinct `(variable, parents)` pair.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::decide::{PipelineConfig, TIE_TOLERANCE};
use crate::divergence::{BatchData, Objective, Params};
use crate::error::{Error, Result};
use crate::noise::{sorted_batch_draws, NoiseSource, Source};
use crate::optimize::fit_theta;
use crate::pairdata::{batch_len, nearest_rows, select_positions};

/// Default cap on the number of skeleton edges (4096 orientations).
pub const MAX_EDGES: usize = 12;

/// Undirected graph over variables `0..m`. Edges are stored as `(lo, hi)`
/// pairs in the order given.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Skeleton {
    m: usize,
    edges: Vec<(usize, usize)>,
}

impl Skeleton {
    pub fn new(m: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for (a, b) in edges {
            if a >= m || b >= m {
                return Err(Error::Config(format!(
                    "edge {a}-{b} refers to a variable outside 0..{m}"
                )));
            }
            if a == b {
                return Err(Error::Config(format!("self-loop on variable {a}")));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(Error::Config(format!("duplicate edge {}-{}", e.0, e.1)));
            }
            out.push(e);
        }
        Ok(Self { m, edges: out })
    }

    /// Parses an edge list: one `i j` pair of 0-based indices per line,
    /// `#` comments and blank lines ignored.
    pub fn parse(text: &str, m: usize) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|_| Error::Parse {
                    line: lineno + 1,
                    message: format!("bad variable index {s:?}"),
                })
            };
            if fields.len() != 2 {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: format!("expected 2 indices, found {}", fields.len()),
                });
            }
            edges.push((parse(fields[0])?, parse(fields[1])?));
        }
        Self::new(m, edges)
    }

    pub fn load(path: impl AsRef<Path>, m: usize) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, m)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// The orientation that flips edge `e` (to `hi -> lo`) exactly when
    /// `flips[e]` is set. `None` if it has a cycle.
    pub fn orient(&self, flips: &[bool]) -> Option<DagOrientation> {
        assert_eq!(flips.len(), self.edges.len());
        let edges = self
            .edges
            .iter()
            .zip(flips)
            .map(|(&(a, b), &f)| if f { (b, a) } else { (a, b) })
            .collect();
        DagOrientation::new(self.m, edges).ok()
    }
}

/// Directed acyclic graph with cached parent sets (ascending).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DagOrientation {
    edges: Vec<(usize, usize)>,
    parents: Vec<Vec<usize>>,
}

impl DagOrientation {
    /// `edges` are `(parent, child)` pairs.
    pub fn new(m: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        // rejects self-loops and edges present in both directions
        Skeleton::new(m, edges.iter().copied())?;
        let mut parents = vec![Vec::new(); m];
        for &(p, c) in &edges {
            parents[c].push(p);
        }
        parents.iter_mut().for_each(|p| p.sort_unstable());
        if has_cycle(m, &edges) {
            return Err(Error::Config("orientation has a directed cycle".into()));
        }
        Ok(Self { edges, parents })
    }

    pub fn m(&self) -> usize {
        self.parents.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn parents(&self, i: usize) -> &[usize] {
        &self.parents[i]
    }
}

fn has_cycle(m: usize, edges: &[(usize, usize)]) -> bool {
    let mut indegree = vec![0usize; m];
    let mut children = vec![Vec::new(); m];
    for &(p, c) in edges {
        indegree[c] += 1;
        children[p].push(c);
    }
    let mut ready: Vec<usize> = (0..m).filter(|&i| indegree[i] == 0).collect();
    let mut visited = 0;
    while let Some(v) = ready.pop() {
        visited += 1;
        for &c in &children[v] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(c);
            }
        }
    }
    visited < m
}

/// Equal-length data columns, one per variable.
pub fn check_columns(data: &[Vec<f64>]) -> Result<usize> {
    let n = data.first().map_or(0, Vec::len);
    for col in data {
        if col.len() != n {
            return Err(Error::Shape {
                expected: n,
                actual: col.len(),
            });
        }
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite observation".into()));
        }
    }
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 rows, got {n}"
        )));
    }
    Ok(n)
}

/// Reads a whitespace-separated table with one column per variable.
pub fn load_columns(path: impl AsRef<Path>) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|s| s.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| Error::Parse {
                line: lineno + 1,
                message: "malformed numeric field".into(),
            })?;
        if cols.is_empty() {
            cols = vec![Vec::new(); row.len()];
        }
        if row.len() != cols.len() {
            return Err(Error::Parse {
                line: lineno + 1,
                message: format!("expected {} fields, found {}", cols.len(), row.len()),
            });
        }
        cols.iter_mut().zip(row).for_each(|(c, v)| c.push(v));
    }
    check_columns(&cols)?;
    Ok(cols)
}

/// Z-scores every column (sample standard deviation).
pub fn standardize_columns(data: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    check_columns(data)?;
    data.iter()
        .enumerate()
        .map(|(i, col)| {
            let (m, sd) = mean_sd(col);
            if sd == 0.0 {
                return Err(Error::DegenerateData(format!(
                    "variable {i} has zero standard deviation"
                )));
            }
            Ok(col.iter().map(|v| (v - m) / sd).collect())
        })
        .collect()
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let ss: f64 = v.iter().map(|x| (x - m).powi(2)).sum();
    (m, (ss / (n - 1.0)).sqrt())
}

/// One variable's contribution to an orientation score.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableScore {
    pub variable: usize,
    pub parents: Vec<usize>,
    pub theta: f64,
    pub raw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultivarScore {
    /// Sum of the per-variable raw measures.
    pub total: f64,
    pub variables: Vec<VariableScore>,
}

/// Anchor, row indices and per-row cause value of each batch for a variable
/// with the given parents.
///
/// A single parent is batched exactly as in the bivariate case. Several parents
/// are standardized and batched by Euclidean distance around evenly spaced
/// anchor rows (the cause value is then unused and set to 0). A root gets one
/// batch holding every row.
fn parent_batches(
    data: &[Vec<f64>],
    parents: &[usize],
    config: &PipelineConfig,
) -> Vec<(f64, Vec<usize>, Vec<f64>)> {
    let n = data[0].len();
    let k = batch_len(config.batch_frac.resolve(n), n);
    match parents {
        [] => vec![(0.0, (0..n).collect(), vec![0.0; n])],
        [p] => {
            let cause = &data[*p];
            select_positions(cause, config.max_positions)
                .into_iter()
                .map(|pos| {
                    let rows = nearest_rows(n, k, |i| (cause[i] - pos).abs());
                    let xs = rows.iter().map(|&i| cause[i]).collect();
                    (pos, rows, xs)
                })
                .collect()
        }
        many => {
            let scaled: Vec<Vec<f64>> = many
                .iter()
                .map(|&p| {
                    let (m, sd) = mean_sd(&data[p]);
                    let sd = if sd > 0.0 { sd } else { 1.0 };
                    data[p].iter().map(|v| (v - m) / sd).collect()
                })
                .collect();
            let anchors: Vec<usize> = if n <= config.max_positions {
                (0..n).collect()
            } else {
                (0..config.max_positions)
                    .map(|j| j * n / config.max_positions)
                    .collect()
            };
            anchors
                .into_iter()
                .map(|a| {
                    let rows = nearest_rows(n, k, |i| {
                        scaled.iter().map(|c| (c[i] - c[a]).powi(2)).sum::<f64>()
                    });
                    let xs = vec![0.0; rows.len()];
                    (a as f64, rows, xs)
                })
                .collect()
        }
    }
}

/// The fitted measure of `variable` given `parents`.
pub fn variable_score(
    data: &[Vec<f64>],
    variable: usize,
    parents: &[usize],
    noise: NoiseSource,
    config: &PipelineConfig,
    seed: u64,
) -> Result<VariableScore> {
    let child = &data[variable];
    let batches: Vec<BatchData> = parent_batches(data, parents, config)
        .into_iter()
        .map(|(position, rows, xs)| BatchData {
            position,
            ys: rows.iter().map(|&i| child[i]).collect(),
            xs,
        })
        .collect();
    if batches.iter().any(|b| b.ys.len() < 2) {
        return Err(Error::InsufficientData(format!(
            "variable {variable}: batches of {} rows are too small",
            batches[0].ys.len()
        )));
    }
    let sizes: Vec<usize> = batches.iter().map(|b| b.ys.len()).collect();
    let draws = sorted_batch_draws(&noise, &sizes, seed);
    let objective = Objective::from_parts(batches, draws, noise.unit_variance())?;
    let mut params = Params::anm(1.0);
    params.theta = fit_theta(&objective, &params, &config.fit)?;
    Ok(VariableScore {
        variable,
        parents: parents.to_vec(),
        theta: params.theta,
        raw: objective.raw(&params),
    })
}

fn check_noises(m: usize, noises: &[NoiseSource]) -> Result<()> {
    if noises.len() != m {
        return Err(Error::Shape {
            expected: m,
            actual: noises.len(),
        });
    }
    Ok(())
}

/// Sum over variables of the measure of each variable given its parents in
/// `dag`. Only `theta` is fitted; the debiasing and transform settings of
/// `config` are ignored.
pub fn multivariate_measure(
    data: &[Vec<f64>],
    dag: &DagOrientation,
    noises: &[NoiseSource],
    config: &PipelineConfig,
    seed: u64,
) -> Result<MultivarScore> {
    check_columns(data)?;
    let m = dag.m();
    if data.len() != m {
        return Err(Error::Shape {
            expected: m,
            actual: data.len(),
        });
    }
    check_noises(m, noises)?;
    let variables = (0..m)
        .into_par_iter()
        .map(|i| variable_score(data, i, dag.parents(i), noises[i], config, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(MultivarScore {
        total: variables.iter().map(|v| v.raw).sum(),
        variables,
    })
}

/// One scored orientation; `flips[e]` tells whether skeleton edge `e` points
/// from its larger to its smaller index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredOrientation {
    pub flips: Vec<bool>,
    pub dag: DagOrientation,
    pub score: MultivarScore,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrientResult {
    pub best: ScoredOrientation,
    /// Number of acyclic orientations scored.
    pub candidates: usize,
    /// Other orientations whose score equals the best one within the tie
    /// tolerance. The best is the one with the lexicographically smallest
    /// `flips`.
    pub ties: Vec<ScoredOrientation>,
}

/// Scores every acyclic orientation of `skeleton` and returns the minimizer.
pub fn orient_skeleton(
    data: &[Vec<f64>],
    skeleton: &Skeleton,
    noises: &[NoiseSource],
    config: &PipelineConfig,
    max_edges: usize,
    seed: u64,
) -> Result<OrientResult> {
    check_columns(data)?;
    let e = skeleton.edges().len();
    if e > max_edges {
        return Err(Error::TooLarge {
            edges: e,
            limit: max_edges,
        });
    }
    if data.len() != skeleton.m() {
        return Err(Error::Shape {
            expected: skeleton.m(),
            actual: data.len(),
        });
    }
    check_noises(skeleton.m(), noises)?;
    // flip vectors in lexicographic order (edge 0 is the most significant)
    let dags: Vec<(Vec<bool>, DagOrientation)> = (0u64..1 << e)
        .filter_map(|code| {
            let flips: Vec<bool> = (0..e).map(|i| code >> (e - 1 - i) & 1 == 1).collect();
            skeleton.orient(&flips).map(|d| (flips, d))
        })
        .collect();
    let needed: BTreeSet<(usize, Vec<usize>)> = dags
        .iter()
        .flat_map(|(_, d)| (0..d.m()).map(|i| (i, d.parents(i).to_vec())))
        .collect();
    let cache: BTreeMap<(usize, Vec<usize>), VariableScore> = needed
        .into_par_iter()
        .map(|(i, pa)| {
            let s = variable_score(data, i, &pa, noises[i], config, seed)?;
            Ok(((i, pa), s))
        })
        .collect::<Result<_>>()?;
    let scored: Vec<ScoredOrientation> = dags
        .into_iter()
        .map(|(flips, dag)| {
            let variables: Vec<VariableScore> = (0..dag.m())
                .map(|i| cache[&(i, dag.parents(i).to_vec())].clone())
                .collect();
            ScoredOrientation {
                flips,
                score: MultivarScore {
                    total: variables.iter().map(|v| v.raw).sum(),
                    variables,
                },
                dag,
            }
        })
        .collect();
    let candidates = scored.len();
    let min = scored
        .iter()
        .map(|s| s.score.total)
        .fold(f64::INFINITY, f64::min);
    let mut tied = scored
        .into_iter()
        .filter(|s| s.score.total - min <= TIE_TOLERANCE);
    let best = tied.next().expect("the all-forward orientation is always acyclic");
    Ok(OrientResult {
        best,
        candidates,
        ties: tied.collect(),
    })
}
