//! Cause-effect pair ingestion, preprocessing, position selection and batching.
//!
//! A [`SamplePair`] is an ordered list of `(x, y)` observations together with a
//! record of every transformation applied to it. Downstream code treats one
//! column as the hypothesized cause; the positions and batches built here are
//! always computed on that cause axis.

use std::fs;
use std::path::Path;

use log::debug;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// One preprocessing step applied to a [`SamplePair`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Step {
    Loaded { source: String, columns: (usize, usize) },
    Normalized { mean: (f64, f64), sd: (f64, f64) },
    Trimmed { k_std: f64, removed: usize },
    Subsampled { from: usize, to: usize, seed: u64 },
    Resampled { seed: u64 },
    Swapped,
}

/// Paired observations of two variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePair {
    xs: Vec<f64>,
    ys: Vec<f64>,
    provenance: Vec<Step>,
}

impl SamplePair {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::Shape {
                expected: xs.len(),
                actual: ys.len(),
            });
        }
        if xs.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "need at least 2 rows, got {}",
                xs.len()
            )));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite observation".into()));
        }
        Ok(Self {
            xs,
            ys,
            provenance: Vec::new(),
        })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn provenance(&self) -> &[Step] {
        &self.provenance
    }

    fn with_step(mut self, step: Step) -> Self {
        self.provenance.push(step);
        self
    }

    fn derived(&self, xs: Vec<f64>, ys: Vec<f64>, step: Step) -> Self {
        let mut provenance = self.provenance.clone();
        provenance.push(step);
        Self { xs, ys, provenance }
    }

    /// The same observations with the roles of the two columns exchanged.
    pub fn swapped(&self) -> Self {
        self.derived(self.ys.clone(), self.xs.clone(), Step::Swapped)
    }

    /// Z-scores both columns using the sample standard deviation (n - 1).
    pub fn normalize(&self) -> Result<Self> {
        let (mx, sx) = mean_sd(&self.xs);
        let (my, sy) = mean_sd(&self.ys);
        if sx == 0.0 || sy == 0.0 {
            return Err(Error::DegenerateData(format!(
                "zero standard deviation in column {}",
                if sx == 0.0 { "x" } else { "y" }
            )));
        }
        let xs = self.xs.iter().map(|v| (v - mx) / sx).collect();
        let ys = self.ys.iter().map(|v| (v - my) / sy).collect();
        Ok(self.derived(
            xs,
            ys,
            Step::Normalized {
                mean: (mx, my),
                sd: (sx, sy),
            },
        ))
    }

    /// Keeps rows whose coordinates both satisfy `|v| <= k_std`.
    ///
    /// Meant for normalized data, where the threshold is in standard deviations.
    pub fn trim_outliers(&self, k_std: f64) -> Result<Self> {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| self.xs[i].abs() <= k_std && self.ys[i].abs() <= k_std)
            .collect();
        if keep.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "only {} rows within {k_std} standard deviations",
                keep.len()
            )));
        }
        let removed = self.len() - keep.len();
        Ok(self.select_rows(&keep, Step::Trimmed { k_std, removed }))
    }

    /// Uniform random subsample of `max_n` rows (original order kept).
    pub fn subsample(&self, max_n: usize, seed: u64) -> Self {
        if self.len() <= max_n {
            return self.clone();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = sample(&mut rng, self.len(), max_n).into_vec();
        rows.sort_unstable();
        self.select_rows(
            &rows,
            Step::Subsampled {
                from: self.len(),
                to: max_n,
                seed,
            },
        )
    }

    /// Resamples rows with replacement, keeping the sample size.
    pub fn resample(&self, seed: u64) -> Self {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.len();
        let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        self.select_rows(&rows, Step::Resampled { seed })
    }

    fn select_rows(&self, rows: &[usize], step: Step) -> Self {
        let xs = rows.iter().map(|&i| self.xs[i]).collect();
        let ys = rows.iter().map(|&i| self.ys[i]).collect();
        self.derived(xs, ys, step)
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Reads a whitespace-separated pair file.
///
/// Blank lines and lines starting with `#` are skipped. `columns` picks the
/// two fields used as `x` and `y` (default: the first two).
pub fn load_pairs(path: impl AsRef<Path>, columns: Option<(usize, usize)>) -> Result<SamplePair> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let columns = columns.unwrap_or((0, 1));
    let (xs, ys) = parse_pairs(&text, columns)?;
    if xs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} has {} data rows, need at least 2",
            path.display(),
            xs.len()
        )));
    }
    Ok(SamplePair::new(xs, ys)?.with_step(Step::Loaded {
        source: path.display().to_string(),
        columns,
    }))
}

fn parse_pairs(text: &str, (cx, cy): (usize, usize)) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let field = |c: usize| -> Result<f64> {
            let raw = fields.get(c).ok_or_else(|| Error::Parse {
                line: lineno + 1,
                message: format!("missing column {c} (line has {} fields)", fields.len()),
            })?;
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    line: lineno + 1,
                    message: format!("malformed numeric field {raw:?}"),
                })
        };
        xs.push(field(cx)?);
        ys.push(field(cy)?);
    }
    Ok((xs, ys))
}

/// Normalize, trim rows beyond `k_std`, then subsample to at most `max_n` rows.
pub fn preprocess(pairs: &SamplePair, max_n: usize, k_std: f64, seed: u64) -> Result<SamplePair> {
    let trimmed = pairs.normalize()?.trim_outliers(k_std)?;
    Ok(trimmed.subsample(max_n, seed))
}

/// Batch fraction used for a sample of size `n` when none is given.
pub fn default_batch_frac(n: usize) -> f64 {
    match n {
        0..=10 => 0.4,
        11..=50 => 0.2,
        51..=200 => 0.15,
        _ => 0.05,
    }
}

/// Anchor values on the cause axis at which batches are gathered.
///
/// With at most `max_positions` rows every distinct value is a position.
/// Otherwise the range is cut into `max_positions` equal cells and the centre
/// of each cell is snapped to the nearest observed value. The result is sorted
/// and free of duplicates.
pub fn select_positions(cause: &[f64], max_positions: usize) -> Vec<f64> {
    let mut values = cause.to_vec();
    values.sort_by(f64::total_cmp);
    values.dedup();
    if cause.len() <= max_positions || values.len() <= 1 {
        return values;
    }
    let (lo, hi) = (values[0], values[values.len() - 1]);
    let step = (hi - lo) / max_positions as f64;
    let mut positions: Vec<f64> = (0..max_positions)
        .map(|k| snap(&values, lo + k as f64 * step))
        .collect();
    positions.dedup();
    positions
}

/// Nearest element of the sorted slice; the smaller one on an exact tie.
fn snap(sorted: &[f64], target: f64) -> f64 {
    let idx = sorted.partition_point(|&v| v < target);
    match idx {
        0 => sorted[0],
        i if i == sorted.len() => sorted[i - 1],
        i => {
            let (below, above) = (sorted[i - 1], sorted[i]);
            if target - below <= above - target {
                below
            } else {
                above
            }
        }
    }
}

/// Neighbourhoods of each position on the cause axis.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchSet {
    pub positions: Vec<f64>,
    /// Row indices of each batch, ascending.
    pub batches: Vec<Vec<usize>>,
}

impl BatchSet {
    pub fn batch_sizes(&self) -> Vec<usize> {
        self.batches.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.batches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batches.is_empty()
    }
}

/// `ceil(frac * n)`, tolerant of floating error in the product.
pub fn batch_len(batch_frac: f64, n: usize) -> usize {
    let k = (batch_frac * n as f64 - 1e-9).ceil().max(1.0) as usize;
    k.min(n)
}

/// The `k` rows with smallest `distance`, ties going to the smaller index.
/// Returned ascending by row index.
pub fn nearest_rows(n: usize, k: usize, distance: impl Fn(usize) -> f64) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> = (0..n).map(|i| (distance(i), i)).collect();
    let by_key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < n {
        keyed.select_nth_unstable_by(k, by_key);
        keyed.truncate(k);
    }
    let mut rows: Vec<usize> = keyed.into_iter().map(|(_, i)| i).collect();
    rows.sort_unstable();
    rows
}

/// Groups the `ceil(batch_frac * n)` nearest rows around each position.
pub fn make_batches(cause: &[f64], positions: &[f64], batch_frac: f64) -> Result<BatchSet> {
    if !(batch_frac > 0.0 && batch_frac <= 1.0) {
        return Err(Error::Config(format!(
            "batch fraction must be in (0, 1], got {batch_frac}"
        )));
    }
    let n = cause.len();
    let k = batch_len(batch_frac, n);
    let mut set = BatchSet {
        positions: Vec::with_capacity(positions.len()),
        batches: Vec::with_capacity(positions.len()),
    };
    for &p in positions {
        if k < 2 {
            debug!("dropping position {p}: batch of {k} rows is too small");
            continue;
        }
        set.positions.push(p);
        set.batches.push(nearest_rows(n, k, |i| (cause[i] - p).abs()));
    }
    if set.is_empty() {
        return Err(Error::InsufficientData(format!(
            "no batch reaches 2 rows (n = {n}, batch fraction = {batch_frac})"
        )));
    }
    Ok(set)
}
