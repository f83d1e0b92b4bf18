//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use otcause::divergence::BatchData;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Minimum over all permutations of the mean squared matched difference.
pub fn brute_force_w2(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, &mut |p| {
        let cost: f64 = p.iter().enumerate().map(|(i, &j)| (a[i] - b[j]).powi(2)).sum();
        best = best.min(cost / n as f64);
    });
    best
}

fn permute(p: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}

/// The measure written out directly: per batch, transform, debias, sort,
/// subtract scaled sorted draws, take the sample variance; average batches.
pub fn direct_measure(
    batches: &[BatchData],
    draws: &[Vec<f64>],
    theta: f64,
    w: f64,
    omega: Option<[f64; 3]>,
) -> f64 {
    let mut total = 0.0;
    for (b, d) in batches.iter().zip(draws) {
        let mut u: Vec<f64> = b
            .ys
            .iter()
            .zip(&b.xs)
            .map(|(&y, &x)| {
                let t = match omega {
                    Some([a, bb, c]) => y + a * (bb * y + c).tanh(),
                    None => y,
                };
                t - w * x
            })
            .collect();
        u.sort_by(|p, q| p.partial_cmp(q).unwrap());
        let mut ds = d.clone();
        ds.sort_by(|p, q| p.partial_cmp(q).unwrap());
        let v: Vec<f64> = u.iter().zip(&ds).map(|(r, s)| r - theta * s).collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        total += v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    }
    total / batches.len() as f64
}

/// Random batches with sorted uniform draws.
pub fn random_batches(rng: &mut ChaCha8Rng, n_batches: usize, max_size: usize) -> (Vec<BatchData>, Vec<Vec<f64>>) {
    let mut batches = Vec::new();
    let mut draws = Vec::new();
    for b in 0..n_batches {
        let size = rng.random_range(2..=max_size);
        let position = b as f64;
        let xs: Vec<f64> = (0..size).map(|_| position + rng.random_range(-0.5..0.5)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin() + rng.random_range(0.0..2.0)).collect();
        let mut d: Vec<f64> = (0..size).map(|_| rng.random::<f64>()).collect();
        d.sort_by(f64::total_cmp);
        batches.push(BatchData { position, xs, ys });
        draws.push(d);
    }
    (batches, draws)
}

/// True if `f` sampled on `k` evenly spaced points of `[lo, hi]` never rises
/// and then falls again (non-increasing, then non-decreasing).
pub fn unimodal_on_grid(f: impl Fn(f64) -> f64, lo: f64, hi: f64, k: usize) -> bool {
    let vals: Vec<f64> = (0..k).map(|i| f(lo + (hi - lo) * i as f64 / (k - 1) as f64)).collect();
    let tol = 1e-12 * vals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut rising = false;
    for w in vals.windows(2) {
        if w[1] > w[0] + tol {
            rising = true;
        } else if rising && w[1] < w[0] - tol {
            return false;
        }
    }
    true
}

use otcause::divergence::{DebiasFn, Objective, Params, PnlTransform};

/// Random objective with a transform and debiasing slope, rejected until
/// every batch's transformed residuals are at least `gap` apart, so small
/// parameter perturbations cannot reorder them.
pub fn tie_free_instance(rng: &mut ChaCha8Rng, gap: f64) -> (Objective, Params, Vec<BatchData>, Vec<Vec<f64>>) {
    loop {
        let k = rng.random_range(1..5);
        let (batches, draws) = random_batches(rng, k, 12);
        let params = Params {
            theta: rng.random_range(0.2..3.0),
            debias: DebiasFn::new(rng.random_range(-1.0..1.0)),
            pnl: Some(PnlTransform::new(
                rng.random_range(-0.8..0.8),
                rng.random_range(-1.5..1.5),
                rng.random_range(-0.5..0.5),
            )),
        };
        let t = params.pnl.unwrap();
        let separated = batches.iter().all(|b| {
            let mut u: Vec<f64> = b
                .ys
                .iter()
                .zip(&b.xs)
                .map(|(&y, &x)| t.apply(y) - params.debias.eval(x))
                .collect();
            u.sort_by(f64::total_cmp);
            u.windows(2).all(|w| w[1] - w[0] > gap)
        });
        if separated {
            let obj = Objective::from_parts(batches.clone(), draws.clone(), 1.0 / 12.0).unwrap();
            return (obj, params, batches, draws);
        }
    }
}

/// Central differences of the raw measure in `(theta, w, a, b, c)`.
pub fn finite_differences(obj: &Objective, p: &Params, h: f64) -> [f64; 5] {
    let eval = |k: usize, d: f64| {
        let mut q = *p;
        let mut t = q.pnl.unwrap();
        match k {
            0 => q.theta += d,
            1 => q.debias.w += d,
            2 => t.a += d,
            3 => t.b += d,
            _ => t.c += d,
        }
        q.pnl = Some(t);
        obj.raw(&q)
    };
    std::array::from_fn(|k| (eval(k, h) - eval(k, -h)) / (2.0 * h))
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// `x -> y -> z` with `y = cubic(x) + u`, `z = sine(y / 2) + u`, standardized.
pub fn chain_data(n: usize, seed: u64) -> Vec<Vec<f64>> {
    use otcause::multivar::standardize_columns;
    use otcause::Mechanism;
    use rand::SeedableRng;
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = x.iter().map(|&x| Mechanism::Cubic.eval(x) + r.random::<f64>()).collect();
    let z: Vec<f64> = y.iter().map(|&y| Mechanism::Sine.eval(0.5 * y) + r.random::<f64>()).collect();
    standardize_columns(&[x, y, z]).unwrap()
}

/// `x -> z <- y` with `z = cubic(x) + sine(y) + u`, standardized.
pub fn collider_data(n: usize, seed: u64) -> Vec<Vec<f64>> {
    use otcause::multivar::standardize_columns;
    use otcause::Mechanism;
    use rand::SeedableRng;
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let z: Vec<f64> = x
        .iter()
        .zip(&y)
        .map(|(&x, &y)| Mechanism::Cubic.eval(x) + Mechanism::Sine.eval(y) + r.random::<f64>())
        .collect();
    standardize_columns(&[x, y, z]).unwrap()
}
