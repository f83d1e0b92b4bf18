mod common;

use otcause::divergence::{BatchData, DebiasFn, Objective, Params, PnlTransform};
use otcause::optimize::{fit_theta, FitConfig, ThetaMethod};
use otcause::pairdata::make_batches;
use otcause::{NoiseSource, SamplePair};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bisection() -> FitConfig {
    FitConfig {
        theta_method: ThetaMethod::Bisection,
        ..FitConfig::default()
    }
}

proptest! {
    #[test]
    fn raw_matches_direct_formula(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (batches, draws) = common::random_batches(&mut rng, 4, 10);
        let obj = Objective::from_parts(batches.clone(), draws.clone(), 1.0).unwrap();
        let theta = rng.random_range(0.1..3.0);
        let w = rng.random_range(-2.0..2.0);
        let omega = [0.3, -0.7, 0.2];
        let p = Params {
            theta,
            debias: DebiasFn::new(w),
            pnl: Some(PnlTransform::new(omega[0], omega[1], omega[2])),
        };
        let direct = common::direct_measure(&batches, &draws, theta, w, Some(omega));
        prop_assert!((obj.raw(&p) - direct).abs() <= 1e-12 * direct.max(1.0));
        prop_assert!(obj.raw(&p) >= 0.0);
    }

    #[test]
    fn batch_constants_do_not_matter(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (batches, draws) = common::random_batches(&mut rng, 3, 10);
        let shifted: Vec<BatchData> = batches
            .iter()
            .map(|b| {
                let c = rng.random_range(-5.0..5.0);
                BatchData { ys: b.ys.iter().map(|y| y + c).collect(), ..b.clone() }
            })
            .collect();
        let a = Objective::from_parts(batches, draws.clone(), 1.0).unwrap();
        let b = Objective::from_parts(shifted, draws, 1.0).unwrap();
        let p = Params::anm(0.9);
        prop_assert!((a.raw(&p) - b.raw(&p)).abs() <= 1e-10);
    }

    #[test]
    fn theta_fit_ignores_batch_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (batches, draws) = common::random_batches(&mut rng, 5, 10);
        let mut order: Vec<usize> = (0..5).collect();
        order.shuffle(&mut rng);
        let a = Objective::from_parts(batches.clone(), draws.clone(), 1.0).unwrap();
        let b = Objective::from_parts(
            order.iter().map(|&i| batches[i].clone()).collect(),
            order.iter().map(|&i| draws[i].clone()).collect(),
            1.0,
        ).unwrap();
        let p = Params::anm(1.0);
        let ta = fit_theta(&a, &p, &FitConfig::default()).unwrap();
        let tb = fit_theta(&b, &p, &FitConfig::default()).unwrap();
        prop_assert!((ta - tb).abs() <= 1e-12 * ta.max(1.0));
    }

    #[test]
    fn closed_form_agrees_with_bisection(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (batches, draws) = common::random_batches(&mut rng, 4, 12);
        let obj = Objective::from_parts(batches, draws, 1.0).unwrap();
        let p = Params::anm(1.0);
        let closed = fit_theta(&obj, &p, &FitConfig::default()).unwrap();
        let bisected = fit_theta(&obj, &p, &bisection()).unwrap();
        prop_assert!((closed - bisected).abs() <= 1e-4);
        prop_assert!(common::unimodal_on_grid(|t| obj.raw(&Params::anm(t)), 1e-3, 2.0 * closed + 1.0, 200));
    }

    #[test]
    fn batches_follow_rows_not_order(xs in prop::collection::hash_set(-1000i32..1000, 10..60), seed in any::<u64>()) {
        // only without distance ties is membership independent of row order
        let xs: Vec<f64> = xs.into_iter().map(|v| v as f64 / 10.0).collect();
        let mut perm: Vec<usize> = (0..xs.len()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let pxs: Vec<f64> = perm.iter().map(|&i| xs[i]).collect();
        let positions = [xs[0], xs[xs.len() / 2]];
        for p in positions {
            let mut d: Vec<f64> = xs.iter().map(|x| (x - p).abs()).collect();
            d.sort_by(f64::total_cmp);
            prop_assume!(d.windows(2).all(|w| w[0] != w[1]));
        }
        let a = make_batches(&xs, &positions, 0.2).unwrap();
        let b = make_batches(&pxs, &positions, 0.2).unwrap();
        for (ra, rb) in a.batches.iter().zip(&b.batches) {
            let mut va: Vec<f64> = ra.iter().map(|&i| xs[i]).collect();
            let mut vb: Vec<f64> = rb.iter().map(|&i| pxs[i]).collect();
            va.sort_by(f64::total_cmp);
            vb.sort_by(f64::total_cmp);
            prop_assert_eq!(va, vb);
        }
    }
}

#[test]
fn zero_at_the_generating_scale() {
    // every batch holds an exact shifted copy of its scaled draws; dyadic
    // values keep the arithmetic exact
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let theta = 2.0;
    let mut batches = Vec::new();
    let mut draws = Vec::new();
    for b in 0..6 {
        let size = rng.random_range(2..9);
        let mut d: Vec<f64> = (0..size).map(|_| rng.random_range(0..64) as f64 / 64.0).collect();
        d.sort_by(f64::total_cmp);
        let g = (b as f64 * 0.75).floor();
        let mut ys: Vec<f64> = d.iter().map(|e| g + theta * e).collect();
        ys.shuffle(&mut rng);
        batches.push(BatchData { position: b as f64, xs: vec![b as f64; size], ys });
        draws.push(d);
    }
    let obj = Objective::from_parts(batches, draws, 1.0).unwrap();
    assert_eq!(obj.raw(&Params::anm(theta)), 0.0);
    assert!(obj.raw(&Params::anm(1.5)) > 0.0);
}

#[test]
fn constant_shift_is_exactly_zero() {
    let obj = Objective::from_parts(
        vec![BatchData { position: 0.0, xs: vec![0.0; 3], ys: vec![3.0, 1.0, 2.0] }],
        vec![vec![0.0, 1.0, 2.0]],
        1.0,
    )
    .unwrap();
    assert_eq!(obj.raw(&Params::anm(1.0)).to_bits(), 0.0f64.to_bits());
}

#[test]
fn analytic_gradient_matches_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let (obj, p, _, _) = common::tie_free_instance(&mut rng, 1e-3);
        let (_, g) = obj.gradient(&p);
        let fd = common::finite_differences(&obj, &p, 1e-5);
        let analytic = [g.theta, g.w, g.omega[0], g.omega[1], g.omega[2]];
        for (a, f) in analytic.iter().zip(fd) {
            assert!(common::relative_error(*a, f) < 1e-4, "{analytic:?} vs {fd:?}");
        }
    }
}

#[test]
fn objective_is_deterministic_in_seed() {
    let pairs = SamplePair::new(
        (0..40).map(|i| i as f64 / 40.0).collect(),
        (0..40).map(|i| ((i * 7) % 13) as f64).collect(),
    )
    .unwrap();
    let xs = pairs.xs().to_vec();
    let set = make_batches(&xs, &[0.2, 0.5, 0.8], 0.25).unwrap();
    let a = Objective::new(&pairs, &set, &NoiseSource::Normal, 3).unwrap();
    let b = Objective::new(&pairs, &set, &NoiseSource::Normal, 3).unwrap();
    let c = Objective::new(&pairs, &set, &NoiseSource::Normal, 4).unwrap();
    let p = Params::anm(1.0);
    assert_eq!(a.raw(&p), b.raw(&p));
    assert_ne!(a.raw(&p), c.raw(&p));
}
