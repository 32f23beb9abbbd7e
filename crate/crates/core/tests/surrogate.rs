use bmapf::bo::{maximize, BoConfig};
use bmapf::gp::{gp_posterior, GpDataset, KernelConfig};
use bmapf::models::ParamDomain;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Predictive mean and variance by an explicit LU solve of the full system.
fn dense_oracle(kernel: &KernelConfig, xs: &[f64], ys: &[f64], q: f64, jitter: f64) -> (f64, f64) {
    let n = xs.len();
    let k = |a: f64, b: f64| kernel.signal_variance * (-0.5 * ((a - b) / kernel.length_scales[0]).powi(2)).exp();
    let gram = DMatrix::from_fn(n, n, |i, j| {
        k(xs[i], xs[j]) + if i == j { kernel.noise_variance + jitter } else { 0.0 }
    });
    let kq = DVector::from_fn(n, |i, _| k(xs[i], q));
    let lu = gram.lu();
    let alpha = lu.solve(&DVector::from_column_slice(ys)).unwrap();
    let v = lu.solve(&kq).unwrap();
    (kq.dot(&alpha), (k(q, q) - kq.dot(&v)).max(0.0))
}

#[test]
fn gp_matches_dense_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let n = rng.random_range(1..=30);
        let kernel = KernelConfig::gaussian(vec![rng.random_range(0.05..0.5)], rng.random_range(0.5..2.0), rng.random_range(0.01..1.0));
        let mut data = GpDataset::new(kernel.clone());
        let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (6.0 * x).sin() + rng.random_range(-0.1..0.1)).collect();
        for (x, y) in xs.iter().zip(&ys) {
            data.push(vec![*x], *y);
        }
        let jitter = data.fit().unwrap().jitter();
        for _ in 0..5 {
            let q = rng.random::<f64>();
            let (m, v) = gp_posterior(&data, &[q]).unwrap();
            let (mo, vo) = dense_oracle(&kernel, &xs, &ys, q, jitter);
            assert!((m - mo).abs() <= 1e-8 * mo.abs().max(1e-3), "{m} vs {mo}");
            assert!((v - vo).abs() <= 1e-8 * vo.abs().max(1e-3), "{v} vs {vo}");
        }
    }
}

#[test]
fn gp_reproduces_training_values_without_noise() {
    let mut data = GpDataset::new(KernelConfig::gaussian(vec![0.2], 1.0, 0.0));
    let xs = [0.05, 0.3, 0.55, 0.8, 0.95];
    for &x in &xs {
        data.push(vec![x], 100.0 * (3.0 * x).cos());
    }
    for (&x, &y) in xs.iter().zip(data.values()) {
        let (m, _) = gp_posterior(&data, &[x]).unwrap();
        assert!((m - y).abs() <= 1e-8 * 100.0, "{m} vs {y}");
    }
}

fn min_gap(xs: &[f64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    s.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

#[test]
fn large_alpha_spreads_queries() {
    let domain = ParamDomain::interval(0.0, 1.0).unwrap();
    let f = |t: &[f64], _: usize| -(t[0] - 0.657).powi(2);
    let mut wins = 0;
    for seed in 0..20 {
        let base = BoConfig {
            budget: 20,
            kernel: KernelConfig::gaussian(vec![0.1], 1.0, 1e-6),
            seed,
            ..BoConfig::default()
        };
        let explore = maximize(f, &domain, &BoConfig { alpha: 1e6, ..base.clone() }).unwrap();
        let exploit = maximize(f, &domain, &BoConfig { alpha: 0.0, ..base }).unwrap();
        let gap = |r: &bmapf::bo::BoResult| min_gap(&r.queries.iter().map(|q| q.theta[0]).collect::<Vec<_>>());
        if gap(&explore) > gap(&exploit) {
            wins += 1;
        }
    }
    // sign test: 15 of 20 has one-sided p ~ 0.02
    assert!(wins >= 15, "{wins}/20");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn bo_history_invariants(
        seed in any::<u64>(),
        budget in 5usize..25,
        c in -3.0f64..3.0,
        w in 1.0f64..20.0,
    ) {
        let domain = ParamDomain::interval(-1.0, 2.0).unwrap();
        let cfg = BoConfig { budget, seed, ..BoConfig::default() };
        let r = maximize(|t, _| (w * t[0]).sin() + c, &domain, &cfg).unwrap();
        prop_assert!(domain.contains(&r.best_theta));
        prop_assert_eq!(r.queries.len(), budget);
        prop_assert_eq!(r.history.len(), budget);
        let max = r.queries.iter().map(|q| q.value).fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(r.best_value, max);
        prop_assert_eq!(r.queries[r.best_index].value, max);
        prop_assert!(r.queries.iter().all(|q| domain.contains(&q.theta)));
    }
}
