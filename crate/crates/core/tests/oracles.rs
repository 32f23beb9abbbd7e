//! Particle estimates checked against exact linear-Gaussian answers.

use bmapf::bench::{kalman_filter, kalman_log_evidence, KalmanState};
use bmapf::bomsd::{objective_eval, plan};
use bmapf::models::{experiment_one_model, linear_gaussian_model, simulate, StateSpaceModel};
use bmapf::rng::{self, INIT_KEY};
use bmapf::smc::{resample, run_pf, ParticleCloud, ResampleScheme};
use bmapf::stats::paired_t_test_greater;
use nalgebra::{DMatrix, DVector};

const A: f64 = 0.9;

/// log N(y; mu, C) for the stacked observations, built from the joint
/// covariance of (x_1..x_T) without any recursion.
fn dense_log_evidence(a: f64, q: f64, r: f64, m0: f64, p0: f64, ys: &[f64]) -> f64 {
    let t = ys.len();
    let mut cov = DMatrix::<f64>::zeros(t, t);
    let mut mean = DVector::<f64>::zeros(t);
    for i in 1..=t {
        mean[i - 1] = a.powi(i as i32) * m0;
        for j in 1..=t {
            let mut c = a.powi((i + j) as i32) * p0;
            for s in 1..=i.min(j) {
                c += q * a.powi((i - s) as i32) * a.powi((j - s) as i32);
            }
            cov[(i - 1, j - 1)] = c + if i == j { r } else { 0.0 };
        }
    }
    let chol = cov.clone().cholesky().expect("SPD");
    let d = DVector::from_column_slice(ys) - mean;
    let z = chol.l().solve_lower_triangular(&d).unwrap();
    let logdet: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    -0.5 * (t as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + z.dot(&z))
}

#[test]
fn kalman_matches_dense_joint_gaussian() {
    let ys = [0.4, -1.1, 2.3, 0.7, -0.2];
    for &(m0, p0) in &[(0.0, 1.0), (0.5, 0.0), (-1.0, 2.5)] {
        let k = kalman_log_evidence(A, 1.0, 0.7, m0, p0, &ys);
        let d = dense_log_evidence(A, 1.0, 0.7, m0, p0, &ys);
        assert!((k - d).abs() < 1e-10, "{k} vs {d}");
    }
}

#[test]
fn one_step_evidence_close_to_kalman() {
    let model = linear_gaussian_model(1.0, 1.0).unwrap();
    let y = 1.3;
    let mut rng = rng::stream(5, &[]);
    let mut cloud = ParticleCloud::from_initial(&model, 100_000, &mut rng);
    cloud.propagate(&model, &[A], 1, &mut rng);
    let le = cloud.weight_and_evidence(&model, &[A], y, 1);
    let exact = kalman_log_evidence(A, 1.0, 1.0, 0.0, 1.0, &[y]);
    assert!((le - exact).abs() < 0.05, "{le} vs {exact}");
    let s: f64 = cloud.weights.iter().sum();
    assert!((s - 1.0).abs() < 1e-12);
}

#[test]
fn pf_log_evidence_close_to_kalman() {
    let model = linear_gaussian_model(1.0, 1.0).unwrap();
    let tr = simulate(&model, &[A], 50, 17).unwrap();
    let pf = run_pf(&model, &[A], &tr.observations, 100_000, 3).unwrap();
    let exact = kalman_log_evidence(A, 1.0, 1.0, 0.0, 1.0, &tr.observations);
    assert!((pf.log_evidence - exact).abs() < 0.5, "{} vs {exact}", pf.log_evidence);
}

#[test]
fn degenerate_noise_single_step() {
    // q -> 0 and a fixed start: every particle sits at a * x0 after one step.
    let model = linear_gaussian_model(1e-300, 0.5)
        .unwrap()
        .with_initial(bmapf::models::InitialState::Fixed(2.0));
    let pf = run_pf(&model, &[0.5], &[0.3], 64, 1).unwrap();
    let direct = model.obs_log_density(&[0.5], 0.3, 1.0, 1);
    assert!((pf.log_evidence - direct).abs() < 1e-12);
}

#[test]
fn constant_state_filter_tracks_start() {
    let model = linear_gaussian_model(1e-12, 0.25)
        .unwrap()
        .with_initial(bmapf::models::InitialState::Fixed(1.5));
    let tr = simulate(&model, &[1.0], 200, 8).unwrap();
    let pf = run_pf(&model, &[1.0], &tr.observations, 500, 2).unwrap();
    assert!((pf.filtered_means.last().unwrap() - 1.5).abs() < 1e-3);
}

#[test]
fn evidence_error_shrinks_with_particles() {
    let model = linear_gaussian_model(1.0, 1.0).unwrap();
    let mut better = 0;
    for trial in 0..50u64 {
        let tr = simulate(&model, &[A], 100, 100 + trial).unwrap();
        let exact = kalman_log_evidence(A, 1.0, 1.0, 0.0, 1.0, &tr.observations);
        let small = run_pf(&model, &[A], &tr.observations, 1_000, trial).unwrap();
        let large = run_pf(&model, &[A], &tr.observations, 100_000, trial).unwrap();
        if (large.log_evidence - exact).abs() < (small.log_evidence - exact).abs() {
            better += 1;
        }
    }
    assert!(better >= 45, "{better}/50");
}

#[test]
fn single_step_objective_is_one_weighting() {
    let model = experiment_one_model();
    let seed = 77;
    let f = objective_eval(&model, &[0.4], &[0.25], 300, seed).unwrap();

    let cloud = ParticleCloud::from_initial(&model, 300, &mut rng::stream(seed, &[0, INIT_KEY]));
    let mut step = rng::stream(seed, &[0, 0]);
    let mut c = resample(&cloud.particles, &cloud.weights, 300, ResampleScheme::Systematic, &mut step).unwrap();
    c.propagate(&model, &[0.4], 1, &mut step);
    let le = c.weight_and_evidence(&model, &[0.4], 0.25, 1);
    assert_eq!(f.to_bits(), le.to_bits());
}

#[test]
fn objective_matches_kalman() {
    let model = linear_gaussian_model(1.0, 1.0).unwrap();
    let tr = simulate(&model, &[A], 40, 21).unwrap();
    let f = objective_eval(&model, &[0.7], &tr.observations, 100_000, 9).unwrap();
    let exact = kalman_log_evidence(0.7, 1.0, 1.0, 0.0, 1.0, &tr.observations);
    assert!((f - exact).abs() < 0.5, "{f} vs {exact}");
}

#[test]
fn prefix_objectives_differ_by_extra_evidence() {
    let tr = simulate(&linear_gaussian_model(1.0, 1.0).unwrap(), &[A], 60, 4).unwrap();
    let p = plan(60, 4).unwrap();
    let start = KalmanState { mean: 0.0, var: 1.0 };
    for theta in [0.3, 0.9, 1.2] {
        for i in 0..p.k {
            for j in i + 1..p.k {
                let (long, short) = (p.sub_lengths[i], p.sub_lengths[j]);
                let f_long = kalman_filter(theta, 1.0, 1.0, start, &tr.observations[..long]).log_evidence;
                let head = kalman_filter(theta, 1.0, 1.0, start, &tr.observations[..short]);
                let extra = kalman_filter(theta, 1.0, 1.0, head.last, &tr.observations[short..long]);
                assert!((f_long - head.log_evidence - extra.log_evidence).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn true_parameter_has_higher_evidence() {
    let model = experiment_one_model();
    let hist = simulate(&model, &[0.657], 200, 2024).unwrap();
    let eval = |theta: f64| -> Vec<f64> {
        (0..20)
            .map(|s| objective_eval(&model, &[theta], &hist.observations, 500, s).unwrap())
            .collect()
    };
    let good = eval(0.657);
    let bad = eval(0.1);
    let p = paired_t_test_greater(&good, &bad);
    assert!(p < 0.01, "p = {p}");
}
