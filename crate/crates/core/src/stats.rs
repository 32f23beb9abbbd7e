//! Small numeric helpers shared across modules.

use std::f64::consts::PI;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `log Σ exp(a_i)` with max-shift. Empty input or all `-inf` gives `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

pub fn normal_log_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (2.0 * PI * var).ln() - 0.5 * d * d / var
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); zero for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// One-sided paired t-test of `H1: mean(worse - better) > 0`.
///
/// Returns the p-value. Zero-variance differences give 0 or 1 depending on the
/// sign of the mean difference.
pub fn paired_t_test_greater(worse: &[f64], better: &[f64]) -> f64 {
    use statrs::distribution::{ContinuousCDF, StudentsT};
    assert_eq!(worse.len(), better.len());
    let diffs: Vec<f64> = worse.iter().zip(better).map(|(a, b)| a - b).collect();
    let n = diffs.len();
    if n < 2 {
        return 1.0;
    }
    let m = mean(&diffs);
    let sd = std_dev(&diffs);
    if sd == 0.0 {
        return if m > 0.0 { 0.0 } else { 1.0 };
    }
    let t = m / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid dof");
    1.0 - dist.cdf(t)
}
