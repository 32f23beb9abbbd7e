//! Gaussian-process regression used as the optimisation surrogate.
//!
//! Predictive equations, with `K` the (noisy, jittered) Gram matrix and `k`
//! the cross-covariances to the query:
//!
//! ```text
//! mean(q) = mu + k^T K^-1 (f - mu)
//! var(q)  = kappa(q, q) - k^T K^-1 k
//! ```
//!
//! Both are evaluated through a Cholesky factor of `K`; nothing is inverted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// `s2 exp(-0.5 sum_d (a_d - b_d)^2 / l_d^2)`
    #[default]
    Gaussian,
    Matern52,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    #[serde(default)]
    pub kind: KernelKind,
    pub length_scales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl KernelConfig {
    pub fn gaussian(length_scales: Vec<f64>, signal_variance: f64, noise_variance: f64) -> Self {
        Self {
            kind: KernelKind::Gaussian,
            length_scales,
            signal_variance,
            noise_variance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.length_scales.is_empty() || self.length_scales.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::invalid("kernel length scales must be positive"));
        }
        if !(self.signal_variance > 0.0) {
            return Err(Error::invalid("kernel signal variance must be positive"));
        }
        if !(self.noise_variance >= 0.0) {
            return Err(Error::invalid("kernel noise variance must be non-negative"));
        }
        Ok(())
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.length_scales.len());
        debug_assert_eq!(b.len(), self.length_scales.len());
        let r2: f64 = a
            .iter()
            .zip(b)
            .zip(&self.length_scales)
            .map(|((x, y), l)| {
                let d = (x - y) / l;
                d * d
            })
            .sum();
        match self.kind {
            KernelKind::Gaussian => self.signal_variance * (-0.5 * r2).exp(),
            KernelKind::Matern52 => {
                let s = (5.0 * r2).sqrt();
                self.signal_variance * (1.0 + s + 5.0 * r2 / 3.0) * (-s).exp()
            }
        }
    }
}

pub fn kernel_eval(cfg: &KernelConfig, a: &[f64], b: &[f64]) -> f64 {
    cfg.eval(a, b)
}

/// Relative jitter added on the first factorisation attempt.
pub const JITTER_START: f64 = 1e-10;
/// Number of x10 escalations allowed after the first attempt.
pub const JITTER_ESCALATIONS: u32 = 6;

/// Evaluation history `D_n` plus surrogate settings.
#[derive(Debug, Clone, PartialEq)]
pub struct GpDataset {
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    pub kernel: KernelConfig,
    /// Constant prior mean, used when `standardize` is off.
    pub mean: f64,
    /// Centre and scale the values before fitting. The kernel's signal variance
    /// then lives in standardised units, while `noise_variance` stays in the
    /// units of the raw values.
    pub standardize: bool,
}

impl GpDataset {
    pub fn new(kernel: KernelConfig) -> Self {
        Self {
            points: Vec::new(),
            values: Vec::new(),
            kernel,
            mean: 0.0,
            standardize: false,
        }
    }

    pub fn standardized(mut self) -> Self {
        self.standardize = true;
        self
    }

    pub fn push(&mut self, point: Vec<f64>, value: f64) {
        self.points.push(point);
        self.values.push(value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn fit(&self) -> Result<GpModel> {
        GpModel::fit(self)
    }
}

/// A factorised posterior ready for repeated queries.
#[derive(Debug, Clone)]
pub struct GpModel {
    points: Vec<Vec<f64>>,
    kernel: KernelConfig,
    chol: Vec<f64>,
    alpha: Vec<f64>,
    offset: f64,
    scale: f64,
    jitter: f64,
}

impl GpModel {
    pub fn fit(data: &GpDataset) -> Result<Self> {
        data.kernel.validate()?;
        let n = data.len();
        let (offset, scale) = if data.standardize && n > 0 {
            let m = data.values.iter().sum::<f64>() / n as f64;
            let var = data.values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
            let sd = var.sqrt();
            (m, if sd > 0.0 && sd.is_finite() { sd } else { 1.0 })
        } else {
            (data.mean, 1.0)
        };
        let noise = data.kernel.noise_variance / (scale * scale);
        let sv = data.kernel.signal_variance;

        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v = data.kernel.eval(&data.points[i], &data.points[j]);
                gram[i * n + j] = v;
                gram[j * n + i] = v;
            }
        }

        let mut jitter = JITTER_START * sv;
        let mut attempt = 0;
        let chol = loop {
            let mut a = gram.clone();
            for i in 0..n {
                a[i * n + i] += noise + jitter;
            }
            if let Some(l) = cholesky(a, n) {
                break l;
            }
            if attempt == JITTER_ESCALATIONS {
                return Err(Error::Numerical(format!(
                    "Gram matrix of {n} points is not positive definite with jitter {jitter:e}"
                )));
            }
            attempt += 1;
            jitter *= 10.0;
        };

        let centred: Vec<f64> = data.values.iter().map(|v| (v - offset) / scale).collect();
        let alpha = cholesky_solve(&chol, n, &centred);
        Ok(Self {
            points: data.points.clone(),
            kernel: data.kernel.clone(),
            chol,
            alpha,
            offset,
            scale,
            jitter,
        })
    }

    /// Diagonal jitter that made the factorisation succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Predictive `(mean, variance)` at `query`; variance is clamped at zero.
    pub fn predict(&self, query: &[f64]) -> (f64, f64) {
        let n = self.points.len();
        let prior_var = self.kernel.eval(query, query);
        if n == 0 {
            return (self.offset, prior_var * self.scale * self.scale);
        }
        let k: Vec<f64> = self.points.iter().map(|p| self.kernel.eval(p, query)).collect();
        let mean_z: f64 = k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let v = forward_substitute(&self.chol, n, &k);
        let var_z = (prior_var - v.iter().map(|x| x * x).sum::<f64>()).max(0.0);
        (
            self.offset + self.scale * mean_z,
            var_z * self.scale * self.scale,
        )
    }
}

pub fn gp_posterior(data: &GpDataset, query: &[f64]) -> Result<(f64, f64)> {
    Ok(data.fit()?.predict(query))
}

/// In-place lower Cholesky factor of a row-major SPD matrix; `None` if a pivot
/// is not strictly positive.
fn cholesky(mut a: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
        for k in j + 1..n {
            a[j * n + k] = 0.0;
        }
    }
    Some(a)
}

/// Solves `L z = b`.
fn forward_substitute(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * z[k];
        }
        z[i] = s / l[i * n + i];
    }
    z
}

/// Solves `L L^T x = b`.
fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = forward_substitute(l, n, b);
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}
