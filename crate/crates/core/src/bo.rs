//! GP-UCB Bayesian optimisation over a box.
//!
//! After a stratified initial design, each iteration fits the surrogate to the
//! history, scores a fresh uniform candidate set by `mean + alpha * sd`,
//! evaluates the objective at the best candidate and appends the result. The
//! returned incumbent is the best *observed* point.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use rand::Rng;

use crate::error::{Error, Result};
use crate::gp::{GpDataset, KernelConfig};
use crate::models::ParamDomain;
use crate::rng::{self, SimRng};

/// Gap below the worst finite value used in place of `-inf` when fitting.
pub const NEG_INF_MARGIN: f64 = 100.0;
/// Retries for a query whose objective value is NaN.
pub const NAN_RETRIES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoConfig {
    pub alpha: f64,
    pub budget: usize,
    pub n_init: usize,
    pub acq_grid: usize,
    pub kernel: KernelConfig,
    pub seed: u64,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            budget: 40,
            n_init: 5,
            acq_grid: 512,
            kernel: KernelConfig::gaussian(vec![0.1], 1.0, 1.0),
            seed: 0,
        }
    }
}

impl BoConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.alpha >= 0.0) {
            return Err(Error::invalid("alpha must be non-negative"));
        }
        if self.budget == 0 || self.n_init == 0 || self.n_init > self.budget {
            return Err(Error::invalid(format!(
                "need 1 <= n_init <= budget, got n_init = {}, budget = {}",
                self.n_init, self.budget
            )));
        }
        if self.acq_grid < 2 {
            return Err(Error::invalid("acq_grid must be at least 2"));
        }
        if self.kernel.length_scales.len() != dim {
            return Err(Error::invalid(format!(
                "kernel has {} length scales for a {dim}-dimensional domain",
                self.kernel.length_scales.len()
            )));
        }
        self.kernel.validate()
    }
}

#[inline]
pub fn ucb(mean: f64, stddev: f64, alpha: f64) -> f64 {
    mean + alpha * stddev
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub theta: Vec<f64>,
    /// Raw objective value (may be `-inf`).
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct BoResult {
    pub best_theta: Vec<f64>,
    pub best_value: f64,
    pub best_index: usize,
    pub queries: Vec<Query>,
    /// Surrogate training data; `-inf` values appear clamped.
    pub history: GpDataset,
}

/// Jittered stratified design: each dimension is cut into `n` strata, one point
/// per stratum, strata shuffled independently per dimension.
pub fn stratified_design(domain: &ParamDomain, n: usize, rng: &mut SimRng) -> Vec<Vec<f64>> {
    let mut columns: Vec<Vec<f64>> = domain
        .lower()
        .iter()
        .zip(domain.upper())
        .map(|(l, u)| {
            let w = (u - l) / n as f64;
            let mut col: Vec<f64> = (0..n).map(|i| l + w * (i as f64 + rng.random::<f64>())).collect();
            col.shuffle(rng);
            col
        })
        .collect();
    (0..n)
        .map(|i| columns.iter_mut().map(|c| c[i]).collect())
        .collect()
}

fn clamped_values(values: &[f64]) -> Vec<f64> {
    let floor = values
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(f64::INFINITY, f64::min);
    let replacement = if floor.is_finite() { floor - NEG_INF_MARGIN } else { 0.0 };
    values
        .iter()
        .map(|&v| if v == f64::NEG_INFINITY { replacement } else { v })
        .collect()
}

fn build_history(kernel: &KernelConfig, queries: &[Query]) -> GpDataset {
    let mut d = GpDataset::new(kernel.clone()).standardized();
    let raw: Vec<f64> = queries.iter().map(|q| q.value).collect();
    for (q, v) in queries.iter().zip(clamped_values(&raw)) {
        d.push(q.theta.clone(), v);
    }
    d
}

/// Maximises `objective` over `domain`. The objective receives the point and
/// the 0-based evaluation index.
pub fn maximize<F>(mut objective: F, domain: &ParamDomain, cfg: &BoConfig) -> Result<BoResult>
where
    F: FnMut(&[f64], usize) -> f64,
{
    if domain.is_degenerate() {
        return Err(Error::invalid(format!("degenerate search domain {domain}")));
    }
    cfg.validate(domain.dim())?;
    let mut rng = rng::stream(cfg.seed, &[]);
    let mut queries: Vec<Query> = Vec::with_capacity(cfg.budget);
    let mut calls = 0usize;

    let mut evaluate = |theta: Vec<f64>, queries: &mut Vec<Query>, redraw: &mut dyn FnMut() -> Vec<f64>| -> Result<()> {
        let mut theta = theta;
        for attempt in 0..=NAN_RETRIES {
            let v = objective(&theta, calls);
            calls += 1;
            if !v.is_nan() {
                queries.push(Query { theta, value: v });
                return Ok(());
            }
            if attempt < NAN_RETRIES {
                theta = redraw();
            }
        }
        Err(Error::ObjectiveNan {
            attempts: NAN_RETRIES + 1,
        })
    };

    let design = stratified_design(domain, cfg.n_init, &mut rng);
    let mut redraw_rng = rng::stream(cfg.seed, &[1]);
    for theta in design {
        evaluate(theta, &mut queries, &mut || domain.sample_uniform(&mut redraw_rng))?;
    }

    while queries.len() < cfg.budget {
        let model = build_history(&cfg.kernel, &queries).fit()?;
        let mut best: Option<(f64, Vec<f64>)> = None;
        for _ in 0..cfg.acq_grid {
            let cand = domain.sample_uniform(&mut rng);
            let (m, v) = model.predict(&cand);
            let score = ucb(m, v.sqrt(), cfg.alpha);
            if best.as_ref().is_none_or(|(s, _)| score > *s) {
                best = Some((score, cand));
            }
        }
        let (_, theta) = best.expect("acq_grid >= 2");
        evaluate(theta, &mut queries, &mut || domain.sample_uniform(&mut redraw_rng))?;
    }

    let mut best_index = 0;
    for (i, q) in queries.iter().enumerate() {
        if q.value > queries[best_index].value {
            best_index = i;
        }
    }
    Ok(BoResult {
        best_theta: queries[best_index].theta.clone(),
        best_value: queries[best_index].value,
        best_index,
        history: build_history(&cfg.kernel, &queries),
        queries,
    })
}
