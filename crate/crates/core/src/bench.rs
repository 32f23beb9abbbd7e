//! Simulation studies comparing designed model sets against random ones, the
//! Kalman evidence oracle, and the small statistics used to summarise them.

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::bmapf::{self, BmapfConfig};
use crate::bo::BoConfig;
use crate::bomsd::{design_model_set, DEFAULT_DESIGN_PARTICLES};
use crate::error::{Error, Result};
use crate::models::{
    experiment_one_model, experiment_two_model, linear_gaussian_model, simulate, StateSpaceModel,
};
use crate::par;
use crate::rng::{derive_seed, SimRng};
use crate::smc::run_pf;
use crate::stats;

/// Generating parameter of the first study.
pub const EXP1_TRUE_THETA: f64 = 0.657;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Exp1,
    Exp2,
    LinearGaussianOracle,
}

impl ExperimentKind {
    pub fn label(self) -> &'static str {
        match self {
            ExperimentKind::Exp1 => "exp1",
            ExperimentKind::Exp2 => "exp2",
            ExperimentKind::LinearGaussianOracle => "linear_gaussian_oracle",
        }
    }

    fn key(self) -> u64 {
        match self {
            ExperimentKind::Exp1 => 1,
            ExperimentKind::Exp2 => 2,
            ExperimentKind::LinearGaussianOracle => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Baseline,
    Msd,
    BootstrapPf,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::Msd => "msd",
            Method::BootstrapPf => "bootstrap_pf",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "baseline" => Some(Method::Baseline),
            "msd" => Some(Method::Msd),
            "bootstrap_pf" => Some(Method::BootstrapPf),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Swept K values (exp1); the first entry is the fixed K of exp2.
    pub k_values: Vec<usize>,
    /// True outlier probabilities (exp2 only).
    pub po_values: Vec<f64>,
    pub runs: usize,
    pub t_len: usize,
    pub m_hist: usize,
    pub n_particles: usize,
    /// Particles per objective evaluation during model-set design.
    pub design_particles: usize,
    pub bo: BoConfig,
    pub root_seed: u64,
}

impl ExperimentConfig {
    pub fn exp1() -> Self {
        Self {
            experiment: ExperimentKind::Exp1,
            k_values: (2..=20).collect(),
            po_values: Vec::new(),
            runs: 100,
            t_len: 500,
            m_hist: 200,
            n_particles: 200,
            design_particles: DEFAULT_DESIGN_PARTICLES,
            bo: BoConfig::default(),
            root_seed: 2019,
        }
    }

    pub fn exp2() -> Self {
        Self {
            experiment: ExperimentKind::Exp2,
            k_values: vec![3],
            po_values: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            t_len: 599,
            ..Self::exp1()
        }
    }

    /// Linear-Gaussian model (a = 0.9, q = r = 1) checked against Kalman.
    pub fn oracle() -> Self {
        Self {
            experiment: ExperimentKind::LinearGaussianOracle,
            k_values: vec![1],
            po_values: Vec::new(),
            runs: 100,
            t_len: 50,
            n_particles: 1000,
            ..Self::exp1()
        }
    }

    pub fn preset(kind: ExperimentKind) -> Self {
        match kind {
            ExperimentKind::Exp1 => Self::exp1(),
            ExperimentKind::Exp2 => Self::exp2(),
            ExperimentKind::LinearGaussianOracle => Self::oracle(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 || self.t_len == 0 || self.n_particles == 0 || self.design_particles == 0 {
            return Err(Error::invalid("runs, T and particle counts must be at least 1"));
        }
        match self.experiment {
            ExperimentKind::Exp1 => {
                if self.k_values.is_empty() || self.k_values.iter().any(|&k| k < 2) {
                    return Err(Error::invalid("exp1 needs K values >= 2"));
                }
            }
            ExperimentKind::Exp2 => {
                if self.k_values.first().is_none_or(|&k| k < 2) {
                    return Err(Error::invalid("exp2 needs a fixed K >= 2"));
                }
                if self.po_values.is_empty() || self.po_values.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(Error::invalid("exp2 needs P_o values in [0, 1]"));
                }
            }
            ExperimentKind::LinearGaussianOracle => {}
        }
        if self.experiment != ExperimentKind::LinearGaussianOracle {
            if let Some(&k) = self.k_values.iter().find(|&&k| k > self.m_hist) {
                return Err(Error::PlanTooShort { m: self.m_hist, k });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub experiment: String,
    pub method: Method,
    pub k: usize,
    pub po: Option<f64>,
    pub run: usize,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub experiment: String,
    pub method: Method,
    pub k: usize,
    pub po: Option<f64>,
    pub mse_mean: f64,
    pub mse_std: f64,
    pub n_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchResult {
    pub runs: Vec<RunRecord>,
    pub cells: Vec<CellSummary>,
}

impl BenchResult {
    /// Per-run MSEs of one cell in run order.
    pub fn cell_mses(&self, method: Method, k: usize, po: Option<f64>) -> Vec<f64> {
        let mut rows: Vec<&RunRecord> = self
            .runs
            .iter()
            .filter(|r| r.method == method && r.k == k && r.po == po)
            .collect();
        rows.sort_by_key(|r| r.run);
        rows.iter().map(|r| r.mse).collect()
    }

    /// One-sided paired p-value for "designed sets beat random ones" in a cell.
    pub fn paired_p_value(&self, k: usize, po: Option<f64>) -> f64 {
        stats::paired_t_test_greater(
            &self.cell_mses(Method::Baseline, k, po),
            &self.cell_mses(Method::Msd, k, po),
        )
    }
}

/// `(1/T) sum_t (estimate_t - truth_t)^2`.
pub fn mse(estimates: &[f64], truth: &[f64]) -> Result<f64> {
    if estimates.len() != truth.len() {
        return Err(Error::invalid(format!(
            "MSE needs equal lengths, got {} estimates for {} states",
            estimates.len(),
            truth.len()
        )));
    }
    if estimates.is_empty() {
        return Err(Error::invalid("MSE of an empty sequence"));
    }
    let ss: f64 = estimates.iter().zip(truth).map(|(e, x)| (e - x) * (e - x)).sum();
    Ok(ss / estimates.len() as f64)
}

/// Gaussian filtering moments of the linear-Gaussian model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    pub mean: f64,
    pub var: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanOutput {
    pub log_evidence: f64,
    pub step_log_evidence: Vec<f64>,
    pub means: Vec<f64>,
    pub vars: Vec<f64>,
    pub last: KalmanState,
}

/// Exact filter for `x_t = a x_{t-1} + N(0, q)`, `y_t = x_t + N(0, r)`, started
/// from the moments of `x_0` (or of the last filtered state).
pub fn kalman_filter(a: f64, q: f64, r: f64, start: KalmanState, observations: &[f64]) -> KalmanOutput {
    let mut s = start;
    let mut out = KalmanOutput {
        log_evidence: 0.0,
        step_log_evidence: Vec::with_capacity(observations.len()),
        means: Vec::with_capacity(observations.len()),
        vars: Vec::with_capacity(observations.len()),
        last: start,
    };
    for &y in observations {
        let pred_mean = a * s.mean;
        let pred_var = a * a * s.var + q;
        let innov_var = pred_var + r;
        let ll = stats::normal_log_pdf(y, pred_mean, innov_var);
        let gain = pred_var / innov_var;
        s = KalmanState {
            mean: pred_mean + gain * (y - pred_mean),
            var: (1.0 - gain) * pred_var,
        };
        out.log_evidence += ll;
        out.step_log_evidence.push(ll);
        out.means.push(s.mean);
        out.vars.push(s.var);
    }
    out.last = s;
    out
}

/// Exact `log p(y_{1:T})` by the predictive decomposition.
pub fn kalman_log_evidence(a: f64, q: f64, r: f64, x0_mean: f64, x0_var: f64, observations: &[f64]) -> f64 {
    kalman_filter(a, q, r, KalmanState { mean: x0_mean, var: x0_var }, observations).log_evidence
}

const TEST_KEY: u64 = 1;
const HIST_KEY: u64 = 2;
const BASELINE_KEY: u64 = 3;
const DESIGN_KEY: u64 = 4;
const FILTER_KEY: u64 = 5;

struct PairedRun {
    baseline: f64,
    msd: f64,
}

/// One paired repetition: both methods filter the same test trajectory with
/// the same filter seed; they differ only in their parameter sets.
fn paired_run<M: StateSpaceModel + ?Sized>(
    model: &M,
    true_theta: &[f64],
    k: usize,
    cfg: &ExperimentConfig,
    seeds: impl Fn(u64) -> u64,
) -> Result<PairedRun> {
    let test = simulate(model, true_theta, cfg.t_len, seeds(TEST_KEY))?;
    let hist = simulate(model, true_theta, cfg.m_hist, seeds(HIST_KEY))?;

    let mut rng = SimRng::seed_from_u64(seeds(BASELINE_KEY));
    let random_thetas: Vec<Vec<f64>> = (0..k).map(|_| model.param_domain().sample_uniform(&mut rng)).collect();
    let designed = design_model_set(
        model,
        &hist.observations,
        k,
        &cfg.bo,
        cfg.design_particles,
        seeds(DESIGN_KEY),
    )?;

    let filter_cfg = BmapfConfig::uniform(cfg.n_particles, k);
    let filter_seed = seeds(FILTER_KEY);
    let base = bmapf::run(model, &random_thetas, &test.observations, &filter_cfg, filter_seed)?;
    let msd = bmapf::run(model, &designed.thetas(), &test.observations, &filter_cfg, filter_seed)?;
    Ok(PairedRun {
        baseline: mse(&base.estimates, &test.states)?,
        msd: mse(&msd.estimates, &test.states)?,
    })
}

fn summarize(runs: &[RunRecord]) -> Vec<CellSummary> {
    let mut cells: Vec<CellSummary> = Vec::new();
    for r in runs {
        if cells
            .iter()
            .any(|c| c.method == r.method && c.k == r.k && c.po == r.po)
        {
            continue;
        }
        let mses: Vec<f64> = runs
            .iter()
            .filter(|x| x.method == r.method && x.k == r.k && x.po == r.po)
            .map(|x| x.mse)
            .collect();
        cells.push(CellSummary {
            experiment: r.experiment.clone(),
            method: r.method,
            k: r.k,
            po: r.po,
            mse_mean: stats::mean(&mses),
            mse_std: stats::std_dev(&mses),
            n_runs: mses.len(),
        });
    }
    cells
}

fn paired_study<M: StateSpaceModel + ?Sized>(
    model: &M,
    cfg: &ExperimentConfig,
    cells: &[(usize, Option<f64>, Vec<f64>)],
) -> Result<BenchResult> {
    let label = cfg.experiment.label();
    let total = cells.len() * cfg.runs;
    let pairs = par::try_map_range(total, |i| {
        let (k, po, theta) = &cells[i / cfg.runs];
        let run = i % cfg.runs;
        let cell_key = po.map_or(*k as u64, f64::to_bits);
        let seeds = |purpose| derive_seed(cfg.root_seed, &[cfg.experiment.key(), cell_key, run as u64, purpose]);
        paired_run(model, theta, *k, cfg, seeds)
    })?;
    let mut runs = Vec::with_capacity(2 * total);
    for (i, p) in pairs.iter().enumerate() {
        let (k, po, _) = &cells[i / cfg.runs];
        for (method, value) in [(Method::Baseline, p.baseline), (Method::Msd, p.msd)] {
            runs.push(RunRecord {
                experiment: label.to_string(),
                method,
                k: *k,
                po: *po,
                run: i % cfg.runs,
                mse: value,
            });
        }
    }
    runs.sort_by(|a, b| {
        (a.method, a.k, a.run)
            .cmp(&(b.method, b.k, b.run))
            .then(a.po.partial_cmp(&b.po).expect("finite P_o"))
    });
    let cells = summarize(&runs);
    Ok(BenchResult { runs, cells })
}

/// MSE of random versus designed model sets for each K, on trajectories
/// generated at `theta* = 0.657`.
pub fn run_experiment_1(cfg: &ExperimentConfig) -> Result<BenchResult> {
    if cfg.experiment != ExperimentKind::Exp1 {
        return Err(Error::invalid("run_experiment_1 needs an exp1 configuration"));
    }
    cfg.validate()?;
    let cells: Vec<_> = cfg
        .k_values
        .iter()
        .map(|&k| (k, None, vec![EXP1_TRUE_THETA]))
        .collect();
    paired_study(&experiment_one_model(), cfg, &cells)
}

/// MSE of random versus designed sets over the outlier probability, K fixed.
pub fn run_experiment_2(cfg: &ExperimentConfig) -> Result<BenchResult> {
    if cfg.experiment != ExperimentKind::Exp2 {
        return Err(Error::invalid("run_experiment_2 needs an exp2 configuration"));
    }
    cfg.validate()?;
    let k = cfg.k_values[0];
    let cells: Vec<_> = cfg.po_values.iter().map(|&p| (k, Some(p), vec![p])).collect();
    paired_study(&experiment_two_model(), cfg, &cells)
}

/// Bootstrap PF against the exact Kalman filter on `a = 0.9, q = r = 1`,
/// `x_0 ~ N(0, 1)`. The per-run score is the mean squared gap between the PF
/// and Kalman filtered means.
pub fn run_oracle(cfg: &ExperimentConfig) -> Result<BenchResult> {
    cfg.validate()?;
    let model = linear_gaussian_model(1.0, 1.0)?;
    let label = cfg.experiment.label();
    let scores = par::try_map_range(cfg.runs, |run| {
        let seeds = |purpose| derive_seed(cfg.root_seed, &[cfg.experiment.key(), 0, run as u64, purpose]);
        let traj = simulate(&model, &[0.9], cfg.t_len, seeds(TEST_KEY))?;
        let pf = run_pf(&model, &[0.9], &traj.observations, cfg.n_particles, seeds(FILTER_KEY))?;
        let kf = kalman_filter(0.9, 1.0, 1.0, KalmanState { mean: 0.0, var: 1.0 }, &traj.observations);
        mse(&pf.filtered_means, &kf.means)
    })?;
    let runs: Vec<RunRecord> = scores
        .into_iter()
        .enumerate()
        .map(|(run, mse)| RunRecord {
            experiment: label.to_string(),
            method: Method::BootstrapPf,
            k: 1,
            po: None,
            run,
            mse,
        })
        .collect();
    let cells = summarize(&runs);
    Ok(BenchResult { runs, cells })
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<BenchResult> {
    match cfg.experiment {
        ExperimentKind::Exp1 => run_experiment_1(cfg),
        ExperimentKind::Exp2 => run_experiment_2(cfg),
        ExperimentKind::LinearGaussianOracle => run_oracle(cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_values() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((mse(&[1.5, 2.5, 3.5], &[1.0, 2.0, 3.0]).unwrap() - 0.25).abs() < 1e-15);
        // (1 + 4 + 0.25) / 3
        let v = mse(&[0.0, 0.0, 0.0], &[1.0, -2.0, 0.5]).unwrap();
        assert!((v - 1.75).abs() < 1e-15);
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn kalman_single_step_closed_form() {
        let y = 0.8;
        let le = kalman_log_evidence(1.7, 0.5, 0.3, 0.0, 0.0, &[y]);
        assert!((le - stats::normal_log_pdf(y, 0.0, 0.8)).abs() < 1e-14);
    }

    #[test]
    fn kalman_chain_rule() {
        let ys = [0.3, -1.2, 2.2, 0.1, 0.9, -0.4];
        let start = KalmanState { mean: 0.2, var: 1.5 };
        let full = kalman_filter(0.9, 1.0, 0.5, start, &ys);
        let head = kalman_filter(0.9, 1.0, 0.5, start, &ys[..2]);
        let tail = kalman_filter(0.9, 1.0, 0.5, head.last, &ys[2..]);
        assert!((full.log_evidence - head.log_evidence - tail.log_evidence).abs() < 1e-10);
    }

    #[test]
    fn config_validation() {
        assert!(ExperimentConfig::exp1().validate().is_ok());
        assert!(ExperimentConfig::exp2().validate().is_ok());
        let mut c = ExperimentConfig::exp1();
        c.k_values = vec![1];
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::exp2();
        c.po_values = vec![1.5];
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::exp1();
        c.runs = 0;
        assert!(c.validate().is_err());
        assert!(run_experiment_2(&ExperimentConfig::exp1()).is_err());
    }
}
