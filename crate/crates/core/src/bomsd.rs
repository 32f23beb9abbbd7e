//! Data-driven model-set design.
//!
//! Given `m` pre-obtained observations and a target size `K`, component `k`
//! (1-based) is tuned on the prefix `y_{1:m_k}` with `m_k = floor(m (K-k+1) / K)`
//! by maximising the particle-filter estimate of `log p_theta(y_{1:m_k})` with
//! GP-UCB. Nested prefixes of decreasing length give components that fit the
//! data well on average yet differ from each other.

use crate::bo::{self, BoConfig, BoResult};
use crate::error::{Error, Result};
use crate::models::StateSpaceModel;
use crate::par;
use crate::rng::derive_seed;
use crate::smc::run_pf;

const BO_KEY: u64 = 0xB0;
const OBJECTIVE_KEY: u64 = 0x0B1;

/// Default particle count for one objective evaluation.
pub const DEFAULT_DESIGN_PARTICLES: usize = 500;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MsdPlan {
    pub m: usize,
    pub k: usize,
    /// `sub_lengths[k-1] = m_k`.
    pub sub_lengths: Vec<usize>,
}

pub fn plan(m: usize, k: usize) -> Result<MsdPlan> {
    if k == 0 {
        return Err(Error::invalid("K must be at least 1"));
    }
    if m < k {
        return Err(Error::PlanTooShort { m, k });
    }
    let sub_lengths = (1..=k)
        .map(|i| ((m as u128 * (k - i + 1) as u128) / k as u128) as usize)
        .collect();
    Ok(MsdPlan { m, k, sub_lengths })
}

/// `f(theta) = sum_t log L_t(theta)` over `prefix`, estimated by one PF run.
pub fn objective_eval<M: StateSpaceModel + ?Sized>(
    model: &M,
    theta: &[f64],
    prefix: &[f64],
    n: usize,
    seed: u64,
) -> Result<f64> {
    Ok(run_pf(model, theta, prefix, n, seed)?.log_evidence)
}

/// Seed of evaluation `query` for component `k` (1-based).
pub fn objective_seed(root: u64, k: usize, query: usize) -> u64 {
    derive_seed(root, &[OBJECTIVE_KEY, k as u64, query as u64])
}

#[derive(Debug, Clone)]
pub struct DesignedComponent {
    pub k: usize,
    pub m_k: usize,
    pub theta: Vec<f64>,
    pub f_best: f64,
    pub search: BoResult,
}

#[derive(Debug, Clone)]
pub struct ModelSet {
    pub plan: MsdPlan,
    pub components: Vec<DesignedComponent>,
}

impl ModelSet {
    pub fn thetas(&self) -> Vec<Vec<f64>> {
        self.components.iter().map(|c| c.theta.clone()).collect()
    }
}

/// Runs one BO search per prefix. `bo_cfg.seed` is replaced by a per-component
/// stream derived from `seed`; the K searches run concurrently.
pub fn design_model_set<M: StateSpaceModel + ?Sized>(
    model: &M,
    observations: &[f64],
    k: usize,
    bo_cfg: &BoConfig,
    n: usize,
    seed: u64,
) -> Result<ModelSet> {
    let plan = plan(observations.len(), k)?;
    if n == 0 {
        return Err(Error::invalid("particle count must be at least 1"));
    }
    bo_cfg.validate(model.param_domain().dim())?;
    let components = par::try_map_range(k, |i| {
        let comp = i + 1;
        let m_k = plan.sub_lengths[i];
        let prefix = &observations[..m_k];
        let cfg = BoConfig {
            seed: derive_seed(seed, &[BO_KEY, comp as u64]),
            ..bo_cfg.clone()
        };
        let search = bo::maximize(
            |theta, query| {
                objective_eval(model, theta, prefix, n, objective_seed(seed, comp, query))
                    .unwrap_or(f64::NAN)
            },
            model.param_domain(),
            &cfg,
        )?;
        Ok(DesignedComponent {
            k: comp,
            m_k,
            theta: search.best_theta.clone(),
            f_best: search.best_value,
            search,
        })
    })?;
    Ok(ModelSet { plan, components })
}
