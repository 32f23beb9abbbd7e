//! Bayesian-model-averaged particle filter.
//!
//! K bootstrap filters, one per parameter hypothesis `theta_k`, run side by
//! side. Each step every model redraws its particles from the previous
//! filtering density, propagates them under its own parameter, and reports a
//! one-step evidence `L_k`. Model posteriors follow
//! `pi_k <- pi_k L_k / sum_j pi_j L_j`, and the filtering density is the
//! `pi`-weighted mixture of the K clouds.

use crate::error::{Error, Result};
use crate::models::StateSpaceModel;
use crate::par;
use crate::rng::{self, INIT_KEY};
use crate::smc::{bootstrap_step, ParticleCloud, ResampleScheme};
use crate::stats::log_sum_exp;

/// `log(1e-300)`: model posteriors never drop below this.
pub const LOG_POSTERIOR_FLOOR: f64 = -690.775_527_898_213_7;

/// Where each model draws its particles from at the start of a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResampleSource {
    /// The full mixture `sum_k pi_k sum_i w_ki delta(x_ki)`.
    #[default]
    GlobalMixture,
    /// Each model's own weighted cloud.
    PerModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BmapfConfig {
    pub n_per_model: Vec<usize>,
    pub source: ResampleSource,
    pub scheme: ResampleScheme,
    /// Key of each model's random stream; defaults to `0..K`.
    pub stream_ids: Option<Vec<u64>>,
}

impl BmapfConfig {
    pub fn uniform(n: usize, k: usize) -> Self {
        Self {
            n_per_model: vec![n; k],
            source: ResampleSource::default(),
            scheme: ResampleScheme::default(),
            stream_ids: None,
        }
    }

    pub fn with_source(mut self, source: ResampleSource) -> Self {
        self.source = source;
        self
    }

    pub fn with_stream_ids(mut self, ids: Vec<u64>) -> Self {
        self.stream_ids = Some(ids);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BmapfState {
    pub clouds: Vec<ParticleCloud>,
    pub model_log_posteriors: Vec<f64>,
    pub thetas: Vec<Vec<f64>>,
    /// Number of observations processed so far.
    pub steps: usize,
    seed: u64,
    stream_ids: Vec<u64>,
    source: ResampleSource,
    scheme: ResampleScheme,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub t: usize,
    pub log_evidence: Vec<f64>,
    /// Every model had zero likelihood; posteriors were left unchanged.
    pub degenerate: bool,
}

/// Bayes update of model posteriors in log space.
///
/// Log-likelihoods are referenced to their maximum before mixing, so a common
/// factor on every `L_k` cancels before it can touch the result. A `-inf`
/// likelihood counts as the smallest positive normal double, and posteriors
/// are floored at [`LOG_POSTERIOR_FLOOR`].
pub fn update_model_posteriors(log_prior: &[f64], log_lik: &[f64]) -> Vec<f64> {
    assert_eq!(log_prior.len(), log_lik.len());
    let tiny = f64::MIN_POSITIVE.ln();
    let ll: Vec<f64> = log_lik
        .iter()
        .map(|&l| if l == f64::NEG_INFINITY || l.is_nan() { tiny } else { l })
        .collect();
    let max = ll.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let joint: Vec<f64> = log_prior.iter().zip(&ll).map(|(p, l)| p + (l - max)).collect();
    let norm = log_sum_exp(&joint);
    let mut post: Vec<f64> = joint.iter().map(|a| a - norm).collect();
    if post.iter().any(|&p| p < LOG_POSTERIOR_FLOOR) {
        post.iter_mut().for_each(|p| *p = p.max(LOG_POSTERIOR_FLOOR));
        let norm = log_sum_exp(&post);
        post.iter_mut().for_each(|p| *p -= norm);
    }
    post
}

impl BmapfState {
    pub fn init<M: StateSpaceModel + ?Sized>(
        model: &M,
        thetas: &[Vec<f64>],
        cfg: &BmapfConfig,
        seed: u64,
    ) -> Result<Self> {
        let k = thetas.len();
        if k == 0 {
            return Err(Error::invalid("need at least one model component"));
        }
        if cfg.n_per_model.len() != k {
            return Err(Error::invalid(format!(
                "{} particle counts given for {k} models",
                cfg.n_per_model.len()
            )));
        }
        if cfg.n_per_model.contains(&0) {
            return Err(Error::invalid("every model needs at least one particle"));
        }
        for theta in thetas {
            model.param_domain().check(theta)?;
        }
        let stream_ids = match &cfg.stream_ids {
            Some(ids) if ids.len() != k => {
                return Err(Error::invalid("one stream id per model is required"))
            }
            Some(ids) => ids.clone(),
            None => (0..k as u64).collect(),
        };
        let clouds = stream_ids
            .iter()
            .zip(&cfg.n_per_model)
            .map(|(&sid, &n)| ParticleCloud::from_initial(model, n, &mut rng::stream(seed, &[sid, INIT_KEY])))
            .collect();
        Ok(Self {
            clouds,
            model_log_posteriors: vec![-(k as f64).ln(); k],
            thetas: thetas.to_vec(),
            steps: 0,
            seed,
            stream_ids,
            source: cfg.source,
            scheme: cfg.scheme,
        })
    }

    pub fn k(&self) -> usize {
        self.thetas.len()
    }

    pub fn model_posteriors(&self) -> Vec<f64> {
        self.model_log_posteriors.iter().map(|l| l.exp()).collect()
    }

    /// Indices of models that share a parameter value with an earlier model.
    pub fn duplicate_thetas(&self) -> Vec<usize> {
        (0..self.k())
            .filter(|&i| self.thetas[..i].contains(&self.thetas[i]))
            .collect()
    }

    /// Mean of the model-averaged filtering density.
    pub fn posterior_mean(&self) -> f64 {
        self.canonical_order()
            .into_iter()
            .map(|k| self.model_log_posteriors[k].exp() * self.clouds[k].mean())
            .sum()
    }

    /// Model indices sorted by stream id; every cross-model reduction runs in
    /// this order so relabelling the models cannot change a rounding.
    fn canonical_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.k()).collect();
        order.sort_by_key(|&k| self.stream_ids[k]);
        order
    }

    /// The flattened mixture in canonical order.
    fn mixture(&self) -> (Vec<f64>, Vec<f64>) {
        let order = self.canonical_order();
        let total: usize = self.clouds.iter().map(ParticleCloud::len).sum();
        let mut states = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        for k in order {
            let pi = self.model_log_posteriors[k].exp();
            states.extend_from_slice(&self.clouds[k].particles);
            weights.extend(self.clouds[k].weights.iter().map(|w| pi * w));
        }
        (states, weights)
    }

    pub fn step<M: StateSpaceModel + ?Sized>(&mut self, model: &M, y: f64) -> Result<StepDiagnostics> {
        let t = model.first_time() + self.steps;
        let mixture = match self.source {
            ResampleSource::GlobalMixture => Some(self.mixture()),
            ResampleSource::PerModel => None,
        };
        let this = &*self;
        let blocks = par::try_map_range(self.k(), |k| {
            let mut rng = rng::stream(this.seed, &[this.stream_ids[k], this.steps as u64]);
            let (states, weights) = match &mixture {
                Some((s, w)) => (s.as_slice(), w.as_slice()),
                None => (this.clouds[k].particles.as_slice(), this.clouds[k].weights.as_slice()),
            };
            bootstrap_step(
                model,
                &this.thetas[k],
                states,
                weights,
                this.clouds[k].len(),
                y,
                t,
                this.scheme,
                &mut rng,
            )
        })?;
        let (clouds, log_evidence): (Vec<_>, Vec<_>) = blocks.into_iter().unzip();
        self.clouds = clouds;
        let degenerate = log_evidence.iter().all(|&l| l == f64::NEG_INFINITY);
        if !degenerate {
            let order = self.canonical_order();
            let prior: Vec<f64> = order.iter().map(|&k| self.model_log_posteriors[k]).collect();
            let lik: Vec<f64> = order.iter().map(|&k| log_evidence[k]).collect();
            for (&k, p) in order.iter().zip(update_model_posteriors(&prior, &lik)) {
                self.model_log_posteriors[k] = p;
            }
        }
        self.steps += 1;
        Ok(StepDiagnostics {
            t,
            log_evidence,
            degenerate,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BmapfRun {
    pub times: Vec<usize>,
    pub estimates: Vec<f64>,
    /// Row `t`: model posteriors after processing `y_t`.
    pub posterior_trace: Vec<Vec<f64>>,
    pub log_evidence_trace: Vec<Vec<f64>>,
    pub degenerate_steps: Vec<usize>,
}

pub fn run<M: StateSpaceModel + ?Sized>(
    model: &M,
    thetas: &[Vec<f64>],
    observations: &[f64],
    cfg: &BmapfConfig,
    seed: u64,
) -> Result<BmapfRun> {
    let mut state = BmapfState::init(model, thetas, cfg, seed)?;
    let n = observations.len();
    let mut out = BmapfRun {
        times: Vec::with_capacity(n),
        estimates: Vec::with_capacity(n),
        posterior_trace: Vec::with_capacity(n),
        log_evidence_trace: Vec::with_capacity(n),
        degenerate_steps: Vec::new(),
    };
    for &y in observations {
        let diag = state.step(model, y)?;
        if diag.degenerate {
            out.degenerate_steps.push(diag.t);
        }
        out.times.push(diag.t);
        out.estimates.push(state.posterior_mean());
        out.posterior_trace.push(state.model_posteriors());
        out.log_evidence_trace.push(diag.log_evidence);
    }
    Ok(out)
}
