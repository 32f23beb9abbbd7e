//! Bootstrap particle filter primitives.
//!
//! Weights are handled in log space with max-shift normalisation. A step in
//! which every particle has zero likelihood keeps the propagated particles with
//! uniform weights and reports a log-evidence of `-inf`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::models::StateSpaceModel;
use crate::rng::{self, SimRng, INIT_KEY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResampleScheme {
    Multinomial,
    #[default]
    Systematic,
}

/// Weighted particle approximation of one model's filtering density.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleCloud {
    pub particles: Vec<f64>,
    /// Unnormalised log-weights `log(w_prev * p(y | x))` from the last weighting.
    pub log_weights: Vec<f64>,
    /// Normalised weights, summing to one.
    pub weights: Vec<f64>,
}

impl ParticleCloud {
    pub fn uniform(particles: Vec<f64>) -> Self {
        let n = particles.len();
        assert!(n > 0, "a particle cloud needs at least one particle");
        let w = 1.0 / n as f64;
        Self {
            log_weights: vec![w.ln(); n],
            weights: vec![w; n],
            particles,
        }
    }

    pub fn from_initial<M: StateSpaceModel + ?Sized>(model: &M, n: usize, rng: &mut SimRng) -> Self {
        let x0 = model.initial_state();
        Self::uniform((0..n).map(|_| x0.sample(rng)).collect())
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.particles
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| x * w)
            .sum()
    }

    /// Advance every particle through the transition kernel; weights are untouched.
    pub fn propagate<M: StateSpaceModel + ?Sized>(
        &mut self,
        model: &M,
        theta: &[f64],
        t: usize,
        rng: &mut SimRng,
    ) {
        for x in &mut self.particles {
            *x = model.transition(theta, *x, t, rng);
        }
    }

    /// Reweight by `p_theta(y_t | x)` and return the log of the one-step
    /// evidence estimate `sum_i w_prev_i p(y_t | x_i)`.
    pub fn weight_and_evidence<M: StateSpaceModel + ?Sized>(
        &mut self,
        model: &M,
        theta: &[f64],
        y: f64,
        t: usize,
    ) -> f64 {
        let loglik: Vec<f64> = self
            .particles
            .iter()
            .map(|&x| {
                let l = model.obs_log_density(theta, y, x, t);
                if l.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    l
                }
            })
            .collect();
        self.reweight(&loglik)
    }

    /// Applies per-particle log-likelihoods to the current weights.
    pub fn reweight(&mut self, loglik: &[f64]) -> f64 {
        assert_eq!(loglik.len(), self.len());
        for ((lw, w), l) in self.log_weights.iter_mut().zip(&self.weights).zip(loglik) {
            *lw = w.ln() + l;
        }
        let max = self
            .log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            let w = 1.0 / self.len() as f64;
            self.weights.iter_mut().for_each(|x| *x = w);
            return f64::NEG_INFINITY;
        }
        let mut sum = 0.0;
        for (w, lw) in self.weights.iter_mut().zip(&self.log_weights) {
            *w = (lw - max).exp();
            sum += *w;
        }
        for w in &mut self.weights {
            *w /= sum;
        }
        max + sum.ln()
    }
}

/// Draws `n_out` ancestor indices from non-negative `weights`.
pub fn resample_indices(
    weights: &[f64],
    n_out: usize,
    scheme: ResampleScheme,
    rng: &mut SimRng,
) -> Result<Vec<usize>> {
    if n_out == 0 {
        return Err(Error::invalid("resampling needs n_out >= 1"));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::invalid("resampling weights must be finite and non-negative"));
    }
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cumulative.push(acc);
    }
    let total = acc;
    if !(total > 0.0) {
        return Err(Error::ZeroWeights);
    }
    let last = weights.len() - 1;
    let out = match scheme {
        ResampleScheme::Systematic => {
            let step = total / n_out as f64;
            let mut u = rng.random::<f64>() * step;
            let mut i = 0;
            let mut out = Vec::with_capacity(n_out);
            for _ in 0..n_out {
                while i < last && cumulative[i] <= u {
                    i += 1;
                }
                out.push(i);
                u += step;
            }
            out
        }
        ResampleScheme::Multinomial => (0..n_out)
            .map(|_| {
                let u = rng.random::<f64>() * total;
                cumulative.partition_point(|&c| c <= u).min(last)
            })
            .collect(),
    };
    Ok(out)
}

/// Resamples a weighted point set into a uniformly weighted cloud.
pub fn resample(
    states: &[f64],
    weights: &[f64],
    n_out: usize,
    scheme: ResampleScheme,
    rng: &mut SimRng,
) -> Result<ParticleCloud> {
    if states.len() != weights.len() || states.is_empty() {
        return Err(Error::invalid("states and weights must be non-empty and equally long"));
    }
    let idx = resample_indices(weights, n_out, scheme, rng)?;
    Ok(ParticleCloud::uniform(idx.into_iter().map(|i| states[i]).collect()))
}

/// One filter block for a single model: resample `n` particles from the
/// weighted source set, propagate them under `theta`, and weight against `y`.
#[allow(clippy::too_many_arguments)]
pub fn bootstrap_step<M: StateSpaceModel + ?Sized>(
    model: &M,
    theta: &[f64],
    source_states: &[f64],
    source_weights: &[f64],
    n: usize,
    y: f64,
    t: usize,
    scheme: ResampleScheme,
    rng: &mut SimRng,
) -> Result<(ParticleCloud, f64)> {
    let mut cloud = resample(source_states, source_weights, n, scheme, rng)?;
    cloud.propagate(model, theta, t, rng);
    let log_evidence = cloud.weight_and_evidence(model, theta, y, t);
    Ok((cloud, log_evidence))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PfOutput {
    /// `sum_t log L_t`, the log marginal-likelihood estimate.
    pub log_evidence: f64,
    pub step_log_evidence: Vec<f64>,
    pub filtered_means: Vec<f64>,
}

/// Bootstrap particle filter with resampling at every step.
///
/// Streams: the initial draw uses key `[0, INIT_KEY]`, step `i` uses `[0, i]`;
/// a single-model averaged filter with default stream ids reproduces this run.
pub fn run_pf<M: StateSpaceModel + ?Sized>(
    model: &M,
    theta: &[f64],
    observations: &[f64],
    n: usize,
    seed: u64,
) -> Result<PfOutput> {
    model.param_domain().check(theta)?;
    if n == 0 {
        return Err(Error::invalid("particle count must be at least 1"));
    }
    if observations.is_empty() {
        return Err(Error::invalid("need at least one observation"));
    }
    let mut cloud = ParticleCloud::from_initial(model, n, &mut rng::stream(seed, &[0, INIT_KEY]));
    let first = model.first_time();
    let mut step_log_evidence = Vec::with_capacity(observations.len());
    let mut filtered_means = Vec::with_capacity(observations.len());
    for (i, &y) in observations.iter().enumerate() {
        let mut rng = rng::stream(seed, &[0, i as u64]);
        let (next, le) = bootstrap_step(
            model,
            theta,
            &cloud.particles,
            &cloud.weights,
            n,
            y,
            first + i,
            ResampleScheme::Systematic,
            &mut rng,
        )?;
        cloud = next;
        step_log_evidence.push(le);
        filtered_means.push(cloud.mean());
    }
    Ok(PfOutput {
        log_evidence: step_log_evidence.iter().sum(),
        step_log_evidence,
        filtered_means,
    })
}
