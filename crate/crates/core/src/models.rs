//! State-space models: the abstraction used by the filters and the three
//! concrete models shipped with the crate.
//!
//! States and observations are scalar; parameters are vectors living in a box.

use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{self, SimRng};
use crate::stats::{log_sum_exp, normal_log_pdf, LN_SQRT_2PI};

/// Axis-aligned box `lower <= theta <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl ParamDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::invalid("domain bounds must be non-empty and of equal length"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::invalid(format!(
                "domain bounds must be finite with lower <= upper, got {lower:?} / {upper:?}"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower], vec![upper])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (l, u))| *l <= *x && *x <= *u)
    }

    pub fn check(&self, theta: &[f64]) -> Result<()> {
        if self.contains(theta) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                theta: theta.to_vec(),
                domain: self.to_string(),
            })
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.lower.iter().zip(&self.upper).any(|(l, u)| l >= u)
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| l + (u - l) * rng.random::<f64>())
            .collect()
    }

    pub fn clamp(&self, theta: &mut [f64]) {
        for (x, (l, u)) in theta.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *x = x.clamp(*l, *u);
        }
    }
}

impl fmt::Display for ParamDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| format!("[{l}, {u}]"))
            .collect();
        f.write_str(&parts.join(" x "))
    }
}

/// Prior on the state preceding the first observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    Fixed(f64),
    Normal { mean: f64, var: f64 },
}

impl InitialState {
    pub fn sample(&self, rng: &mut SimRng) -> f64 {
        match *self {
            InitialState::Fixed(x) => x,
            InitialState::Normal { mean, var } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + var.sqrt() * z
            }
        }
    }
}

/// A parameterised state-space model `p_theta(x_t | x_{t-1})`, `p_theta(y_t | x_t)`.
///
/// `transition` maps `x_{t-1}` to `x_t`; the time index passed is the one of
/// the state being produced. Observations are indexed from `first_time()`.
pub trait StateSpaceModel: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    fn param_domain(&self) -> &ParamDomain;

    fn initial_state(&self) -> InitialState;

    /// Time index of the first observation.
    fn first_time(&self) -> usize {
        1
    }

    fn transition(&self, theta: &[f64], x_prev: f64, t: usize, rng: &mut SimRng) -> f64;

    fn sample_observation(&self, theta: &[f64], x: f64, t: usize, rng: &mut SimRng) -> f64;

    /// Finite or `-inf`, never NaN, for finite `(y, x)`.
    fn obs_log_density(&self, theta: &[f64], y: f64, x: f64, t: usize) -> f64;
}

/// `x_t = theta |x_{t-1}| + v_t`, `y_t = log(x_t^2) + u_t`, unit-variance
/// Gaussian noises, `x_0 = 0`, `theta in [0, 1]`.
#[derive(Debug, Clone)]
pub struct AbsGrowthModel {
    domain: ParamDomain,
}

impl AbsGrowthModel {
    pub fn new() -> Self {
        Self {
            domain: ParamDomain::interval(0.0, 1.0).expect("static bounds"),
        }
    }
}

impl Default for AbsGrowthModel {
    fn default() -> Self {
        Self::new()
    }
}

impl StateSpaceModel for AbsGrowthModel {
    fn name(&self) -> &'static str {
        "exp1"
    }

    fn param_domain(&self) -> &ParamDomain {
        &self.domain
    }

    fn initial_state(&self) -> InitialState {
        InitialState::Fixed(0.0)
    }

    fn transition(&self, theta: &[f64], x_prev: f64, _t: usize, rng: &mut SimRng) -> f64 {
        let v: f64 = StandardNormal.sample(rng);
        theta[0] * x_prev.abs() + v
    }

    fn sample_observation(&self, _theta: &[f64], x: f64, _t: usize, rng: &mut SimRng) -> f64 {
        let u: f64 = StandardNormal.sample(rng);
        (x * x).ln() + u
    }

    fn obs_log_density(&self, _theta: &[f64], y: f64, x: f64, _t: usize) -> f64 {
        let x2 = x * x;
        if x2 == 0.0 {
            // log(0) = -inf: the measurement map is singular, zero likelihood.
            return f64::NEG_INFINITY;
        }
        let r = y - x2.ln();
        -LN_SQRT_2PI - 0.5 * r * r
    }
}

pub fn experiment_one_model() -> AbsGrowthModel {
    AbsGrowthModel::new()
}

/// Periodically forced AR(1) with Gamma(3, scale 2) innovations and a
/// switching measurement map, corrupted by outliers with probability `P_o`.
///
/// `theta = [P_o]` in `[0, 1]`; `x_1 = 1` is known, observations start at `t = 2`.
#[derive(Debug, Clone)]
pub struct OutlierSwitchModel {
    domain: ParamDomain,
    innovation: Gamma<f64>,
}

/// Outlier components `(mean, variance)`, each with weight `0.5 * P_o`.
pub const OUTLIER_COMPONENTS: [(f64, f64); 2] = [(20.0, 0.1), (22.0, 0.1)];
/// Nominal noise variance, weight `1 - P_o`.
pub const NOMINAL_NOISE_VAR: f64 = 0.01;

impl OutlierSwitchModel {
    pub fn new() -> Self {
        Self {
            domain: ParamDomain::interval(0.0, 1.0).expect("static bounds"),
            innovation: Gamma::new(3.0, 2.0).expect("valid gamma"),
        }
    }

    /// Deterministic part of the transition, `1 + sin(4 pi mod(t, 60) / 100)`.
    pub fn forcing(t: usize) -> f64 {
        1.0 + (4.0 * PI * (t % 60) as f64 / 100.0).sin()
    }

    pub fn measurement_mean(x: f64, t: usize) -> f64 {
        if t % 60 <= 30 {
            0.2 * x * x
        } else {
            0.2 * x - 2.0
        }
    }

    /// Log-density of the noise `n_t = y_t - h_t(x_t)`.
    pub fn noise_log_density(p_outlier: f64, residual: f64) -> f64 {
        let [(m1, v1), (m2, v2)] = OUTLIER_COMPONENTS;
        let half = (0.5 * p_outlier).ln();
        log_sum_exp(&[
            half + normal_log_pdf(residual, m1, v1),
            half + normal_log_pdf(residual, m2, v2),
            (1.0 - p_outlier).ln() + normal_log_pdf(residual, 0.0, NOMINAL_NOISE_VAR),
        ])
    }

    fn sample_noise(p_outlier: f64, rng: &mut SimRng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        if rng.random::<f64>() < p_outlier {
            let (m, v) = if rng.random::<f64>() < 0.5 {
                OUTLIER_COMPONENTS[0]
            } else {
                OUTLIER_COMPONENTS[1]
            };
            m + v.sqrt() * z
        } else {
            NOMINAL_NOISE_VAR.sqrt() * z
        }
    }
}

impl Default for OutlierSwitchModel {
    fn default() -> Self {
        Self::new()
    }
}

impl StateSpaceModel for OutlierSwitchModel {
    fn name(&self) -> &'static str {
        "exp2"
    }

    fn param_domain(&self) -> &ParamDomain {
        &self.domain
    }

    fn initial_state(&self) -> InitialState {
        InitialState::Fixed(1.0)
    }

    fn first_time(&self) -> usize {
        2
    }

    fn transition(&self, _theta: &[f64], x_prev: f64, t: usize, rng: &mut SimRng) -> f64 {
        Self::forcing(t) + 0.5 * x_prev + self.innovation.sample(rng)
    }

    fn sample_observation(&self, theta: &[f64], x: f64, t: usize, rng: &mut SimRng) -> f64 {
        Self::measurement_mean(x, t) + Self::sample_noise(theta[0], rng)
    }

    fn obs_log_density(&self, theta: &[f64], y: f64, x: f64, t: usize) -> f64 {
        let lp = Self::noise_log_density(theta[0], y - Self::measurement_mean(x, t));
        if lp.is_nan() {
            f64::NEG_INFINITY
        } else {
            lp
        }
    }
}

pub fn experiment_two_model() -> OutlierSwitchModel {
    OutlierSwitchModel::new()
}

/// `x_t = a x_{t-1} + v_t`, `v_t ~ N(0, q)`; `y_t = x_t + n_t`, `n_t ~ N(0, r)`.
///
/// The transition coefficient is the model parameter, `theta = [a]`.
#[derive(Debug, Clone)]
pub struct LinearGaussianModel {
    q: f64,
    r: f64,
    x0: InitialState,
    domain: ParamDomain,
}

impl LinearGaussianModel {
    pub const A_BOUND: f64 = 2.0;

    /// `x_0 ~ N(0, 1)` unless overridden with [`Self::with_initial`].
    pub fn new(q: f64, r: f64) -> Result<Self> {
        if !(q > 0.0 && r > 0.0 && q.is_finite() && r.is_finite()) {
            return Err(Error::invalid(format!(
                "linear-Gaussian variances must be positive, got q = {q}, r = {r}"
            )));
        }
        Ok(Self {
            q,
            r,
            x0: InitialState::Normal { mean: 0.0, var: 1.0 },
            domain: ParamDomain::interval(-Self::A_BOUND, Self::A_BOUND)?,
        })
    }

    pub fn with_initial(mut self, x0: InitialState) -> Self {
        self.x0 = x0;
        self
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// `(mean, variance)` of the initial state.
    pub fn initial_moments(&self) -> (f64, f64) {
        match self.x0 {
            InitialState::Fixed(x) => (x, 0.0),
            InitialState::Normal { mean, var } => (mean, var),
        }
    }
}

impl StateSpaceModel for LinearGaussianModel {
    fn name(&self) -> &'static str {
        "linear_gaussian"
    }

    fn param_domain(&self) -> &ParamDomain {
        &self.domain
    }

    fn initial_state(&self) -> InitialState {
        self.x0
    }

    fn transition(&self, theta: &[f64], x_prev: f64, _t: usize, rng: &mut SimRng) -> f64 {
        let v: f64 = StandardNormal.sample(rng);
        theta[0] * x_prev + self.q.sqrt() * v
    }

    fn sample_observation(&self, _theta: &[f64], x: f64, _t: usize, rng: &mut SimRng) -> f64 {
        let n: f64 = StandardNormal.sample(rng);
        x + self.r.sqrt() * n
    }

    fn obs_log_density(&self, _theta: &[f64], y: f64, x: f64, _t: usize) -> f64 {
        normal_log_pdf(y, x, self.r)
    }
}

pub fn linear_gaussian_model(q: f64, r: f64) -> Result<LinearGaussianModel> {
    LinearGaussianModel::new(q, r)
}

/// Simulated ground truth and observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<f64>,
    pub observations: Vec<f64>,
    pub true_param: Vec<f64>,
    pub seed: u64,
    /// Time index of `states[0]` / `observations[0]`.
    pub first_time: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).map(move |i| self.first_time + i)
    }
}

pub fn simulate<M: StateSpaceModel + ?Sized>(
    model: &M,
    theta: &[f64],
    steps: usize,
    seed: u64,
) -> Result<Trajectory> {
    model.param_domain().check(theta)?;
    if steps == 0 {
        return Err(Error::invalid("trajectory length T must be at least 1"));
    }
    let mut rng = rng::stream(seed, &[]);
    let mut x = model.initial_state().sample(&mut rng);
    let first = model.first_time();
    let mut states = Vec::with_capacity(steps);
    let mut observations = Vec::with_capacity(steps);
    for t in first..first + steps {
        x = model.transition(theta, x, t, &mut rng);
        observations.push(model.sample_observation(theta, x, t, &mut rng));
        states.push(x);
    }
    Ok(Trajectory {
        states,
        observations,
        true_param: theta.to_vec(),
        seed,
        first_time: first,
    })
}

/// Named model constructor used by the CLI and the harness.
pub fn by_name(name: &str) -> Option<Box<dyn StateSpaceModel>> {
    match name {
        "exp1" => Some(Box::new(AbsGrowthModel::new())),
        "exp2" => Some(Box::new(OutlierSwitchModel::new())),
        "linear_gaussian" => Some(Box::new(LinearGaussianModel::new(1.0, 1.0).ok()?)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (hi - lo) / n as f64;
        let mut s = f(lo) + f(hi);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(lo + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn exp1_density_values() {
        let m = experiment_one_model();
        let a = m.obs_log_density(&[0.5], 0.0, 1.0, 1);
        assert!((a + 0.918_938_533_204_672_8).abs() < 1e-12);
        let b = m.obs_log_density(&[0.5], 0.0, 2.0, 1);
        let expect = -0.5 * (2.0 * PI).ln() - 0.5 * 4f64.ln().powi(2);
        assert!((b - expect).abs() < 1e-12);
        assert!((b + 1.879_844_561).abs() < 1e-9);
        assert_eq!(m.obs_log_density(&[0.5], 0.3, 0.0, 1), f64::NEG_INFINITY);
        assert_eq!(m.obs_log_density(&[0.5], 0.3, -0.0, 1), f64::NEG_INFINITY);
        assert_eq!(m.obs_log_density(&[0.5], 0.3, 1e-200, 1), f64::NEG_INFINITY);
    }

    #[test]
    fn exp1_density_sign_symmetric() {
        let m = experiment_one_model();
        for &x in &[0.1, 1.7, -3.2, 42.0, 1e-150] {
            for &y in &[-5.0, 0.0, 2.5] {
                assert_eq!(
                    m.obs_log_density(&[0.3], y, x, 1).to_bits(),
                    m.obs_log_density(&[0.3], y, -x, 1).to_bits()
                );
            }
        }
    }

    #[test]
    fn exp1_zero_param_is_pure_noise() {
        let m = experiment_one_model();
        let tr = simulate(&m, &[0.0], 3, 11).unwrap();
        // Replay the same stream: x_t = v_t exactly.
        let mut rng = rng::stream(11, &[]);
        for &x in &tr.states {
            let v: f64 = StandardNormal.sample(&mut rng);
            let _u: f64 = StandardNormal.sample(&mut rng);
            assert_eq!(x, v);
        }
    }

    #[test]
    fn exp2_measurement_branches() {
        assert!((OutlierSwitchModel::measurement_mean(2.0, 10) - 0.8).abs() < 1e-15);
        assert!((OutlierSwitchModel::measurement_mean(2.0, 45) + 1.6).abs() < 1e-15);
        assert!((OutlierSwitchModel::measurement_mean(2.0, 30) - 0.8).abs() < 1e-15);
        assert!((OutlierSwitchModel::measurement_mean(2.0, 31) + 1.6).abs() < 1e-15);
        assert!((OutlierSwitchModel::measurement_mean(2.0, 60) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn exp2_nominal_density_peak() {
        let d = OutlierSwitchModel::noise_log_density(0.0, 0.0).exp();
        let expect = 1.0 / (2.0 * PI * 0.01f64).sqrt();
        assert!((d - expect).abs() < 1e-12);
        assert!((d - 3.98942).abs() < 1e-5);
    }

    #[test]
    fn exp2_forcing_bounded_and_periodic() {
        for t in 1..=600 {
            let f = OutlierSwitchModel::forcing(t);
            assert!((0.0..=2.0).contains(&f), "t = {t}: {f}");
            assert_eq!(f.to_bits(), OutlierSwitchModel::forcing(t + 60).to_bits());
        }
    }

    #[test]
    fn gamma_innovations_positive() {
        let m = experiment_two_model();
        let mut rng = rng::stream(3, &[]);
        for _ in 0..10_000 {
            let innov = m.transition(&[0.5], 0.0, 1, &mut rng) - OutlierSwitchModel::forcing(1);
            assert!(innov > 0.0);
        }
    }

    #[test]
    fn densities_normalize() {
        let e1 = experiment_one_model();
        for &x in &[0.3, 1.0, -2.5] {
            let z = simpson(|y| e1.obs_log_density(&[0.5], y, x, 1).exp(), -20.0, 20.0, 20_000);
            assert!((z - 1.0).abs() < 1e-3, "exp1 x={x}: {z}");
        }
        let e2 = experiment_two_model();
        for &p in &[0.0, 0.1, 0.5, 0.9, 1.0] {
            for &(x, t) in &[(3.0, 10usize), (3.0, 45)] {
                let h = OutlierSwitchModel::measurement_mean(x, t);
                let z = simpson(
                    |y| e2.obs_log_density(&[p], y, x, t).exp(),
                    h - 5.0,
                    h + 30.0,
                    200_000,
                );
                assert!((z - 1.0).abs() < 1e-3, "exp2 p={p}: {z}");
            }
        }
    }

    #[test]
    fn exp2_density_never_nan() {
        let m = experiment_two_model();
        for &p in &[0.0, 1.0, 0.5] {
            for &y in &[-1e6, 0.0, 1e6] {
                let v = m.obs_log_density(&[p], y, 5.0, 7);
                assert!(!v.is_nan());
            }
        }
    }

    #[test]
    fn simulate_checks_domain_and_length() {
        let m = experiment_one_model();
        assert!(matches!(
            simulate(&m, &[1.5], 10, 0),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(simulate(&m, &[0.5], 0, 0).is_err());
        assert!(linear_gaussian_model(0.0, 1.0).is_err());
        assert!(linear_gaussian_model(1.0, -1.0).is_err());
    }

    #[test]
    fn simulate_is_reproducible() {
        let m = experiment_two_model();
        let a = simulate(&m, &[0.3], 50, 99).unwrap();
        let b = simulate(&m, &[0.3], 50, 99).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.first_time, 2);
        let lg = linear_gaussian_model(1.0, 1.0).unwrap();
        assert_eq!(
            simulate(&lg, &[0.9], 20, 5).unwrap(),
            simulate(&lg, &[0.9], 20, 5).unwrap()
        );
        let e1 = simulate(&experiment_one_model(), &[0.657], 500, 4).unwrap();
        assert_eq!(e1.len(), 500);
        assert_eq!(e1.first_time, 1);
    }

    #[test]
    fn domain_validation() {
        assert!(ParamDomain::new(vec![1.0], vec![0.0]).is_err());
        let d = ParamDomain::interval(0.0, 1.0).unwrap();
        assert!(d.contains(&[0.0]) && d.contains(&[1.0]) && !d.contains(&[1.0001]));
        assert!(!d.contains(&[0.5, 0.5]));
    }
}
