//! Euler-Maruyama simulation of a reflected scalar diffusion on `[0, 1]` and
//! its observation at i.i.d. random gaps.
//!
//! Path noise and observation gaps come from two independent ChaCha streams
//! keyed by the same seed, so the gap sequence never depends on the path.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, Open01, StandardNormal};
use thiserror::Error;

use crate::quadrature::{cumulative_simpson, simpson, uniform_grid};
use crate::scalar::Real;

const PATH_STREAM: u64 = 0;
const GAP_STREAM: u64 = 1;

/// Default burn-in duration (time units) when the initial law is not stationary.
pub const DEFAULT_BURN_IN: f64 = 10.0;

/// Points used to validate model bounds.
const VALIDATION_POINTS: usize = 1001;

/// Resolution of the quadrature grid behind [`InvariantDensity`].
const DENSITY_POINTS: usize = 20_001;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid diffusion model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("simulation produced a non-finite state at step {step}")]
    NonFinite { step: usize },
    #[error("path horizon {available} is exhausted; observations require horizon {required}")]
    HorizonExhausted { required: f64, available: f64 },
    #[error("invalid observation set: {0}")]
    InvalidObservations(String),
}

pub type ScalarFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Polynomial with coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial<T>(pub Vec<T>);

impl<T: Real> Polynomial<T> {
    pub fn eval(&self, x: T) -> T {
        self.0.iter().rev().fold(T::zero(), |acc, &c| acc * x + c)
    }
}

/// The coefficient pair `(σ², b)` together with the ellipticity bound `d`
/// (`σ² ≥ d²`) and the upper bound `D` (`σ² ≤ D`).
#[derive(Clone)]
pub struct DiffusionModel<T> {
    sigma_sq: ScalarFn<T>,
    drift: ScalarFn<T>,
    lower_vol: T,
    upper: T,
}

impl<T: fmt::Debug> fmt::Debug for DiffusionModel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionModel")
            .field("lower_vol", &self.lower_vol)
            .field("upper", &self.upper)
            .finish_non_exhaustive()
    }
}

impl<T: Real> DiffusionModel<T> {
    /// Validates `d² ≤ σ² ≤ D` and a finite drift on a 1001-point grid.
    pub fn new(
        sigma_sq: ScalarFn<T>,
        drift: ScalarFn<T>,
        lower_vol: T,
        upper: T,
    ) -> Result<Self, SimError> {
        if !(lower_vol > T::zero()) || !(upper > T::zero()) {
            return Err(SimError::InvalidModel(format!(
                "bounds must be positive (d = {lower_vol}, D = {upper})"
            )));
        }
        let floor = lower_vol * lower_vol;
        let slack = T::of(64.0) * T::epsilon() * floor.max(T::one());
        for x in uniform_grid(T::zero(), T::one(), VALIDATION_POINTS) {
            let s = sigma_sq(x);
            if !s.is_finite() || s < floor - slack {
                return Err(SimError::InvalidModel(format!(
                    "sigma^2({x}) = {s} violates the lower bound d^2 = {floor}"
                )));
            }
            if s > upper {
                return Err(SimError::InvalidModel(format!(
                    "sigma^2({x}) = {s} exceeds the upper bound D = {upper}"
                )));
            }
            if !drift(x).is_finite() {
                return Err(SimError::InvalidModel(format!("drift is not finite at {x}")));
            }
        }
        Ok(Self {
            sigma_sq,
            drift,
            lower_vol,
            upper,
        })
    }

    /// Skips validation; meant for degenerate limits such as `σ² ≡ 0`.
    pub fn unchecked(sigma_sq: ScalarFn<T>, drift: ScalarFn<T>, lower_vol: T, upper: T) -> Self {
        Self {
            sigma_sq,
            drift,
            lower_vol,
            upper,
        }
    }

    pub fn from_polynomials(
        sigma_sq: Polynomial<T>,
        drift: Polynomial<T>,
        lower_vol: T,
        upper: T,
    ) -> Result<Self, SimError> {
        Self::new(
            Arc::new(move |x| sigma_sq.eval(x)),
            Arc::new(move |x| drift.eval(x)),
            lower_vol,
            upper,
        )
    }

    /// `σ² ≡ 1`, `b ≡ 0`: reflected Brownian motion.
    pub fn reflected_brownian_motion() -> Self {
        Self::new(
            Arc::new(|_| T::one()),
            Arc::new(|_| T::zero()),
            T::one(),
            T::one(),
        )
        .expect("reflected Brownian motion is a valid model")
    }

    /// `σ²(x) = 0.4 - (x - 0.5)²`, `b(x) = 0.2 - 0.4x`, with `D = 1`.
    pub fn mean_reverting_quadratic() -> Self {
        Self::new(
            Arc::new(|x: T| {
                let c = x - T::of(0.5);
                T::of(0.4) - c * c
            }),
            Arc::new(|x: T| T::of(0.2) - T::of(0.4) * x),
            T::of(0.15).sqrt(),
            T::one(),
        )
        .expect("the mean-reverting quadratic model is valid")
    }

    #[inline]
    pub fn sigma_sq(&self, x: T) -> T {
        (self.sigma_sq)(x)
    }

    #[inline]
    pub fn drift(&self, x: T) -> T {
        (self.drift)(x)
    }

    pub fn lower_vol(&self) -> T {
        self.lower_vol
    }

    pub fn upper(&self) -> T {
        self.upper
    }
}

/// Law of the observation gaps; every variant has mean `mean_gap`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplingScheme<T> {
    Deterministic { mean_gap: T },
    /// Uniform on `(0, 2Δ)`.
    UniformOnDoubleDelta { mean_gap: T },
    /// `2Δ · Beta(shape1, shape2)`; the mean is exactly `Δ` only for equal shapes.
    ScaledBeta { mean_gap: T, shape1: T, shape2: T },
    /// Exponential with rate `1/Δ`.
    Exponential { mean_gap: T },
}

impl<T: Real> SamplingScheme<T> {
    pub fn deterministic(mean_gap: T) -> Self {
        Self::Deterministic { mean_gap }
    }

    pub fn uniform(mean_gap: T) -> Self {
        Self::UniformOnDoubleDelta { mean_gap }
    }

    pub fn beta(mean_gap: T) -> Self {
        Self::ScaledBeta {
            mean_gap,
            shape1: T::of(0.2),
            shape2: T::of(0.2),
        }
    }

    pub fn exponential(mean_gap: T) -> Self {
        Self::Exponential { mean_gap }
    }

    /// Parses `deterministic`, `uniform`, `beta` or `exponential`.
    pub fn from_name(name: &str, mean_gap: T) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "deterministic" => Some(Self::deterministic(mean_gap)),
            "uniform" => Some(Self::uniform(mean_gap)),
            "beta" => Some(Self::beta(mean_gap)),
            "exponential" => Some(Self::exponential(mean_gap)),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Deterministic { .. } => "deterministic",
            Self::UniformOnDoubleDelta { .. } => "uniform",
            Self::ScaledBeta { .. } => "beta",
            Self::Exponential { .. } => "exponential",
        }
    }

    pub fn mean_gap(&self) -> T {
        match *self {
            Self::Deterministic { mean_gap }
            | Self::UniformOnDoubleDelta { mean_gap }
            | Self::ScaledBeta { mean_gap, .. }
            | Self::Exponential { mean_gap } => mean_gap,
        }
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, Self::Deterministic { .. })
    }

    fn validate(&self) -> Result<(), SimError> {
        let ok = self.mean_gap() > T::zero()
            && match *self {
                Self::ScaledBeta { shape1, shape2, .. } => shape1 > T::zero() && shape2 > T::zero(),
                _ => true,
            };
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidArgument(format!("invalid sampling scheme {self:?}")))
        }
    }

    fn sampler(&self) -> GapSampler {
        let delta = self.mean_gap().as_f64();
        match *self {
            Self::Deterministic { .. } => GapSampler::Constant(delta),
            Self::UniformOnDoubleDelta { .. } => GapSampler::Uniform(2.0 * delta),
            Self::ScaledBeta { shape1, shape2, .. } => GapSampler::Beta {
                width: 2.0 * delta,
                g1: Gamma::new(shape1.as_f64(), 1.0).expect("positive shape"),
                g2: Gamma::new(shape2.as_f64(), 1.0).expect("positive shape"),
            },
            Self::Exponential { .. } => GapSampler::Exponential(Exp::new(1.0 / delta).expect("positive rate")),
        }
    }
}

enum GapSampler {
    Constant(f64),
    Uniform(f64),
    Beta { width: f64, g1: Gamma<f64>, g2: Gamma<f64> },
    Exponential(Exp<f64>),
}

impl GapSampler {
    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        loop {
            let g = match self {
                Self::Constant(d) => *d,
                Self::Uniform(w) => {
                    let u: f64 = Open01.sample(rng);
                    w * u
                }
                Self::Beta { width, g1, g2 } => {
                    let a = g1.sample(rng);
                    let b = g2.sample(rng);
                    width * a / (a + b)
                }
                Self::Exponential(e) => e.sample(rng),
            };
            // gamma draws with small shape can underflow; gaps must stay strictly positive
            if g > 0.0 && g.is_finite() {
                return g;
            }
        }
    }
}

/// Euler grid of the simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGrid<T> {
    pub step: T,
    pub horizon: T,
    pub states: Vec<T>,
}

impl<T: Real> PathGrid<T> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Observation record `(τ_n, X_{τ_n})`, `n = 0..=N`, with `τ_0 = 0`.
///
/// The gaps are kept as drawn. Times are their running sums, so gaps far
/// below the resolution of `τ_n` (Beta sampling) survive even where
/// neighbouring times round to the same float.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet<T> {
    times: Vec<T>,
    states: Vec<T>,
    gaps: Vec<T>,
}

impl<T: Real> ObservationSet<T> {
    pub fn new(times: Vec<T>, states: Vec<T>) -> Result<Self, SimError> {
        if times.is_empty() || times.len() != states.len() {
            return Err(SimError::InvalidObservations(format!(
                "need equally many times and states (got {} and {})",
                times.len(),
                states.len()
            )));
        }
        if times[0] != T::zero() {
            return Err(SimError::InvalidObservations(format!(
                "first observation time must be 0, got {}",
                times[0]
            )));
        }
        if let Some(w) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(SimError::InvalidObservations(format!(
                "times must be strictly increasing (index {})",
                w + 1
            )));
        }
        check_states(&states)?;
        let gaps = times.windows(2).map(|w| w[1] - w[0]).collect();
        Ok(Self { times, states, gaps })
    }

    /// Builds the record from `N` positive gaps and `N + 1` states.
    pub fn from_gaps(gaps: Vec<T>, states: Vec<T>) -> Result<Self, SimError> {
        if states.len() != gaps.len() + 1 {
            return Err(SimError::InvalidObservations(format!(
                "need one more state than gaps (got {} states, {} gaps)",
                states.len(),
                gaps.len()
            )));
        }
        if let Some(i) = gaps.iter().position(|&g| !(g > T::zero() && g.is_finite())) {
            return Err(SimError::InvalidObservations(format!(
                "gap {} at index {i} is not positive and finite",
                gaps[i]
            )));
        }
        check_states(&states)?;
        let times = observation_times(&gaps);
        Ok(Self { times, states, gaps })
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn states(&self) -> &[T] {
        &self.states
    }

    /// Number of gaps `N` (one less than the number of records).
    pub fn num_gaps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn gaps(&self) -> &[T] {
        &self.gaps
    }

    /// Same data with the time axis reversed (gaps reversed, states reversed).
    pub fn reversed(&self) -> Self {
        let gaps: Vec<T> = self.gaps.iter().rev().copied().collect();
        let states = self.states.iter().rev().copied().collect();
        Self {
            times: observation_times(&gaps),
            states,
            gaps,
        }
    }
}

fn check_states<T: Real>(states: &[T]) -> Result<(), SimError> {
    match states.iter().position(|&x| !(x >= T::zero() && x <= T::one())) {
        Some(i) => Err(SimError::InvalidObservations(format!(
            "state {} at index {i} lies outside [0, 1]",
            states[i]
        ))),
        None => Ok(()),
    }
}

/// How `X₀` is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum InitialCondition<T> {
    /// From the invariant law, by inverse CDF on the quadrature grid.
    #[default]
    Stationary,
    /// Start at `start`, simulate and discard `duration` time units.
    BurnIn { start: T, duration: T },
    Fixed(T),
}

/// Reflects `x` into `[0, 1]` through the 2-periodic triangular map.
#[inline]
pub fn fold_into_unit<T: Real>(x: T) -> T {
    if x >= T::zero() && x <= T::one() {
        return x;
    }
    let two = T::of(2.0);
    let mut y = x % two;
    if y < T::zero() {
        y += two;
    }
    let folded = if y > T::one() { two - y } else { y };
    folded.max(T::zero()).min(T::one())
}

/// Floor of `q`, tolerant to representation error in ratios that should be integral.
fn snapped_floor<T: Real>(q: T) -> usize {
    let slack = (T::epsilon() * T::of(4.0)).max(T::of(1e-12));
    (q + q.abs() * slack).floor().to_usize().unwrap_or(usize::MAX)
}

fn path_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PATH_STREAM);
    rng
}

fn gap_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(GAP_STREAM);
    rng
}

struct Stepper<'a, T> {
    model: &'a DiffusionModel<T>,
    step: T,
    sqrt_step: T,
}

impl<T: Real> Stepper<'_, T> {
    #[inline]
    fn advance<R: Rng>(&self, x: T, rng: &mut R) -> T {
        let xi: f64 = StandardNormal.sample(rng);
        let vol = self.model.sigma_sq(x).max(T::zero()).sqrt();
        x + self.model.drift(x) * self.step + vol * self.sqrt_step * T::of(xi)
    }
}

fn check_step<T: Real>(step: T) -> Result<(), SimError> {
    if step > T::zero() && step.is_finite() {
        Ok(())
    } else {
        Err(SimError::InvalidArgument(format!("step must be positive, got {step}")))
    }
}

fn initial_state<T: Real, R: Rng>(
    model: &DiffusionModel<T>,
    initial: InitialCondition<T>,
    stepper: &Stepper<'_, T>,
    rng: &mut R,
) -> Result<T, SimError> {
    match initial {
        InitialCondition::Fixed(x) => Ok(fold_into_unit(x)),
        InitialCondition::Stationary => {
            let density = InvariantDensity::new(model)?;
            let u: f64 = rng.random();
            Ok(density.inverse_cdf(T::of(u)))
        }
        InitialCondition::BurnIn { start, duration } => {
            let steps = snapped_floor(duration / stepper.step);
            let mut x = fold_into_unit(start);
            for k in 0..steps {
                let next = stepper.advance(x, rng);
                if !next.is_finite() {
                    return Err(SimError::NonFinite { step: k + 1 });
                }
                x = fold_into_unit(next);
            }
            Ok(x)
        }
    }
}

/// Simulates `X_{k h}` for `k = 0..=⌊horizon/h⌋` with reflection after each step.
pub fn simulate_path<T: Real>(
    model: &DiffusionModel<T>,
    horizon: T,
    step: T,
    seed: u64,
    initial: InitialCondition<T>,
) -> Result<PathGrid<T>, SimError> {
    check_step(step)?;
    if !(horizon >= T::zero()) {
        return Err(SimError::InvalidArgument(format!(
            "horizon must be non-negative, got {horizon}"
        )));
    }
    let stepper = Stepper {
        model,
        step,
        sqrt_step: step.sqrt(),
    };
    let mut rng = path_rng(seed);
    let steps = snapped_floor(horizon / step);
    let mut states = Vec::with_capacity(steps + 1);
    let mut x = initial_state(model, initial, &stepper, &mut rng)?;
    states.push(x);
    for k in 0..steps {
        let next = stepper.advance(x, &mut rng);
        if !next.is_finite() {
            return Err(SimError::NonFinite { step: k + 1 });
        }
        x = fold_into_unit(next);
        states.push(x);
    }
    Ok(PathGrid {
        step,
        horizon,
        states,
    })
}

/// `n` i.i.d. gaps from `scheme`.
pub fn draw_gaps<T: Real>(scheme: &SamplingScheme<T>, n: usize, seed: u64) -> Result<Vec<T>, SimError> {
    scheme.validate()?;
    let sampler = scheme.sampler();
    let mut rng = gap_rng(seed);
    Ok((0..n).map(|_| T::of(sampler.draw(&mut rng))).collect())
}

fn observation_times<T: Real>(gaps: &[T]) -> Vec<T> {
    let mut times = Vec::with_capacity(gaps.len() + 1);
    let mut t = T::zero();
    times.push(t);
    for &g in gaps {
        t += g;
        times.push(t);
    }
    times
}

/// Reads the path at `N` random observation times (floor to the Euler grid).
pub fn sample_observations<T: Real>(
    path: &PathGrid<T>,
    scheme: &SamplingScheme<T>,
    n: usize,
    seed: u64,
) -> Result<ObservationSet<T>, SimError> {
    check_step(path.step)?;
    let gaps = draw_gaps(scheme, n, seed)?;
    let times = observation_times(&gaps);
    let last = path.states.len().saturating_sub(1);
    let mut states = Vec::with_capacity(times.len());
    for &t in &times {
        let idx = snapped_floor(t / path.step);
        if idx > last || path.states.is_empty() {
            return Err(SimError::HorizonExhausted {
                required: times.last().copied().unwrap_or(t).as_f64(),
                available: (path.step * T::of_usize(last)).as_f64(),
            });
        }
        states.push(path.states[idx]);
    }
    ObservationSet::from_gaps(gaps, states)
}

/// Streaming equivalent of [`simulate_path`] followed by [`sample_observations`]
/// with the horizon set to `τ_N`; only the observed states are kept.
pub fn simulate_observations<T: Real>(
    model: &DiffusionModel<T>,
    scheme: &SamplingScheme<T>,
    n: usize,
    step: T,
    seed: u64,
    initial: InitialCondition<T>,
) -> Result<ObservationSet<T>, SimError> {
    check_step(step)?;
    let gaps = draw_gaps(scheme, n, seed)?;
    let times = observation_times(&gaps);
    let targets: Vec<usize> = times.iter().map(|&t| snapped_floor(t / step)).collect();

    let stepper = Stepper {
        model,
        step,
        sqrt_step: step.sqrt(),
    };
    let mut rng = path_rng(seed);
    let mut x = initial_state(model, initial, &stepper, &mut rng)?;
    let mut states = Vec::with_capacity(times.len());
    let mut k = 0usize;
    for &target in &targets {
        while k < target {
            let next = stepper.advance(x, &mut rng);
            if !next.is_finite() {
                return Err(SimError::NonFinite { step: k + 1 });
            }
            x = fold_into_unit(next);
            k += 1;
        }
        states.push(x);
    }
    ObservationSet::from_gaps(gaps, states)
}

/// Invariant density `μ ∝ σ⁻² exp(∫₀ˣ 2b/σ²)` tabulated on a fine uniform grid.
#[derive(Debug, Clone)]
pub struct InvariantDensity<T> {
    model: DiffusionModel<T>,
    h: T,
    /// `∫₀^{x_k} 2b/σ²` at grid nodes.
    exponent: Vec<T>,
    normalizer: T,
    cdf: Vec<T>,
}

impl<T: Real> InvariantDensity<T> {
    pub fn new(model: &DiffusionModel<T>) -> Result<Self, SimError> {
        let grid = uniform_grid(T::zero(), T::one(), DENSITY_POINTS);
        let h = T::one() / T::of_usize(DENSITY_POINTS - 1);
        let mut ratio = Vec::with_capacity(grid.len());
        for &x in &grid {
            let s = model.sigma_sq(x);
            if !(s > T::zero()) {
                return Err(SimError::InvalidModel(format!(
                    "sigma^2({x}) = {s} must be positive for the invariant density"
                )));
            }
            ratio.push(T::of(2.0) * model.drift(x) / s);
        }
        let exponent = cumulative_simpson(&ratio, h);
        let unnormalized: Vec<T> = grid
            .iter()
            .zip(&exponent)
            .map(|(&x, &e)| e.exp() / model.sigma_sq(x))
            .collect();
        let normalizer = simpson(&unnormalized, h);
        let mut cdf: Vec<T> = cumulative_simpson(&unnormalized, h)
            .into_iter()
            .map(|c| c / normalizer)
            .collect();
        *cdf.last_mut().expect("non-empty grid") = T::one();
        Ok(Self {
            model: model.clone(),
            h,
            exponent,
            normalizer,
            cdf,
        })
    }

    pub fn density_at(&self, x: T) -> T {
        let x = x.max(T::zero()).min(T::one());
        let last = self.exponent.len() - 1;
        let k = (x / self.h).floor().to_usize().unwrap_or(0).min(last);
        let xk = self.h * T::of_usize(k);
        let g = |y: T| T::of(2.0) * self.model.drift(y) / self.model.sigma_sq(y);
        let span = x - xk;
        let local = if span > T::zero() {
            span / T::of(6.0) * (g(xk) + T::of(4.0) * g(xk + span / T::of(2.0)) + g(x))
        } else {
            T::zero()
        };
        (self.exponent[k] + local).exp() / self.model.sigma_sq(x) / self.normalizer
    }

    pub fn cdf_at(&self, x: T) -> T {
        let x = x.max(T::zero()).min(T::one());
        let pos = x / self.h;
        let k = pos.floor().to_usize().unwrap_or(0).min(self.cdf.len() - 2);
        let w = pos - T::of_usize(k);
        self.cdf[k] + w * (self.cdf[k + 1] - self.cdf[k])
    }

    /// Inverse CDF by bisection on the tabulated CDF and linear interpolation.
    pub fn inverse_cdf(&self, u: T) -> T {
        let u = u.max(T::zero()).min(T::one());
        let k = self.cdf.partition_point(|&c| c < u);
        if k == 0 {
            return T::zero();
        }
        if k >= self.cdf.len() {
            return T::one();
        }
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let w = if c1 > c0 { (u - c0) / (c1 - c0) } else { T::zero() };
        (self.h * (T::of_usize(k - 1) + w)).min(T::one())
    }
}

/// Invariant density of `model` evaluated on `grid`.
pub fn invariant_density_exact<T: Real>(
    model: &DiffusionModel<T>,
    grid: &[T],
) -> Result<Vec<T>, SimError> {
    let density = InvariantDensity::new(model)?;
    Ok(grid.iter().map(|&x| density.density_at(x)).collect())
}
