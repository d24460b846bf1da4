//! Plug-in estimators: projected invariant density, empirical Laplace
//! transform and its inverse, the generator eigenvalue `v̂₁`, and the
//! volatility and drift curves built from the spectral triple.

use thiserror::Error;

use crate::basis::{basis_values, eval_basis, BasisEval, BasisSpec, CoefficientVector};
use crate::linalg::Matrix;
use crate::quadrature::{cumulative_simpson, simpson, uniform_grid};
use crate::scalar::Real;
use crate::sde_sim::ObservationSet;
use crate::spectral::{PrincipalPair, SpectralError, SpectralMatrices};

/// Floor for `û′` suggested by the high-probability analysis of the volatility estimator.
pub const SAFE_DERIVATIVE_FLOOR: f64 = 1e-3;

const LAPLACE_REL_TOL: f64 = 1e-12;
const LAPLACE_MAX_ITER: usize = 200;
const LAPLACE_MAX_DOUBLINGS: usize = 2000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("invalid estimator configuration: {0}")]
    InvalidConfig(String),
    #[error("need N >= m observation gaps, got N = {n} for m = {m}")]
    TooFewObservations { n: usize, m: usize },
    #[error("Laplace inversion needs 0 < kappa < 1, got {0}")]
    LaplaceDomain(f64),
    #[error("invalid gap sample: {0}")]
    InvalidGaps(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Cap `D`, target interval `(a, b)`, floor for `û′`, and evaluation grid size on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig<T> {
    pub vol_cap: T,
    pub interval: (T, T),
    pub derivative_floor: T,
    pub grid_points: usize,
}

impl<T: Real> Default for EstimatorConfig<T> {
    fn default() -> Self {
        Self {
            vol_cap: T::one(),
            interval: (T::of(0.1), T::of(0.9)),
            derivative_floor: T::zero(),
            grid_points: 1001,
        }
    }
}

impl<T: Real> EstimatorConfig<T> {
    pub fn validate(&self) -> Result<(), EstimatorError> {
        let (a, b) = self.interval;
        if !(T::zero() < a && a < b && b < T::one()) {
            return Err(EstimatorError::InvalidConfig(format!(
                "interval must satisfy 0 < a < b < 1, got ({a}, {b})"
            )));
        }
        if !(self.vol_cap > T::zero()) {
            return Err(EstimatorError::InvalidConfig(format!(
                "volatility cap must be positive, got {}",
                self.vol_cap
            )));
        }
        if !(self.derivative_floor >= T::zero()) {
            return Err(EstimatorError::InvalidConfig(format!(
                "derivative floor must be non-negative, got {}",
                self.derivative_floor
            )));
        }
        if self.grid_points < 3 {
            return Err(EstimatorError::InvalidConfig("grid needs at least 3 points".into()));
        }
        Ok(())
    }
}

/// Projection of the empirical measure; `coeffs[0] == 1` always.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate<T> {
    pub coeffs: CoefficientVector<T>,
}

fn density_from_values<T: Real>(values: &Matrix<T>) -> DensityEstimate<T> {
    let count = T::of_usize(values.cols());
    let coeffs = (0..values.rows())
        .map(|j| values.row(j).iter().copied().sum::<T>() / count)
        .collect();
    DensityEstimate {
        coeffs: CoefficientVector(coeffs),
    }
}

/// `⟨ψ_λ, μ_N⟩ = (N+1)⁻¹ Σ_n ψ_λ(X_{τ_n})`.
pub fn estimate_density<T: Real>(obs: &ObservationSet<T>, spec: BasisSpec) -> DensityEstimate<T> {
    density_from_values(&basis_values(spec, obs.states()))
}

/// Empirical Laplace transform of the observation gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceEstimate<T> {
    gaps: Vec<T>,
    /// Common value when every gap is identical.
    constant: Option<T>,
}

impl<T: Real> LaplaceEstimate<T> {
    pub fn new(gaps: Vec<T>) -> Result<Self, EstimatorError> {
        if gaps.is_empty() {
            return Err(EstimatorError::InvalidGaps("no gaps".into()));
        }
        if let Some(g) = gaps.iter().find(|&&g| !(g > T::zero() && g.is_finite())) {
            return Err(EstimatorError::InvalidGaps(format!(
                "gaps must be positive and finite, found {g}"
            )));
        }
        let first = gaps[0];
        let constant = gaps.iter().all(|&g| g == first).then_some(first);
        Ok(Self { gaps, constant })
    }

    pub fn from_observations(obs: &ObservationSet<T>) -> Result<Self, EstimatorError> {
        Self::new(obs.gaps().to_vec())
    }

    pub fn gaps(&self) -> &[T] {
        &self.gaps
    }

    pub fn mean_gap(&self) -> T {
        self.gaps.iter().copied().sum::<T>() / T::of_usize(self.gaps.len())
    }

    /// `(L̂(y), L̂′(y))`
    fn value_and_slope(&self, y: T) -> (T, T) {
        if let Some(g) = self.constant {
            let e = (-y * g).exp();
            return (e, -g * e);
        }
        let mut v = T::zero();
        let mut d = T::zero();
        for &g in &self.gaps {
            let e = (-y * g).exp();
            v += e;
            d += g * e;
        }
        let n = T::of_usize(self.gaps.len());
        (v / n, -d / n)
    }
}

/// `L̂(y) = N⁻¹ Σ e^{−yΔ_n}`.
pub fn empirical_laplace<T: Real>(le: &LaplaceEstimate<T>, y: T) -> T {
    le.value_and_slope(y).0
}

/// Solves `L̂(y) = κ` for `y ≥ 0`.
///
/// The root is bracketed by doubling; inside the bracket Newton steps are taken
/// when they stay strictly inside it, otherwise the bracket is bisected.
pub fn invert_laplace<T: Real>(le: &LaplaceEstimate<T>, kappa: T) -> Result<T, EstimatorError> {
    if !(kappa > T::zero() && kappa < T::one()) {
        return Err(EstimatorError::LaplaceDomain(kappa.as_f64()));
    }
    if let Some(g) = le.constant {
        return Ok(-kappa.ln() / g);
    }
    let tol = T::of(LAPLACE_REL_TOL).max(T::epsilon() * T::of(4.0)) * kappa;
    let mut lo = T::zero();
    let mut hi = T::one();
    let mut doublings = 0;
    while empirical_laplace(le, hi) >= kappa {
        lo = hi;
        hi = hi * T::of(2.0);
        doublings += 1;
        if doublings > LAPLACE_MAX_DOUBLINGS || !hi.is_finite() {
            return Err(EstimatorError::LaplaceDomain(kappa.as_f64()));
        }
    }
    let mut y = (lo + hi) / T::of(2.0);
    for _ in 0..LAPLACE_MAX_ITER {
        let (v, slope) = le.value_and_slope(y);
        let diff = v - kappa;
        if diff.abs() <= tol {
            return Ok(y);
        }
        if diff > T::zero() {
            lo = y;
        } else {
            hi = y;
        }
        let newton = y - diff / slope;
        y = if slope < T::zero() && newton > lo && newton < hi {
            newton
        } else {
            (lo + hi) / T::of(2.0)
        };
        if hi - lo <= T::epsilon() * hi {
            break;
        }
    }
    Ok(y)
}

/// How `v̂₁` is obtained from `κ̂₁`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenvalueInversion {
    /// `v̂ = −L̂⁻¹(κ̂)`
    #[default]
    EmpiricalLaplace,
    /// `v̂ = ln(κ̂)/Δ̄`: treats the sampling as equidistant at the mean gap.
    MeanGap,
}

/// `v̂₁ = −L̂⁻¹(κ̂₁) 1{κ̂₁ > 0}`.
pub fn estimate_v1<T: Real>(pair: &PrincipalPair<T>, le: &LaplaceEstimate<T>) -> T {
    estimate_v1_with(pair, le, EigenvalueInversion::EmpiricalLaplace)
}

pub fn estimate_v1_with<T: Real>(
    pair: &PrincipalPair<T>,
    le: &LaplaceEstimate<T>,
    mode: EigenvalueInversion,
) -> T {
    if !pair.valid || !(pair.kappa > T::zero()) {
        return T::zero();
    }
    match mode {
        EigenvalueInversion::EmpiricalLaplace => invert_laplace(le, pair.kappa)
            .map(|y| -y)
            .unwrap_or_else(|_| T::zero()),
        EigenvalueInversion::MeanGap => match le.constant {
            Some(g) => pair.kappa.ln() / g,
            None => pair.kappa.ln() / le.mean_gap(),
        },
    }
}

/// Everything the identification formulas consume: `(v̂₁, û₁, μ̂)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTriple<T> {
    pub v1: T,
    pub pair: PrincipalPair<T>,
    pub density: DensityEstimate<T>,
}

impl<T: Real> SpectralTriple<T> {
    pub fn dim(&self) -> usize {
        self.pair.coeffs.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Volatility,
    Drift,
}

impl CurveKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Volatility => "volatility",
            Self::Drift => "drift",
        }
    }
}

/// An estimated coefficient on the grid points inside `[a, b]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveEstimate<T> {
    pub grid: Vec<T>,
    pub values: Vec<T>,
    pub kind: CurveKind,
    /// Basis dimension the curve was estimated with.
    pub dim: usize,
    /// Points whose raw value was non-finite or non-positive and was replaced by `D`.
    pub degenerate_points: usize,
    /// Drift only: the `L²` threshold rejected `b̃` and the zero curve was returned.
    pub thresholded: bool,
}

impl<T: Real> CurveEstimate<T> {
    pub fn is_degenerate(&self) -> bool {
        self.degenerate_points > 0
    }
}

/// Uniform grid on `[0, 1]`, its sub-range inside `[a, b]`, and the basis on it.
#[derive(Debug, Clone)]
pub struct EvaluationGrid<T> {
    pub points: Vec<T>,
    pub h: T,
    /// Inclusive index range of the points inside `[a, b]`.
    pub range: (usize, usize),
    pub eval: BasisEval<T>,
}

impl<T: Real> EvaluationGrid<T> {
    pub fn new(cfg: &EstimatorConfig<T>, max_dim: usize) -> Result<Self, EstimatorError> {
        cfg.validate()?;
        let n = cfg.grid_points;
        let points = uniform_grid(T::zero(), T::one(), n);
        let h = T::one() / T::of_usize(n - 1);
        let scale = T::of_usize(n - 1);
        let slack = T::of(1e-9);
        let (a, b) = cfg.interval;
        let lo = (a * scale - slack).ceil().to_usize().unwrap_or(0);
        let hi = (b * scale + slack).floor().to_usize().unwrap_or(n - 1).min(n - 1);
        if hi < lo + 2 {
            return Err(EstimatorError::InvalidConfig(
                "evaluation grid has fewer than 3 points inside the interval".into(),
            ));
        }
        let spec = BasisSpec::from_dim(max_dim.max(1))
            .map_err(|e| EstimatorError::InvalidConfig(e.to_string()))?;
        let eval = eval_basis(spec, &points);
        Ok(Self {
            points,
            h,
            range: (lo, hi),
            eval,
        })
    }

    pub fn max_dim(&self) -> usize {
        self.eval.dim()
    }

    pub fn interval_points(&self) -> &[T] {
        &self.points[self.range.0..=self.range.1]
    }

    /// Expansion with the leading `coeffs.len()` rows of `mat`.
    fn expand(&self, coeffs: &[T], mat: &Matrix<T>) -> Vec<T> {
        assert!(coeffs.len() <= mat.rows(), "expansion exceeds the grid basis");
        let mut out = vec![T::zero(); mat.cols()];
        for (j, &c) in coeffs.iter().enumerate() {
            if c == T::zero() {
                continue;
            }
            for (o, &v) in out.iter_mut().zip(mat.row(j)) {
                *o += c * v;
            }
        }
        out
    }
}

fn floored<T: Real>(d: T, floor: T) -> T {
    if d < floor {
        floor
    } else {
        d
    }
}

/// `σ̂²(x) = 2v̂ ∫₀ˣ ûμ̂ / (max(û′, c) μ̂(x)) ∧ D` on the grid points inside `[a, b]`.
pub fn volatility_on_grid<T: Real>(
    triple: &SpectralTriple<T>,
    cfg: &EstimatorConfig<T>,
    grid: &EvaluationGrid<T>,
) -> CurveEstimate<T> {
    let u = grid.expand(triple.pair.coeffs.as_slice(), &grid.eval.values);
    let mu = grid.expand(triple.density.coeffs.as_slice(), &grid.eval.values);
    let (lo, hi) = grid.range;
    let product: Vec<T> = u.iter().zip(&mu).map(|(&p, &q)| p * q).collect();
    let integral = cumulative_simpson(&product[..=hi], grid.h);
    let du = grid.expand(triple.pair.coeffs.as_slice(), &grid.eval.d1);
    let two_v = T::of(2.0) * triple.v1;
    let mut degenerate = 0;
    let values = (lo..=hi)
        .map(|k| {
            let ratio = two_v * integral[k] / (floored(du[k], cfg.derivative_floor) * mu[k]);
            if ratio.is_finite() && ratio > T::zero() {
                ratio.min(cfg.vol_cap)
            } else {
                degenerate += 1;
                cfg.vol_cap
            }
        })
        .collect();
    CurveEstimate {
        grid: grid.interval_points().to_vec(),
        values,
        kind: CurveKind::Volatility,
        dim: triple.dim(),
        degenerate_points: degenerate,
        thresholded: false,
    }
}

/// `b̃ = v̂û/û′ − σ̂²û″/(2û′)`, replaced by zero when `‖b̃‖_{L²([a,b])} > 2D`.
pub fn drift_on_grid<T: Real>(
    triple: &SpectralTriple<T>,
    vol: &CurveEstimate<T>,
    cfg: &EstimatorConfig<T>,
    grid: &EvaluationGrid<T>,
) -> CurveEstimate<T> {
    let (lo, hi) = grid.range;
    assert_eq!(vol.values.len(), hi - lo + 1, "volatility curve must come from the same grid");
    let coeffs = triple.pair.coeffs.as_slice();
    let u = grid.expand(coeffs, &grid.eval.values);
    let du = grid.expand(coeffs, &grid.eval.d1);
    let d2u = grid.expand(coeffs, &grid.eval.d2);
    let two = T::of(2.0);
    let raw: Vec<T> = (lo..=hi)
        .zip(&vol.values)
        .map(|(k, &s2)| {
            let d = floored(du[k], cfg.derivative_floor);
            triple.v1 * u[k] / d - s2 * d2u[k] / (two * d)
        })
        .collect();
    let squares: Vec<T> = raw.iter().map(|&v| v * v).collect();
    let l2 = simpson(&squares, grid.h).sqrt();
    let thresholded = !(l2.is_finite() && l2 <= two * cfg.vol_cap);
    let values = if thresholded {
        vec![T::zero(); raw.len()]
    } else {
        raw
    };
    CurveEstimate {
        grid: grid.interval_points().to_vec(),
        values,
        kind: CurveKind::Drift,
        dim: triple.dim(),
        degenerate_points: 0,
        thresholded,
    }
}

/// [`volatility_on_grid`] on a freshly built grid.
pub fn volatility_from_triple<T: Real>(
    triple: &SpectralTriple<T>,
    cfg: &EstimatorConfig<T>,
) -> Result<CurveEstimate<T>, EstimatorError> {
    let grid = EvaluationGrid::new(cfg, triple.dim())?;
    Ok(volatility_on_grid(triple, cfg, &grid))
}

/// [`drift_on_grid`] on a freshly built grid.
pub fn drift_from_triple<T: Real>(
    triple: &SpectralTriple<T>,
    vol: &CurveEstimate<T>,
    cfg: &EstimatorConfig<T>,
) -> Result<CurveEstimate<T>, EstimatorError> {
    let grid = EvaluationGrid::new(cfg, triple.dim())?;
    Ok(drift_on_grid(triple, vol, cfg, &grid))
}

/// Result of one full estimation run at a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate<T> {
    pub triple: SpectralTriple<T>,
    pub volatility: CurveEstimate<T>,
    pub drift: CurveEstimate<T>,
}

/// Observation-dependent quantities shared by every candidate dimension.
#[derive(Debug, Clone)]
pub struct PreparedSample<T> {
    pub matrices: SpectralMatrices<T>,
    pub density: DensityEstimate<T>,
    pub laplace: LaplaceEstimate<T>,
    pub num_gaps: usize,
}

impl<T: Real> PreparedSample<T> {
    pub fn density(&self, dim: usize) -> DensityEstimate<T> {
        DensityEstimate {
            coeffs: CoefficientVector(self.density.coeffs.0[..dim].to_vec()),
        }
    }
}

/// Reusable estimator with a fixed configuration and evaluation grid.
#[derive(Debug, Clone)]
pub struct Pipeline<T> {
    cfg: EstimatorConfig<T>,
    grid: EvaluationGrid<T>,
}

impl<T: Real> Pipeline<T> {
    pub fn new(cfg: EstimatorConfig<T>, max_dim: usize) -> Result<Self, EstimatorError> {
        let grid = EvaluationGrid::new(&cfg, max_dim)?;
        Ok(Self { cfg, grid })
    }

    pub fn config(&self) -> &EstimatorConfig<T> {
        &self.cfg
    }

    pub fn grid(&self) -> &EvaluationGrid<T> {
        &self.grid
    }

    pub fn max_dim(&self) -> usize {
        self.grid.max_dim()
    }

    /// Builds `Ĝ`, `R̂`, `μ̂` and `L̂` for dimensions up to `max_dim`.
    pub fn prepare(&self, obs: &ObservationSet<T>, max_dim: usize) -> Result<PreparedSample<T>, EstimatorError> {
        let n = obs.num_gaps();
        if n < max_dim {
            return Err(EstimatorError::TooFewObservations { n, m: max_dim });
        }
        if max_dim > self.max_dim() {
            return Err(EstimatorError::InvalidConfig(format!(
                "dimension {max_dim} exceeds the pipeline maximum {}",
                self.max_dim()
            )));
        }
        let spec = BasisSpec::from_dim(max_dim).map_err(|e| EstimatorError::InvalidConfig(e.to_string()))?;
        let values = basis_values(spec, obs.states());
        Ok(PreparedSample {
            matrices: SpectralMatrices::from_values(&values)?,
            density: density_from_values(&values),
            laplace: LaplaceEstimate::from_observations(obs)?,
            num_gaps: n,
        })
    }

    pub fn principal_pair(&self, prepared: &PreparedSample<T>, dim: usize) -> PrincipalPair<T> {
        prepared.matrices.principal_pair(dim, self.cfg.interval)
    }

    pub fn triple(
        &self,
        prepared: &PreparedSample<T>,
        pair: PrincipalPair<T>,
        mode: EigenvalueInversion,
    ) -> SpectralTriple<T> {
        let dim = pair.coeffs.len();
        SpectralTriple {
            v1: estimate_v1_with(&pair, &prepared.laplace, mode),
            density: prepared.density(dim),
            pair,
        }
    }

    pub fn volatility(&self, triple: &SpectralTriple<T>) -> CurveEstimate<T> {
        volatility_on_grid(triple, &self.cfg, &self.grid)
    }

    pub fn drift(&self, triple: &SpectralTriple<T>, vol: &CurveEstimate<T>) -> CurveEstimate<T> {
        drift_on_grid(triple, vol, &self.cfg, &self.grid)
    }

    pub fn estimate(&self, obs: &ObservationSet<T>, dim: usize) -> Result<Estimate<T>, EstimatorError> {
        let prepared = self.prepare(obs, dim)?;
        let pair = self.principal_pair(&prepared, dim);
        let triple = self.triple(&prepared, pair, EigenvalueInversion::EmpiricalLaplace);
        let volatility = self.volatility(&triple);
        let drift = self.drift(&triple, &volatility);
        Ok(Estimate {
            triple,
            volatility,
            drift,
        })
    }
}

/// density → Gram → transition → GSEP → principal pair → Laplace inversion → plug-ins.
pub fn estimate_pipeline<T: Real>(
    obs: &ObservationSet<T>,
    dim: usize,
    cfg: &EstimatorConfig<T>,
) -> Result<Estimate<T>, EstimatorError> {
    if dim == 0 {
        return Err(EstimatorError::InvalidConfig("dimension must be at least 1".into()));
    }
    let n = obs.num_gaps();
    if n < dim {
        return Err(EstimatorError::TooFewObservations { n, m: dim });
    }
    Pipeline::new(*cfg, dim)?.estimate(obs, dim)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, SQRT_2};

    fn analytic_triple() -> SpectralTriple<f64> {
        SpectralTriple {
            v1: -PI * PI / 2.0,
            pair: PrincipalPair {
                kappa: (-PI * PI / 8.0).exp(),
                coeffs: CoefficientVector(vec![0.0, -1.0, 0.0]),
                valid: true,
            },
            density: DensityEstimate {
                coeffs: CoefficientVector(vec![1.0, 0.0, 0.0]),
            },
        }
    }

    #[test]
    fn density_examples() {
        let obs = ObservationSet::new(vec![0.0f64, 1.0, 2.0], vec![0.5, 0.5, 0.5]).unwrap();
        let d = estimate_density(&obs, BasisSpec::cosine(1));
        assert_eq!(d.coeffs.0[0], 1.0);
        assert!(d.coeffs.0[1].abs() < 1e-15);
    }

    #[test]
    fn laplace_examples() {
        let le = LaplaceEstimate::new(vec![0.25; 4]).unwrap();
        assert_eq!(empirical_laplace(&le, 0.0), 1.0);
        assert!((empirical_laplace(&le, 4.0) - (-1f64).exp()).abs() < 1e-15);
        assert!((invert_laplace(&le, (-1f64).exp()).unwrap() - 4.0).abs() < 1e-9);
        assert!(invert_laplace(&le, 1.0).is_err());
        assert!(invert_laplace(&le, 0.0).is_err());
        assert!(LaplaceEstimate::new(vec![0.1, 0.0]).is_err());
        assert!(LaplaceEstimate::<f64>::new(vec![]).is_err());
    }

    #[test]
    fn laplace_round_trip_on_mixed_sample() {
        let le = LaplaceEstimate::new(vec![0.01f64, 0.2, 0.33, 1.7, 0.05]).unwrap();
        let k = empirical_laplace(&le, 7.3);
        assert!((invert_laplace(&le, k).unwrap() - 7.3).abs() < 1e-9);
    }

    #[test]
    fn v1_indicator() {
        let le = LaplaceEstimate::new(vec![0.25; 3]).unwrap();
        assert_eq!(estimate_v1(&PrincipalPair::exceptional(3), &le), 0.0);
        let pair = PrincipalPair {
            kappa: (-1f64).exp(),
            coeffs: CoefficientVector(vec![0.0, 1.0]),
            valid: true,
        };
        assert!((estimate_v1(&pair, &le) + 4.0).abs() < 1e-12);
        let base = estimate_v1_with(&pair, &le, EigenvalueInversion::MeanGap);
        assert_eq!(base, estimate_v1(&pair, &le));
    }

    #[test]
    fn identification_identities() {
        let cfg = EstimatorConfig::default();
        let t = analytic_triple();
        let vol = volatility_from_triple(&t, &cfg).unwrap();
        assert_eq!(vol.values.len(), 801);
        assert!(vol.values.iter().all(|v| (v - 1.0).abs() < 1e-6));
        let drift = drift_from_triple(&t, &vol, &cfg).unwrap();
        assert!(!drift.thresholded);
        assert!(drift.values.iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn invalid_pair_yields_capped_degenerate_curve() {
        let cfg = EstimatorConfig::default();
        let t = SpectralTriple {
            v1: 0.0,
            pair: PrincipalPair::exceptional(3),
            density: DensityEstimate {
                coeffs: CoefficientVector(vec![1.0, 0.0, 0.0]),
            },
        };
        let vol = volatility_from_triple(&t, &cfg).unwrap();
        assert!(vol.values.iter().all(|&v| v == cfg.vol_cap));
        assert!(vol.is_degenerate());
    }

    #[test]
    fn drift_threshold_rule() {
        // u = -ψ₁ + 0.9ψ₂ ... pick a triple whose raw drift is large: v huge
        let mut t = analytic_triple();
        t.v1 = -PI * PI / 2.0 * 50.0;
        let cfg = EstimatorConfig::default();
        let vol = CurveEstimate {
            values: vec![1.0; 801],
            ..volatility_from_triple(&analytic_triple(), &cfg).unwrap()
        };
        let drift = drift_from_triple(&t, &vol, &cfg).unwrap();
        assert!(drift.thresholded);
        assert!(drift.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn config_validation() {
        let mut cfg = EstimatorConfig::<f64>::default();
        cfg.interval = (0.5, 0.4);
        assert!(cfg.validate().is_err());
        cfg.interval = (0.0, 0.4);
        assert!(cfg.validate().is_err());
        let mut cfg = EstimatorConfig::<f64>::default();
        cfg.vol_cap = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn too_few_observations() {
        let obs = ObservationSet::new(vec![0.0, 1.0, 2.0], vec![0.1, 0.5, 0.7]).unwrap();
        let err = estimate_pipeline(&obs, 5, &EstimatorConfig::default()).unwrap_err();
        assert_eq!(err, EstimatorError::TooFewObservations { n: 2, m: 5 });
        assert!(err.to_string().contains("N = 2") && err.to_string().contains("m = 5"));
    }

    #[test]
    fn analytic_u_is_increasing() {
        // -ψ₁ = -√2 cos(πx) has derivative √2 π sin(πx) > 0
        let t = analytic_triple();
        let g = EvaluationGrid::new(&EstimatorConfig::default(), 3).unwrap();
        let du = g.expand(t.pair.coeffs.as_slice(), &g.eval.d1);
        assert!((du[500] - SQRT_2 * PI).abs() < 1e-12);
    }
}
