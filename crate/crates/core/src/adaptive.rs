//! Lepski-type data-driven choice of the basis dimension for the volatility estimator.

use thiserror::Error;

use crate::estimators::{CurveEstimate, EigenvalueInversion, EstimatorConfig, EstimatorError, Pipeline};
use crate::harness::l2_distance_curves;
use crate::linalg::Matrix;
use crate::scalar::Real;
use crate::sde_sim::ObservationSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdaptiveError {
    #[error("invalid Lepski configuration: {0}")]
    InvalidConfig(String),
    #[error("threshold needs N >= 3 so that ln ln N > 0, got N = {0}")]
    SampleTooSmall(usize),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

/// How the threshold grows with the candidate space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdScaling {
    /// `2^{3J}` with the cosine level `J = m − 1`.
    #[default]
    Level,
    /// `m³`.
    DimensionCubed,
}

impl ThresholdScaling {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "level" => Some(Self::Level),
            "dim-cubed" => Some(Self::DimensionCubed),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Level => "level",
            Self::DimensionCubed => "dim-cubed",
        }
    }

    /// Squared growth factor for dimension `m`.
    pub fn factor<T: Real>(&self, dim: usize) -> T {
        match self {
            Self::Level => T::of(2.0).powi(3 * dim.saturating_sub(1) as i32),
            Self::DimensionCubed => T::of_usize(dim).powi(3),
        }
    }
}

/// `Λ`, increasing candidate dimensions and the sample size entering `s_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct LepskiConfig<T> {
    pub lambda: T,
    pub dims: Vec<usize>,
    pub interval: (T, T),
    pub sample_size: usize,
    pub scaling: ThresholdScaling,
}

impl<T: Real> LepskiConfig<T> {
    /// `Λ = 0.01`, dims `2..=16`.
    pub fn new(sample_size: usize) -> Self {
        Self {
            lambda: T::of(0.01),
            dims: (2..=16).collect(),
            interval: (T::of(0.1), T::of(0.9)),
            sample_size,
            scaling: ThresholdScaling::Level,
        }
    }

    pub fn validate(&self) -> Result<(), AdaptiveError> {
        if self.dims.is_empty() {
            return Err(AdaptiveError::InvalidConfig("candidate dimensions are empty".into()));
        }
        if self.dims.windows(2).any(|w| w[1] <= w[0]) || self.dims[0] == 0 {
            return Err(AdaptiveError::InvalidConfig(format!(
                "candidate dimensions must be positive and strictly increasing: {:?}",
                self.dims
            )));
        }
        if !(self.lambda >= T::zero()) {
            return Err(AdaptiveError::InvalidConfig(format!(
                "Lambda must be non-negative, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// `s_m = Λ √(2^{3(m−1)} ln ln N / N)`, or `Λ √(m³ ln ln N / N)` under
/// [`ThresholdScaling::DimensionCubed`].
pub fn stochastic_threshold<T: Real>(cfg: &LepskiConfig<T>, dim: usize) -> Result<T, AdaptiveError> {
    let n = cfg.sample_size;
    if n < 3 {
        return Err(AdaptiveError::SampleTooSmall(n));
    }
    let nn = T::of_usize(n);
    let growth: T = cfg.scaling.factor(dim);
    Ok(cfg.lambda * (growth * nn.ln().ln() / nn).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LepskiResult<T> {
    pub chosen_dim: usize,
    pub curve: CurveEstimate<T>,
    pub dims: Vec<usize>,
    pub thresholds: Vec<T>,
    /// `‖σ̂²_{dims[i]} − σ̂²_{dims[j]}‖_{L²([a,b])}`
    pub distances: Matrix<T>,
    /// Only the largest candidate satisfied the rule.
    pub fallback: bool,
}

/// Index of the smallest candidate `i` with `distances[(k, i)] ≤ thresholds[k]` for all `k > i`.
///
/// The largest candidate satisfies the rule vacuously; `fallback` reports that
/// nothing smaller did.
pub fn select_index<T: Real>(distances: &Matrix<T>, thresholds: &[T]) -> (usize, bool) {
    let k = thresholds.len();
    assert!(k > 0 && distances.rows() == k && distances.cols() == k);
    let chosen = (0..k)
        .find(|&i| (i + 1..k).all(|j| distances[(j, i)] <= thresholds[j]))
        .unwrap_or(k - 1);
    (chosen, chosen == k - 1 && k > 1)
}

/// Applies the selection rule to precomputed candidate curves.
pub fn select_from_curves<T: Real>(
    curves: Vec<CurveEstimate<T>>,
    dims: &[usize],
    thresholds: Vec<T>,
) -> LepskiResult<T> {
    let k = curves.len();
    assert_eq!(k, dims.len());
    assert_eq!(k, thresholds.len());
    let mut distances = Matrix::zeros(k, k);
    for i in 0..k {
        for j in 0..i {
            let d = l2_distance_curves(&curves[i], &curves[j])
                .expect("candidate curves share a grid");
            distances[(i, j)] = d;
            distances[(j, i)] = d;
        }
    }
    let (chosen, fallback) = select_index(&distances, &thresholds);
    let curve = curves.into_iter().nth(chosen).expect("chosen index is in range");
    LepskiResult {
        chosen_dim: dims[chosen],
        curve,
        dims: dims.to_vec(),
        thresholds,
        distances,
        fallback,
    }
}

/// Estimates `σ̂²_m` for every candidate and applies the selection rule.
pub fn lepski_select<T: Real>(
    obs: &ObservationSet<T>,
    cfg: &LepskiConfig<T>,
    est_cfg: &EstimatorConfig<T>,
) -> Result<LepskiResult<T>, AdaptiveError> {
    cfg.validate()?;
    let max_dim = *cfg.dims.last().expect("validated non-empty");
    let thresholds = cfg
        .dims
        .iter()
        .map(|&m| stochastic_threshold(cfg, m))
        .collect::<Result<Vec<_>, _>>()?;
    let mut est_cfg = *est_cfg;
    est_cfg.interval = cfg.interval;
    let pipeline = Pipeline::new(est_cfg, max_dim)?;
    let prepared = pipeline.prepare(obs, max_dim)?;
    let curves = cfg
        .dims
        .iter()
        .map(|&m| {
            let pair = pipeline.principal_pair(&prepared, m);
            let triple = pipeline.triple(&prepared, pair, EigenvalueInversion::EmpiricalLaplace);
            pipeline.volatility(&triple)
        })
        .collect();
    Ok(select_from_curves(curves, &cfg.dims, thresholds))
}
