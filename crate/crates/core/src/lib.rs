//! Nonparametric spectral estimation of the volatility and drift of a reflected
//! diffusion on `[0, 1]` observed at random times.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`). The aliases
//! below fix the scalar for the common cases; the Monte Carlo harness and the
//! CLI work in `f64`.
//!
//! ```
//! use reflected_spectral::{estimate_pipeline, simulate_observations, EstimatorConfig,
//!     InitialCondition, Model, Scheme};
//!
//! let model = Model::reflected_brownian_motion();
//! let obs = simulate_observations(&model, &Scheme::deterministic(0.25), 2000, 1e-3, 7,
//!     InitialCondition::Stationary).unwrap();
//! let est = estimate_pipeline(&obs, 5, &EstimatorConfig::default()).unwrap();
//! assert_eq!(est.volatility.values.len(), 801);
//! ```

pub mod adaptive;
pub mod basis;
pub mod bound_check;
pub mod estimators;
pub mod harness;
pub mod io;
pub mod linalg;
pub mod quadrature;
pub mod scalar;
pub mod sde_sim;
pub mod spectral;

pub use adaptive::{lepski_select, stochastic_threshold, LepskiConfig, LepskiResult};
pub use basis::{eval_basis, project_function, BasisSpec, CoefficientVector};
pub use estimators::{
    drift_from_triple, estimate_pipeline, volatility_from_triple, CurveEstimate, CurveKind,
    EigenvalueInversion, Estimate, EstimatorConfig, LaplaceEstimate, Pipeline, SpectralTriple,
};
pub use harness::{misspecified_baseline, run_monte_carlo, ExperimentConfig, RmiseReport};
pub use linalg::Matrix;
pub use scalar::Real;
pub use sde_sim::{
    simulate_observations, simulate_path, DiffusionModel, InitialCondition, ObservationSet,
    PathGrid, SamplingScheme,
};
pub use spectral::{solve_gsep, GsepSolution, PrincipalPair};

pub type Model = DiffusionModel<f64>;
pub type Scheme = SamplingScheme<f64>;
pub type Observations = ObservationSet<f64>;
pub type Curve = CurveEstimate<f64>;
pub type Triple = SpectralTriple<f64>;
pub type Pair = PrincipalPair<f64>;
pub type Mat = Matrix<f64>;

pub type ModelF32 = DiffusionModel<f32>;
pub type SchemeF32 = SamplingScheme<f32>;
pub type ObservationsF32 = ObservationSet<f32>;
pub type CurveF32 = CurveEstimate<f32>;
pub type TripleF32 = SpectralTriple<f32>;
pub type PairF32 = PrincipalPair<f32>;
pub type MatF32 = Matrix<f32>;
