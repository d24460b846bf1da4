//! Monte Carlo RMISE study: simulate, observe, estimate at fixed and adaptive
//! dimensions, and aggregate the `L²([a,b])` errors against the true volatility.
//!
//! Replications run on a rayon pool; results are collected in replication order
//! and reduced sequentially, so a report depends only on the configuration.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adaptive::{select_index, stochastic_threshold, AdaptiveError, LepskiConfig, ThresholdScaling};
use crate::estimators::{CurveEstimate, EigenvalueInversion, EstimatorConfig, EstimatorError, Pipeline};
use crate::linalg::Matrix;
use crate::quadrature::simpson;
use crate::scalar::Real;
use crate::sde_sim::{
    simulate_observations, DiffusionModel, InitialCondition, Polynomial, SamplingScheme, SimError,
    DEFAULT_BURN_IN,
};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "REFSPEC_WORKERS";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Adaptive(#[from] AdaptiveError),
    #[error("worker pool: {0}")]
    Pool(String),
}

fn uniform_spacing<T: Real>(grid: &[T]) -> Result<T, HarnessError> {
    if grid.len() < 2 {
        return Err(HarnessError::GridMismatch("need at least two grid points".into()));
    }
    let n = grid.len();
    let h = (grid[n - 1] - grid[0]) / T::of_usize(n - 1);
    let tol = h * T::of(1e-6);
    if grid.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > tol) {
        return Err(HarnessError::GridMismatch("grid is not uniform".into()));
    }
    Ok(h)
}

/// Points of `curve` inside `[a, b]`; the curve must reach both ends.
fn restrict<'c, T: Real>(
    curve: &'c CurveEstimate<T>,
    (a, b): (T, T),
) -> Result<(&'c [T], &'c [T]), HarnessError> {
    let tol = T::of(1e-9);
    let lo = curve.grid.partition_point(|&x| x < a - tol);
    let hi = curve.grid.partition_point(|&x| x <= b + tol);
    if lo >= hi
        || (curve.grid[lo] - a).abs() > tol
        || (curve.grid[hi - 1] - b).abs() > tol
    {
        return Err(HarnessError::GridMismatch(format!(
            "curve grid does not cover [{a}, {b}] at its end points"
        )));
    }
    Ok((&curve.grid[lo..hi], &curve.values[lo..hi]))
}

/// `‖curve − f‖_{L²([a,b])}` by composite Simpson on the curve grid.
pub fn l2_distance_fn<T: Real, F: Fn(T) -> T>(
    curve: &CurveEstimate<T>,
    f: F,
    interval: (T, T),
) -> Result<T, HarnessError> {
    let (grid, values) = restrict(curve, interval)?;
    let h = uniform_spacing(grid)?;
    let sq: Vec<T> = grid
        .iter()
        .zip(values)
        .map(|(&x, &v)| {
            let d = v - f(x);
            d * d
        })
        .collect();
    Ok(simpson(&sq, h).sqrt())
}

fn interpolate<T: Real>(grid: &[T], values: &[T], x: T) -> T {
    let k = grid.partition_point(|&g| g <= x).clamp(1, grid.len() - 1);
    let (x0, x1) = (grid[k - 1], grid[k]);
    let w = (x - x0) / (x1 - x0);
    values[k - 1] + w * (values[k] - values[k - 1])
}

/// `‖f − g‖_{L²}` over the common range of two curves; different grids are
/// resampled linearly onto the finer one.
pub fn l2_distance_curves<T: Real>(f: &CurveEstimate<T>, g: &CurveEstimate<T>) -> Result<T, HarnessError> {
    if f.grid == g.grid {
        let h = uniform_spacing(&f.grid)?;
        let sq: Vec<T> = f
            .values
            .iter()
            .zip(&g.values)
            .map(|(&p, &q)| (p - q) * (p - q))
            .collect();
        return Ok(simpson(&sq, h).sqrt());
    }
    let (fine, coarse) = if f.grid.len() >= g.grid.len() { (f, g) } else { (g, f) };
    let tol = T::of(1e-9);
    let same_range = (fine.grid[0] - coarse.grid[0]).abs() <= tol
        && (fine.grid[fine.grid.len() - 1] - coarse.grid[coarse.grid.len() - 1]).abs() <= tol;
    if !same_range {
        return Err(HarnessError::GridMismatch("curves cover different ranges".into()));
    }
    let h = uniform_spacing(&fine.grid)?;
    uniform_spacing(&coarse.grid)?;
    let sq: Vec<T> = fine
        .grid
        .iter()
        .zip(&fine.values)
        .map(|(&x, &v)| {
            let d = v - interpolate(&coarse.grid, &coarse.values, x);
            d * d
        })
        .collect();
    Ok(simpson(&sq, h).sqrt())
}

/// Either a closed-form function or another estimated curve.
pub enum Target<'a, T> {
    Function(&'a dyn Fn(T) -> T),
    Curve(&'a CurveEstimate<T>),
}

/// `‖f − g‖_{L²([a,b])}`.
pub fn l2_distance<T: Real>(
    f: &CurveEstimate<T>,
    g: Target<'_, T>,
    interval: (T, T),
) -> Result<T, HarnessError> {
    match g {
        Target::Function(func) => l2_distance_fn(f, func, interval),
        Target::Curve(other) => {
            let (fg, fv) = restrict(f, interval)?;
            let (gg, gv) = restrict(other, interval)?;
            let cut = |grid: &[T], values: &[T], src: &CurveEstimate<T>| CurveEstimate {
                grid: grid.to_vec(),
                values: values.to_vec(),
                ..src.clone()
            };
            l2_distance_curves(&cut(fg, fv, f), &cut(gg, gv, other))
        }
    }
}

fn default_schemes() -> Vec<String> {
    ["deterministic", "uniform", "exponential", "beta"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn default_sample_sizes() -> Vec<usize> {
    vec![4_000, 12_000, 20_000]
}

fn default_oracle_dims() -> Vec<usize> {
    (2..=8).collect()
}

fn default_lepski_dims() -> Vec<usize> {
    (2..=16).collect()
}

macro_rules! default_fn {
    ($name:ident, $ty:ty, $val:expr) => {
        fn $name() -> $ty {
            $val
        }
    };
}

default_fn!(default_mean_gap, f64, 0.25);
default_fn!(default_iterations, usize, 100);
default_fn!(default_interval, [f64; 2], [0.1, 0.9]);
default_fn!(default_seed, u64, 1);
default_fn!(default_step, f64, 0.001);
default_fn!(default_cap, f64, 1.0);
default_fn!(default_grid_points, usize, 1001);
default_fn!(default_lambda, f64, 0.01);
default_fn!(default_true, bool, true);
default_fn!(default_initial, String, "stationary".to_string());
default_fn!(default_scaling, String, "level".to_string());

/// Model section: a named preset or polynomial coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// `paper-sec6` or `reflected-bm`.
    pub preset: Option<String>,
    pub sigma_sq: Option<Vec<f64>>,
    pub drift: Option<Vec<f64>>,
    /// Lower volatility bound `d`; defaults to `√min σ²` on a 1001-point grid.
    pub lower_vol: Option<f64>,
    /// Upper bound `D` on `σ²`; defaults to 1.
    pub upper: Option<f64>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self::preset("paper-sec6")
    }
}

impl ModelSpec {
    pub fn preset(name: &str) -> Self {
        Self {
            preset: Some(name.to_string()),
            sigma_sq: None,
            drift: None,
            lower_vol: None,
            upper: None,
        }
    }

    pub fn build(&self) -> Result<DiffusionModel<f64>, HarnessError> {
        match (&self.preset, &self.sigma_sq, &self.drift) {
            (Some(name), None, None) => match name.as_str() {
                "paper-sec6" => Ok(DiffusionModel::mean_reverting_quadratic()),
                "reflected-bm" => Ok(DiffusionModel::reflected_brownian_motion()),
                other => Err(HarnessError::Config(format!("unknown model preset `{other}`"))),
            },
            (None, Some(s2), Some(b)) => {
                let s2 = Polynomial(s2.clone());
                let min = (0..=1000)
                    .map(|i| s2.eval(i as f64 / 1000.0))
                    .fold(f64::INFINITY, f64::min);
                let lower = self.lower_vol.unwrap_or_else(|| min.max(0.0).sqrt());
                DiffusionModel::from_polynomials(s2, Polynomial(b.clone()), lower, self.upper.unwrap_or(1.0))
                    .map_err(|e| HarnessError::Config(e.to_string()))
            }
            _ => Err(HarnessError::Config(
                "model needs either `preset` or both `sigma_sq` and `drift`".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LepskiSection {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_lepski_dims")]
    pub dims: Vec<usize>,
    /// `level` (`2^{3J}`, `J = m − 1`) or `dim-cubed` (`m³`).
    #[serde(default = "default_scaling")]
    pub scaling: String,
}

impl Default for LepskiSection {
    fn default() -> Self {
        Self {
            enabled: true,
            lambda: default_lambda(),
            dims: default_lepski_dims(),
            scaling: default_scaling(),
        }
    }
}

/// Oracle dimensions: an explicit list or `"sweep"` (`2..=8`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OracleDims {
    List(Vec<usize>),
    Keyword(String),
}

impl Default for OracleDims {
    fn default() -> Self {
        Self::Keyword("sweep".into())
    }
}

impl OracleDims {
    pub fn resolve(&self) -> Result<Vec<usize>, HarnessError> {
        match self {
            Self::List(v) if !v.is_empty() => Ok(v.clone()),
            Self::List(_) => Err(HarnessError::Config("oracle_dims is empty".into())),
            Self::Keyword(k) if k == "sweep" => Ok(default_oracle_dims()),
            Self::Keyword(k) => Err(HarnessError::Config(format!(
                "oracle_dims must be a list or \"sweep\", got `{k}`"
            ))),
        }
    }
}

/// One file drives a whole table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<String>,
    #[serde(default = "default_mean_gap")]
    pub mean_gap: f64,
    #[serde(default = "default_sample_sizes")]
    pub sample_sizes: Vec<usize>,
    #[serde(default = "default_iterations")]
    pub mc_iterations: usize,
    #[serde(default)]
    pub oracle_dims: OracleDims,
    #[serde(default)]
    pub lepski: LepskiSection,
    #[serde(default = "default_interval")]
    pub interval: [f64; 2],
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_cap")]
    pub vol_cap: f64,
    #[serde(default)]
    pub derivative_floor: f64,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// `stationary` or `burn-in`.
    #[serde(default = "default_initial")]
    pub initial: String,
    /// Also evaluate the estimator that ignores random sampling.
    #[serde(default)]
    pub baseline: bool,
    /// Keep the adaptive curves of the first this-many replications per cell.
    #[serde(default)]
    pub emit_curves: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn schemes(&self) -> Result<Vec<SamplingScheme<f64>>, HarnessError> {
        self.schemes
            .iter()
            .map(|name| {
                SamplingScheme::from_name(name, self.mean_gap)
                    .ok_or_else(|| HarnessError::Config(format!("unknown sampling scheme `{name}`")))
            })
            .collect()
    }

    pub fn estimator_config(&self) -> EstimatorConfig<f64> {
        EstimatorConfig {
            vol_cap: self.vol_cap,
            interval: (self.interval[0], self.interval[1]),
            derivative_floor: self.derivative_floor,
            grid_points: self.grid_points,
        }
    }

    pub fn initial_condition(&self) -> Result<InitialCondition<f64>, HarnessError> {
        match self.initial.as_str() {
            "stationary" => Ok(InitialCondition::Stationary),
            "burn-in" => Ok(InitialCondition::BurnIn {
                start: 0.5,
                duration: DEFAULT_BURN_IN,
            }),
            other => Err(HarnessError::Config(format!(
                "initial must be `stationary` or `burn-in`, got `{other}`"
            ))),
        }
    }

    /// Sorted union of oracle and (when enabled) Lepski dimensions.
    pub fn lepski_config(&self, sample_size: usize) -> Result<LepskiConfig<f64>, HarnessError> {
        let scaling = ThresholdScaling::from_name(&self.lepski.scaling).ok_or_else(|| {
            HarnessError::Config(format!(
                "lepski.scaling must be `level` or `dim-cubed`, got `{}`",
                self.lepski.scaling
            ))
        })?;
        Ok(LepskiConfig {
            lambda: self.lepski.lambda,
            dims: self.lepski.dims.clone(),
            interval: (self.interval[0], self.interval[1]),
            sample_size,
            scaling,
        })
    }

    pub fn all_dims(&self) -> Result<Vec<usize>, HarnessError> {
        let mut set: BTreeSet<usize> = self.oracle_dims.resolve()?.into_iter().collect();
        if self.lepski.enabled {
            set.extend(self.lepski.dims.iter().copied());
        }
        Ok(set.into_iter().collect())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.mc_iterations == 0 {
            return Err(HarnessError::Config("mc_iterations must be at least 1".into()));
        }
        if !(self.mean_gap > 0.0) || !(self.step > 0.0) {
            return Err(HarnessError::Config("mean_gap and step must be positive".into()));
        }
        if self.schemes.is_empty() || self.sample_sizes.is_empty() {
            return Err(HarnessError::Config("schemes and sample_sizes must be non-empty".into()));
        }
        self.schemes()?;
        self.model.build()?;
        self.initial_condition()?;
        self.estimator_config().validate()?;
        let dims = self.all_dims()?;
        if dims[0] == 0 {
            return Err(HarnessError::Config("dimensions must be positive".into()));
        }
        if self.lepski.enabled {
            self.lepski_config(3)?.validate()?;
        }
        let max_dim = *dims.last().expect("non-empty");
        if let Some(&n) = self.sample_sizes.iter().find(|&&n| n < max_dim.max(3)) {
            return Err(HarnessError::Config(format!(
                "sample size {n} is below the largest candidate dimension {max_dim} (or 3)"
            )));
        }
        Ok(())
    }
}

/// RMISE with its Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmiseStat {
    pub rmise: f64,
    /// Delta-method standard error of the RMISE.
    pub mc_se: f64,
    pub replications: usize,
}

impl RmiseStat {
    pub fn from_squared_errors(sq: &[f64]) -> Self {
        let r = sq.len();
        if r == 0 {
            return Self {
                rmise: f64::NAN,
                mc_se: f64::NAN,
                replications: 0,
            };
        }
        let mean = sq.iter().sum::<f64>() / r as f64;
        let var = if r > 1 {
            sq.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / (r - 1) as f64
        } else {
            0.0
        };
        let rmise = mean.sqrt();
        let se_mse = (var / r as f64).sqrt();
        let mc_se = if rmise > 0.0 { se_mse / (2.0 * rmise) } else { se_mse.sqrt() };
        Self {
            rmise,
            mc_se,
            replications: r,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveSummary {
    pub stat: RmiseStat,
    /// Most frequently chosen dimension.
    pub modal_dim: usize,
    /// `(dim, count)` for every candidate.
    pub chosen_counts: Vec<(usize, usize)>,
    pub fallbacks: usize,
}

/// Results for one (scheme, N) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellReport {
    pub scheme: String,
    pub sample_size: usize,
    /// `(dim, stat)` for every oracle candidate.
    pub fixed: Vec<(usize, RmiseStat)>,
    pub oracle_dim: usize,
    pub oracle: RmiseStat,
    pub adaptive: Option<AdaptiveSummary>,
    pub baseline_fixed: Vec<(usize, RmiseStat)>,
    pub baseline_oracle: Option<(usize, RmiseStat)>,
    pub failures: usize,
    /// Replications whose oracle-dim estimate had an invalid pair or clipped points.
    pub degenerate: usize,
    pub failure_messages: Vec<String>,
}

impl CellReport {
    pub fn fixed_at(&self, dim: usize) -> Option<RmiseStat> {
        self.fixed.iter().find(|(d, _)| *d == dim).map(|(_, s)| *s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmittedCurve {
    pub scheme: String,
    pub sample_size: usize,
    pub replication: usize,
    pub dim: usize,
    pub grid: Vec<f64>,
    pub truth: Vec<f64>,
    pub estimate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmiseReport {
    pub cells: Vec<CellReport>,
    pub curves: Vec<EmittedCurve>,
}

/// One line of the report CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub scheme: String,
    pub sample_size: usize,
    pub estimator: &'static str,
    pub dim: usize,
    pub rmise: f64,
    pub mc_se: f64,
    pub failures: usize,
}

impl RmiseReport {
    pub fn cell(&self, scheme: &str, n: usize) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.scheme == scheme && c.sample_size == n)
    }

    pub fn rows(&self) -> Vec<ReportRow> {
        let mut rows = Vec::new();
        for c in &self.cells {
            let row = |estimator, dim, s: &RmiseStat| ReportRow {
                scheme: c.scheme.clone(),
                sample_size: c.sample_size,
                estimator,
                dim,
                rmise: s.rmise,
                mc_se: s.mc_se,
                failures: c.failures,
            };
            for (d, s) in &c.fixed {
                rows.push(row("fixed", *d, s));
            }
            rows.push(row("oracle", c.oracle_dim, &c.oracle));
            if let Some(a) = &c.adaptive {
                rows.push(row("adaptive", a.modal_dim, &a.stat));
            }
            for (d, s) in &c.baseline_fixed {
                rows.push(row("baseline-fixed", *d, s));
            }
            if let Some((d, s)) = &c.baseline_oracle {
                rows.push(row("baseline-oracle", *d, s));
            }
        }
        rows
    }
}

/// Mixes the base seed with the cell and replication counters (splitmix64).
pub fn replication_seed(base: u64, scheme_idx: usize, n_idx: usize, rep: usize) -> u64 {
    let mut z = base;
    for v in [scheme_idx as u64, n_idx as u64, rep as u64] {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(v);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

struct Outcome {
    /// Squared errors per entry of `dims`.
    primary: Vec<f64>,
    secondary: Vec<f64>,
    adaptive: Option<(usize, f64, bool, CurveEstimate<f64>)>,
    degenerate: Vec<bool>,
}

struct Plan {
    model: DiffusionModel<f64>,
    initial: InitialCondition<f64>,
    pipeline: Pipeline<f64>,
    dims: Vec<usize>,
    oracle_dims: Vec<usize>,
    lepski_dims: Vec<usize>,
    truth: Vec<f64>,
    step: f64,
    primary_mode: EigenvalueInversion,
    with_secondary: bool,
    with_adaptive: bool,
    cfg: ExperimentConfig,
}

impl Plan {
    fn new(
        cfg: &ExperimentConfig,
        primary_mode: EigenvalueInversion,
        with_secondary: bool,
        with_adaptive: bool,
    ) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let model = cfg.model.build()?;
        let dims = if with_adaptive {
            cfg.all_dims()?
        } else {
            let mut d = cfg.oracle_dims.resolve()?;
            d.sort_unstable();
            d.dedup();
            d
        };
        let max_dim = *dims.last().expect("non-empty");
        let pipeline = Pipeline::new(cfg.estimator_config(), max_dim)?;
        let truth = pipeline
            .grid()
            .interval_points()
            .iter()
            .map(|&x| model.sigma_sq(x))
            .collect();
        Ok(Self {
            initial: cfg.initial_condition()?,
            model,
            pipeline,
            oracle_dims: cfg.oracle_dims.resolve()?,
            lepski_dims: cfg.lepski.dims.clone(),
            dims,
            truth,
            step: cfg.step,
            primary_mode,
            with_secondary,
            with_adaptive,
            cfg: cfg.clone(),
        })
    }

    fn squared_error(&self, curve: &CurveEstimate<f64>) -> f64 {
        let sq: Vec<f64> = curve
            .values
            .iter()
            .zip(&self.truth)
            .map(|(&v, &t)| (v - t) * (v - t))
            .collect();
        simpson(&sq, self.pipeline.grid().h)
    }

    fn replicate(
        &self,
        scheme: &SamplingScheme<f64>,
        n: usize,
        seed: u64,
        thresholds: &[f64],
    ) -> Result<Outcome, HarnessError> {
        let obs = simulate_observations(&self.model, scheme, n, self.step, seed, self.initial)?;
        let max_dim = *self.dims.last().expect("non-empty");
        let prepared = self.pipeline.prepare(&obs, max_dim)?;
        let mut primary = Vec::with_capacity(self.dims.len());
        let mut secondary = Vec::new();
        let mut degenerate = Vec::with_capacity(self.dims.len());
        let mut lepski_curves = Vec::new();
        for &m in &self.dims {
            let pair = self.pipeline.principal_pair(&prepared, m);
            let valid = pair.valid;
            if self.with_secondary {
                let t = self.pipeline.triple(&prepared, pair.clone(), EigenvalueInversion::MeanGap);
                secondary.push(self.squared_error(&self.pipeline.volatility(&t)));
            }
            let triple = self.pipeline.triple(&prepared, pair, self.primary_mode);
            let vol = self.pipeline.volatility(&triple);
            primary.push(self.squared_error(&vol));
            degenerate.push(!valid || vol.is_degenerate());
            if self.with_adaptive && self.lepski_dims.contains(&m) {
                lepski_curves.push(vol);
            }
        }
        let adaptive = if self.with_adaptive {
            let k = lepski_curves.len();
            let mut dist = Matrix::zeros(k, k);
            for i in 0..k {
                for j in 0..i {
                    let d = l2_distance_curves(&lepski_curves[i], &lepski_curves[j])?;
                    dist[(i, j)] = d;
                    dist[(j, i)] = d;
                }
            }
            let (idx, fallback) = select_index(&dist, thresholds);
            let curve = lepski_curves.swap_remove(idx);
            Some((self.lepski_dims[idx], self.squared_error(&curve), fallback, curve))
        } else {
            None
        };
        Ok(Outcome {
            primary,
            secondary,
            adaptive,
            degenerate,
        })
    }
}

fn oracle_of(dims: &[usize], oracle_dims: &[usize], per_dim: &[Vec<f64>]) -> (Vec<(usize, RmiseStat)>, usize, RmiseStat) {
    let fixed: Vec<(usize, RmiseStat)> = oracle_dims
        .iter()
        .map(|d| {
            let i = dims.iter().position(|x| x == d).expect("oracle dim is evaluated");
            (*d, RmiseStat::from_squared_errors(&per_dim[i]))
        })
        .collect();
    let (dim, stat) = fixed
        .iter()
        .copied()
        .min_by(|a, b| a.1.rmise.total_cmp(&b.1.rmise))
        .expect("non-empty oracle dims");
    (fixed, dim, stat)
}

fn worker_pool() -> Result<rayon::ThreadPool, HarnessError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse::<usize>().ok()) {
        builder = builder.num_threads(n.max(1));
    }
    builder.build().map_err(|e| HarnessError::Pool(e.to_string()))
}

fn run(
    cfg: &ExperimentConfig,
    primary_mode: EigenvalueInversion,
    with_secondary: bool,
    with_adaptive: bool,
) -> Result<RmiseReport, HarnessError> {
    let plan = Plan::new(cfg, primary_mode, with_secondary, with_adaptive)?;
    let schemes = cfg.schemes()?;
    let pool = worker_pool()?;
    let mut cells = Vec::new();
    let mut curves = Vec::new();

    for (si, scheme) in schemes.iter().enumerate() {
        for (ni, &n) in cfg.sample_sizes.iter().enumerate() {
            let lc = plan.cfg.lepski_config(n)?;
            let thresholds: Vec<f64> = if with_adaptive {
                plan.lepski_dims
                    .iter()
                    .map(|&m| stochastic_threshold(&lc, m))
                    .collect::<Result<_, _>>()?
            } else {
                Vec::new()
            };
            let outcomes: Vec<Result<Outcome, String>> = pool.install(|| {
                (0..cfg.mc_iterations)
                    .into_par_iter()
                    .map(|rep| {
                        let seed = replication_seed(cfg.seed, si, ni, rep);
                        plan.replicate(scheme, n, seed, &thresholds)
                            .map_err(|e| format!("replication {rep}: {e}"))
                    })
                    .collect()
            });

            let k = plan.dims.len();
            let mut primary = vec![Vec::new(); k];
            let mut secondary = vec![Vec::new(); k];
            let mut degenerate_by_dim = vec![Vec::new(); k];
            let mut adaptive_sq = Vec::new();
            let mut chosen = Vec::new();
            let mut fallbacks = 0;
            let mut failure_messages = Vec::new();
            for (rep, outcome) in outcomes.into_iter().enumerate() {
                match outcome {
                    Ok(o) => {
                        for i in 0..k {
                            primary[i].push(o.primary[i]);
                            degenerate_by_dim[i].push(o.degenerate[i]);
                            if with_secondary {
                                secondary[i].push(o.secondary[i]);
                            }
                        }
                        if let Some((dim, sq, fb, curve)) = o.adaptive {
                            adaptive_sq.push(sq);
                            chosen.push(dim);
                            fallbacks += usize::from(fb);
                            if rep < cfg.emit_curves {
                                curves.push(EmittedCurve {
                                    scheme: scheme.name().to_string(),
                                    sample_size: n,
                                    replication: rep,
                                    dim,
                                    grid: curve.grid,
                                    truth: plan.truth.clone(),
                                    estimate: curve.values,
                                });
                            }
                        }
                    }
                    Err(msg) => failure_messages.push(msg),
                }
            }

            let (fixed, oracle_dim, oracle) = oracle_of(&plan.dims, &plan.oracle_dims, &primary);
            let oracle_idx = plan.dims.iter().position(|&d| d == oracle_dim).expect("evaluated");
            let degenerate = degenerate_by_dim[oracle_idx].iter().filter(|&&d| d).count();
            let adaptive = with_adaptive.then(|| {
                let chosen_counts: Vec<(usize, usize)> = plan
                    .lepski_dims
                    .iter()
                    .map(|&d| (d, chosen.iter().filter(|&&c| c == d).count()))
                    .collect();
                let modal_dim = chosen_counts
                    .iter()
                    .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
                    .map(|&(d, _)| d)
                    .unwrap_or(0);
                AdaptiveSummary {
                    stat: RmiseStat::from_squared_errors(&adaptive_sq),
                    modal_dim,
                    chosen_counts,
                    fallbacks,
                }
            });
            let (baseline_fixed, baseline_oracle) = if with_secondary {
                let (bf, bd, bs) = oracle_of(&plan.dims, &plan.oracle_dims, &secondary);
                (bf, Some((bd, bs)))
            } else {
                (Vec::new(), None)
            };
            cells.push(CellReport {
                scheme: scheme.name().to_string(),
                sample_size: n,
                fixed,
                oracle_dim,
                oracle,
                adaptive,
                baseline_fixed,
                baseline_oracle,
                failures: failure_messages.len(),
                degenerate,
                failure_messages,
            });
        }
    }
    Ok(RmiseReport { cells, curves })
}

/// Oracle sweep, adaptive estimator and (when `cfg.baseline`) the misspecified baseline.
pub fn run_monte_carlo(cfg: &ExperimentConfig) -> Result<RmiseReport, HarnessError> {
    run(cfg, EigenvalueInversion::EmpiricalLaplace, cfg.baseline, cfg.lepski.enabled)
}

/// The same study with `v̂ = ln(κ̂)/Δ̄`, i.e. treating the data as equidistant at the mean gap.
pub fn misspecified_baseline(cfg: &ExperimentConfig) -> Result<RmiseReport, HarnessError> {
    run(cfg, EigenvalueInversion::MeanGap, false, false)
}
