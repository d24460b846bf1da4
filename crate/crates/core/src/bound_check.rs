//! Randomized driver for the residual and Weyl perturbation bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::Matrix;
use crate::spectral::{residual_bounds, solve_gsep, weyl_bound, SpectralError};

/// Relative slack absorbing rounding in the eigensolves.
pub const ROUNDING_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub size: usize,
    /// `min_i |λ_i − λ̃|`
    pub eigenvalue_error: f64,
    pub eigenvalue_bound: f64,
    pub weyl_violation: f64,
    pub residual_ok: bool,
    pub weyl_ok: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundCheckSummary {
    pub trials: usize,
    pub residual_violations: usize,
    pub weyl_violations: usize,
    /// Largest bound seen when the perturbation is zero.
    pub exact_input_max_bound: f64,
    /// Largest `error / bound` over perturbed trials.
    pub worst_ratio: f64,
}

impl BoundCheckSummary {
    pub fn passed(&self) -> bool {
        self.residual_violations == 0 && self.weyl_violations == 0 && self.exact_input_max_bound <= 1e-10
    }
}

fn symmetric(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> Matrix<f64> {
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = scale * rng.random_range(-1.0..1.0);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn spd(n: usize, rng: &mut ChaCha8Rng) -> Matrix<f64> {
    let m = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    m.matmul(&m.transpose()).add(&Matrix::identity(n).scaled(0.5))
}

/// One random problem of order `size`; `eps = 0` gives the exact-input case.
pub fn bound_trial(size: usize, eps: f64, rng: &mut ChaCha8Rng) -> Result<TrialOutcome, SpectralError> {
    let a = symmetric(size, 1.0, rng);
    let b = spd(size, rng);
    let at = a.add(&symmetric(size, eps, rng));
    let bt = b.add(&symmetric(size, eps, rng));
    let approx = solve_gsep(&at, &bt)?;
    let k = rng.random_range(0..size);
    let lambda = approx.eigenvalues[k];
    let x = approx.eigenvector(k);
    let rb = residual_bounds(&a, &b, &at, &bt, lambda, &x)?;
    let exact = solve_gsep(&a, &b)?;
    let eigenvalue_error = exact
        .eigenvalues
        .iter()
        .map(|&l| (l - lambda).abs())
        .fold(f64::INFINITY, f64::min);
    let scale = exact.eigenvalues.iter().fold(1.0f64, |m, &l| m.max(l.abs()));
    let slack = ROUNDING_SLACK * scale;
    let w = weyl_bound(&a, &b, &at, &bt)?;
    let weyl_violation = w.worst_violation();
    Ok(TrialOutcome {
        size,
        eigenvalue_error,
        eigenvalue_bound: rb.eigenvalue_bound,
        weyl_violation,
        residual_ok: eigenvalue_error <= rb.eigenvalue_bound + slack,
        weyl_ok: weyl_violation <= slack,
    })
}

/// `trials` perturbed problems with sizes drawn from `sizes`, plus one
/// exact-input problem per size.
pub fn run_bound_trials(
    trials: usize,
    sizes: std::ops::RangeInclusive<usize>,
    seed: u64,
) -> Result<BoundCheckSummary, SpectralError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut summary = BoundCheckSummary {
        trials,
        ..Default::default()
    };
    for _ in 0..trials {
        let n = rng.random_range(sizes.clone());
        let eps = 10f64.powf(rng.random_range(-8.0..-1.0));
        let t = bound_trial(n, eps, &mut rng)?;
        summary.residual_violations += usize::from(!t.residual_ok);
        summary.weyl_violations += usize::from(!t.weyl_ok);
        if t.eigenvalue_bound > 0.0 {
            summary.worst_ratio = summary.worst_ratio.max(t.eigenvalue_error / t.eigenvalue_bound);
        }
    }
    for n in sizes {
        let t = bound_trial(n, 0.0, &mut rng)?;
        summary.exact_input_max_bound = summary.exact_input_max_bound.max(t.eigenvalue_bound);
    }
    Ok(summary)
}
