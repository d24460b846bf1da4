//! Empirical Gram and transition matrices, the generalized symmetric
//! eigenproblem `A x = λ B x`, selection of the principal nontrivial
//! eigenpair, and a posteriori / Weyl-type perturbation bounds.

use thiserror::Error;

use crate::basis::{cosine_value, CoefficientVector};
use crate::linalg::{norm, symmetric_eigen, LinalgError, Matrix};
use crate::scalar::Real;

/// Eigenvalues within this distance of 1 are treated as the trivial eigenvalue.
pub const TRIVIAL_EIGENVALUE_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("need at least one observation gap, got N = {0}")]
    TooFewObservations(usize),
    #[error("matrices have mismatched dimensions ({0} vs {1})")]
    DimensionMismatch(usize, usize),
}

/// Empirical Gram matrix `Ĝ` of the basis in `L²(μ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix<T>(pub Matrix<T>);

/// Symmetrised lag-one matrix `R̂` of the transition operator.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix<T>(pub Matrix<T>);

impl<T: Real> GramMatrix<T> {
    pub fn matrix(&self) -> &Matrix<T> {
        &self.0
    }

    pub fn leading(&self, m: usize) -> Self {
        Self(self.0.leading(m))
    }
}

impl<T: Real> TransitionMatrix<T> {
    pub fn matrix(&self) -> &Matrix<T> {
        &self.0
    }

    pub fn leading(&self, m: usize) -> Self {
        Self(self.0.leading(m))
    }
}

fn check_samples<T: Real>(values: &Matrix<T>) -> Result<usize, SpectralError> {
    let records = values.cols();
    if records < 2 {
        return Err(SpectralError::TooFewObservations(records.saturating_sub(1)));
    }
    Ok(records - 1)
}

/// `Ĝ_{λλ'} = N⁻¹(½ψ_λψ_λ'(X₀) + Σ_{n=1}^{N-1} ψ_λψ_λ'(X_{τ_n}) + ½ψ_λψ_λ'(X_{τ_N}))`.
///
/// `values` holds `ψ_λ(X_{τ_n})` as a `dim × (N+1)` matrix.
pub fn gram_matrix<T: Real>(values: &Matrix<T>) -> Result<GramMatrix<T>, SpectralError> {
    let n = check_samples(values)?;
    let m = values.rows();
    let half = T::of(0.5);
    let inv_n = T::one() / T::of_usize(n);
    let mut g = Matrix::zeros(m, m);
    for i in 0..m {
        let ri = values.row(i);
        for j in 0..=i {
            let rj = values.row(j);
            let mut s = half * (ri[0] * rj[0] + ri[n] * rj[n]);
            for k in 1..n {
                s += ri[k] * rj[k];
            }
            let v = s * inv_n;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(GramMatrix(g))
}

/// `R̂_{λλ'} = (2N)⁻¹ Σ_{n=0}^{N-1} (ψ_λ(X_{n+1})ψ_λ'(X_n) + ψ_λ'(X_{n+1})ψ_λ(X_n))`.
pub fn transition_matrix<T: Real>(values: &Matrix<T>) -> Result<TransitionMatrix<T>, SpectralError> {
    let n = check_samples(values)?;
    let m = values.rows();
    let scale = T::one() / (T::of(2.0) * T::of_usize(n));
    let mut r = Matrix::zeros(m, m);
    for i in 0..m {
        let ri = values.row(i);
        for j in 0..=i {
            let rj = values.row(j);
            let mut s = T::zero();
            for k in 0..n {
                s += ri[k + 1] * rj[k] + rj[k + 1] * ri[k];
            }
            let v = s * scale;
            r[(i, j)] = v;
            r[(j, i)] = v;
        }
    }
    Ok(TransitionMatrix(r))
}

/// All eigenpairs of `A x = λ B x`.
#[derive(Debug, Clone)]
pub struct GsepSolution<T> {
    /// Sorted decreasingly.
    pub eigenvalues: Vec<T>,
    /// Columns are `B`-orthogonal eigenvectors rescaled to unit Euclidean norm.
    pub eigenvectors: Matrix<T>,
    /// Condition number `‖B‖‖B⁻¹‖`.
    pub b_condition: T,
}

impl<T: Real> GsepSolution<T> {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, i: usize) -> Vec<T> {
        self.eigenvectors.column(i)
    }

    /// `max_i ‖A v_i − λ_i B v_i‖ / (‖A‖ + |λ_i|‖B‖)`.
    pub fn relative_residual(&self, a: &Matrix<T>, b: &Matrix<T>) -> T {
        let (na, nb) = (a.spectral_norm(), b.spectral_norm());
        (0..self.dim())
            .map(|i| {
                let v = self.eigenvector(i);
                let lam = self.eigenvalues[i];
                let r: Vec<T> = a
                    .mul_vec(&v)
                    .into_iter()
                    .zip(b.mul_vec(&v))
                    .map(|(x, y)| x - lam * y)
                    .collect();
                norm(&r) / (na + lam.abs() * nb)
            })
            .fold(T::zero(), T::max)
    }
}

fn check_pair<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<usize, SpectralError> {
    for m in [a, b] {
        if !m.is_square() {
            return Err(LinalgError::NotSquare {
                rows: m.rows(),
                cols: m.cols(),
            }
            .into());
        }
    }
    if a.rows() != b.rows() {
        return Err(SpectralError::DimensionMismatch(a.rows(), b.rows()));
    }
    Ok(a.rows())
}

/// Smallest and largest eigenvalue of a symmetric positive definite matrix.
fn spd_extremes<T: Real>(b: &Matrix<T>) -> Result<(T, T), SpectralError> {
    b.cholesky()?;
    let e = symmetric_eigen(b)?;
    let max = e.values[0];
    let min = *e.values.last().expect("non-empty");
    if !(min > T::zero()) {
        return Err(LinalgError::NotPositiveDefinite {
            pivot: e.values.len() - 1,
            value: min.as_f64(),
        }
        .into());
    }
    Ok((min, max))
}

/// Solves the generalized symmetric eigenproblem by Cholesky reduction
/// `B = L Lᵀ`, `C = L⁻¹ A L⁻ᵀ`, `x = L⁻ᵀ y`.
pub fn solve_gsep<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<GsepSolution<T>, SpectralError> {
    let n = check_pair(a, b)?;
    if n == 0 {
        return Ok(GsepSolution {
            eigenvalues: Vec::new(),
            eigenvectors: Matrix::zeros(0, 0),
            b_condition: T::one(),
        });
    }
    let chol = b.cholesky()?;
    let reduced = chol.congruence(a);
    let eig = symmetric_eigen(&reduced)?;
    let mut vectors = Matrix::zeros(n, n);
    for j in 0..n {
        let mut x = chol.solve_upper(&eig.vectors.column(j));
        let len = norm(&x);
        for v in &mut x {
            *v /= len;
        }
        for i in 0..n {
            vectors[(i, j)] = x[i];
        }
    }
    let (bmin, bmax) = spd_extremes(b)?;
    Ok(GsepSolution {
        eigenvalues: eig.values,
        eigenvectors: vectors,
        b_condition: bmax / bmin,
    })
}

/// Estimated `(κ̂₁, û₁)`; `valid == false` encodes the exceptional event
/// with `κ̂ = 0` and `û ≡ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalPair<T> {
    pub kappa: T,
    pub coeffs: CoefficientVector<T>,
    pub valid: bool,
}

impl<T: Real> PrincipalPair<T> {
    pub fn exceptional(dim: usize) -> Self {
        Self {
            kappa: T::zero(),
            coeffs: CoefficientVector::unit(dim.max(1), 0),
            valid: false,
        }
    }
}

pub fn trivial_tolerance<T: Real>() -> T {
    T::of(TRIVIAL_EIGENVALUE_TOL).max(T::epsilon() * T::of(100.0))
}

/// Largest eigenvalue `≤ 1 − tol` with its eigenvector normalised and signed so
/// that `û(b) − û(a) = ∫_a^b û′ > 0`.
pub fn select_principal_pair<T: Real>(sol: &GsepSolution<T>, interval: (T, T)) -> PrincipalPair<T> {
    let dim = sol.dim();
    let threshold = T::one() - trivial_tolerance::<T>();
    let Some(idx) = sol.eigenvalues.iter().position(|&l| l <= threshold) else {
        return PrincipalPair::exceptional(dim);
    };
    let kappa = sol.eigenvalues[idx];
    if !(kappa > T::zero()) {
        return PrincipalPair::exceptional(dim);
    }
    let mut coeffs = sol.eigenvector(idx);
    let len = norm(&coeffs);
    let (a, b) = interval;
    let rise: T = coeffs
        .iter()
        .enumerate()
        .map(|(j, &c)| c * (cosine_value(j, b) - cosine_value(j, a)))
        .sum();
    let sign = if rise < T::zero() { -T::one() } else { T::one() };
    for c in &mut coeffs {
        *c = *c * sign / len;
    }
    PrincipalPair {
        kappa,
        coeffs: CoefficientVector(coeffs),
        valid: true,
    }
}

/// Solves `(R̂, Ĝ)` and selects the principal pair, mapping a non-positive-definite
/// Gram matrix to the exceptional pair.
pub fn principal_pair<T: Real>(
    transition: &TransitionMatrix<T>,
    gram: &GramMatrix<T>,
    interval: (T, T),
) -> PrincipalPair<T> {
    match solve_gsep(&transition.0, &gram.0) {
        Ok(sol) => select_principal_pair(&sol, interval),
        Err(_) => PrincipalPair::exceptional(gram.0.rows()),
    }
}

/// Quantities of the a posteriori residual bound for an approximate eigenpair.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualBounds<T> {
    /// `‖B⁻¹‖‖r‖`
    pub eigenvalue_bound: T,
    /// `2√(2κ(B))/δ · ‖B⁻¹‖‖r‖`
    pub eigenvector_bound: T,
    pub residual_norm: T,
    /// Index of the exact eigenvalue closest to the approximate one.
    pub nearest_index: usize,
    /// `min_{j≠i} |λ_j − λ̃|` over the exact spectrum.
    pub localizing_distance: T,
}

/// Residual `r = (A−Ã)x̃ + λ̃(B̃−B)x̃` of the approximate pair `(λ̃, x̃)` and the
/// resulting bounds against the exact problem `(A, B)`.
pub fn residual_bounds<T: Real>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    a_tilde: &Matrix<T>,
    b_tilde: &Matrix<T>,
    lambda_tilde: T,
    x_tilde: &[T],
) -> Result<ResidualBounds<T>, SpectralError> {
    let n = check_pair(a, b)?;
    check_pair(a_tilde, b_tilde)?;
    if a_tilde.rows() != n || x_tilde.len() != n {
        return Err(SpectralError::DimensionMismatch(n, x_tilde.len()));
    }
    let da = a.sub(a_tilde).mul_vec(x_tilde);
    let db = b_tilde.sub(b).mul_vec(x_tilde);
    let r: Vec<T> = da.iter().zip(&db).map(|(&p, &q)| p + lambda_tilde * q).collect();
    let residual_norm = norm(&r);
    let (bmin, bmax) = spd_extremes(b)?;
    let b_inv = T::one() / bmin;
    let eigenvalue_bound = b_inv * residual_norm;

    let exact = solve_gsep(a, b)?;
    let nearest_index = exact
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|(_, x), (_, y)| {
            (**x - lambda_tilde)
                .abs()
                .partial_cmp(&(**y - lambda_tilde).abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .map(|(i, _)| i)
        .unwrap_or(0);
    let localizing_distance = exact
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != nearest_index)
        .map(|(_, &l)| (l - lambda_tilde).abs())
        .fold(T::infinity(), T::min);
    let cond = bmax / bmin;
    let eigenvector_bound = if residual_norm == T::zero() {
        T::zero()
    } else {
        T::of(2.0) * (T::of(2.0) * cond).sqrt() / localizing_distance * eigenvalue_bound
    };
    Ok(ResidualBounds {
        eigenvalue_bound,
        eigenvector_bound,
        residual_norm,
        nearest_index,
        localizing_distance,
    })
}

/// Per-index Weyl-type bounds for the ordered eigenvalues of `(A, B)` and `(Ã, B̃)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylBounds<T> {
    pub exact: Vec<T>,
    pub approximate: Vec<T>,
    /// `‖B̃⁻¹‖ ‖ΔA − λ_i ΔB‖`
    pub with_exact: Vec<T>,
    /// `‖B⁻¹‖ ‖ΔA − λ̃_i ΔB‖`
    pub with_approximate: Vec<T>,
}

impl<T: Real> WeylBounds<T> {
    /// `|λ_i − λ̃_i|` for every index.
    pub fn differences(&self) -> Vec<T> {
        self.exact
            .iter()
            .zip(&self.approximate)
            .map(|(&x, &y)| (x - y).abs())
            .collect()
    }

    /// Largest `|λ_i − λ̃_i| − min(bounds)`; non-positive when both bounds hold.
    pub fn worst_violation(&self) -> T {
        self.differences()
            .into_iter()
            .zip(self.with_exact.iter().zip(&self.with_approximate))
            .map(|(d, (&p, &q))| d - p.min(q))
            .fold(T::neg_infinity(), T::max)
    }
}

pub fn weyl_bound<T: Real>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    a_tilde: &Matrix<T>,
    b_tilde: &Matrix<T>,
) -> Result<WeylBounds<T>, SpectralError> {
    let n = check_pair(a, b)?;
    let nt = check_pair(a_tilde, b_tilde)?;
    if n != nt {
        return Err(SpectralError::DimensionMismatch(n, nt));
    }
    let exact = solve_gsep(a, b)?;
    let approx = solve_gsep(a_tilde, b_tilde)?;
    let b_inv = T::one() / spd_extremes(b)?.0;
    let bt_inv = T::one() / spd_extremes(b_tilde)?.0;
    let delta_a = a.sub(a_tilde);
    let delta_b = b.sub(b_tilde);
    let shifted = |lam: T| delta_a.sub(&delta_b.scaled(lam)).spectral_norm();
    let with_exact = exact.eigenvalues.iter().map(|&l| bt_inv * shifted(l)).collect();
    let with_approximate = approx.eigenvalues.iter().map(|&l| b_inv * shifted(l)).collect();
    Ok(WeylBounds {
        exact: exact.eigenvalues,
        approximate: approx.eigenvalues,
        with_exact,
        with_approximate,
    })
}

/// `Ĝ` and `R̂` for the largest candidate dimension; smaller nested spaces use
/// leading blocks.
#[derive(Debug, Clone)]
pub struct SpectralMatrices<T> {
    pub gram: GramMatrix<T>,
    pub transition: TransitionMatrix<T>,
}

impl<T: Real> SpectralMatrices<T> {
    pub fn from_values(values: &Matrix<T>) -> Result<Self, SpectralError> {
        Ok(Self {
            gram: gram_matrix(values)?,
            transition: transition_matrix(values)?,
        })
    }

    pub fn max_dim(&self) -> usize {
        self.gram.0.rows()
    }

    pub fn principal_pair(&self, dim: usize, interval: (T, T)) -> PrincipalPair<T> {
        principal_pair(
            &self.transition.leading(dim),
            &self.gram.leading(dim),
            interval,
        )
    }
}
