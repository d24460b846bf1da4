//! Cosine approximation spaces `V_J = span{1, √2 cos(jπx) : 1 ≤ j ≤ J}` on `[0, 1]`.

use thiserror::Error;

use crate::linalg::Matrix;
use crate::quadrature::{simpson, uniform_grid};
use crate::scalar::Real;

/// Panels of the Simpson rule used by [`project_function`].
pub const PROJECTION_INTERVALS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("coefficient vector has length {found}, basis has {expected} functions")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("basis dimension must be at least 1")]
    EmptyBasis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    Cosine,
}

/// Approximation space of level `J`; for the cosine basis `dim = J + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub level: usize,
}

impl BasisSpec {
    pub fn cosine(level: usize) -> Self {
        Self {
            kind: BasisKind::Cosine,
            level,
        }
    }

    pub fn from_dim(dim: usize) -> Result<Self, BasisError> {
        if dim == 0 {
            return Err(BasisError::EmptyBasis);
        }
        Ok(Self::cosine(dim - 1))
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            BasisKind::Cosine => self.level + 1,
        }
    }
}

/// Which derivative of the basis functions an expansion is evaluated with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivative {
    Value,
    First,
    Second,
    /// `∫₀ˣ`
    Antiderivative,
}

/// Basis values, first and second derivatives and antiderivatives on a grid.
/// Every matrix is `dim × grid.len()`.
#[derive(Debug, Clone)]
pub struct BasisEval<T> {
    pub grid: Vec<T>,
    pub values: Matrix<T>,
    pub d1: Matrix<T>,
    pub d2: Matrix<T>,
    pub antiderivatives: Matrix<T>,
}

impl<T: Real> BasisEval<T> {
    pub fn dim(&self) -> usize {
        self.values.rows()
    }

    pub fn matrix(&self, order: Derivative) -> &Matrix<T> {
        match order {
            Derivative::Value => &self.values,
            Derivative::First => &self.d1,
            Derivative::Second => &self.d2,
            Derivative::Antiderivative => &self.antiderivatives,
        }
    }
}

/// Expansion coefficients with respect to an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector<T>(pub Vec<T>);

impl<T: Real> CoefficientVector<T> {
    pub fn unit(dim: usize, index: usize) -> Self {
        let mut c = vec![T::zero(); dim];
        c[index] = T::one();
        Self(c)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Euclidean norm, equal to the `L²([0,1])` norm of the expansion.
    pub fn norm(&self) -> T {
        crate::linalg::norm(&self.0)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }
}

#[inline]
fn frequency<T: Real>(j: usize) -> T {
    T::of_usize(j) * T::pi()
}

/// `ψ_j(x)`.
#[inline]
pub fn cosine_value<T: Real>(j: usize, x: T) -> T {
    if j == 0 {
        T::one()
    } else {
        T::sqrt2() * (frequency::<T>(j) * x).cos()
    }
}

/// Values only (`dim × points`); the hot path for Gram and transition matrices.
pub fn basis_values<T: Real>(spec: BasisSpec, points: &[T]) -> Matrix<T> {
    let m = spec.dim();
    let mut out = Matrix::zeros(m, points.len());
    for (k, &x) in points.iter().enumerate() {
        for j in 0..m {
            out[(j, k)] = cosine_value(j, x);
        }
    }
    out
}

/// Evaluates the basis with its derivatives and antiderivatives on `grid`.
pub fn eval_basis<T: Real>(spec: BasisSpec, grid: &[T]) -> BasisEval<T> {
    let m = spec.dim();
    let n = grid.len();
    let mut values = Matrix::zeros(m, n);
    let mut d1 = Matrix::zeros(m, n);
    let mut d2 = Matrix::zeros(m, n);
    let mut anti = Matrix::zeros(m, n);
    let s2 = T::sqrt2();
    for (k, &x) in grid.iter().enumerate() {
        values[(0, k)] = T::one();
        anti[(0, k)] = x;
        for j in 1..m {
            let w = frequency::<T>(j);
            let (sin, cos) = (w * x).sin_cos();
            values[(j, k)] = s2 * cos;
            d1[(j, k)] = -s2 * w * sin;
            d2[(j, k)] = -w * w * s2 * cos;
            anti[(j, k)] = s2 * sin / w;
        }
    }
    BasisEval {
        grid: grid.to_vec(),
        values,
        d1,
        d2,
        antiderivatives: anti,
    }
}

/// `L²` coefficients `∫₀¹ f ψ_j` by composite Simpson on 10⁴ + 1 points.
pub fn project_function<T: Real, F: Fn(T) -> T>(f: F, spec: BasisSpec) -> CoefficientVector<T> {
    let grid = uniform_grid(T::zero(), T::one(), PROJECTION_INTERVALS + 1);
    let h = T::one() / T::of_usize(PROJECTION_INTERVALS);
    let fx: Vec<T> = grid.iter().map(|&x| f(x)).collect();
    let mut integrand = vec![T::zero(); grid.len()];
    let coeffs = (0..spec.dim())
        .map(|j| {
            for ((slot, &x), &v) in integrand.iter_mut().zip(&grid).zip(&fx) {
                *slot = v * cosine_value(j, x);
            }
            simpson(&integrand, h)
        })
        .collect();
    CoefficientVector(coeffs)
}

/// `Σ_j c_j ψ_j^{(order)}` at every grid point of `eval`.
pub fn evaluate_expansion<T: Real>(
    coeffs: &CoefficientVector<T>,
    eval: &BasisEval<T>,
    order: Derivative,
) -> Result<Vec<T>, BasisError> {
    let mat = eval.matrix(order);
    if coeffs.len() != mat.rows() {
        return Err(BasisError::DimensionMismatch {
            expected: mat.rows(),
            found: coeffs.len(),
        });
    }
    let n = mat.cols();
    let mut out = vec![T::zero(); n];
    for (j, &c) in coeffs.0.iter().enumerate() {
        if c == T::zero() {
            continue;
        }
        for (o, &v) in out.iter_mut().zip(mat.row(j)) {
            *o += c * v;
        }
    }
    Ok(out)
}
