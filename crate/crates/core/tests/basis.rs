use proptest::prelude::*;

use reflected_spectral::basis::{
    basis_values, eval_basis, evaluate_expansion, project_function, BasisSpec, CoefficientVector, Derivative,
};
use reflected_spectral::quadrature::{cumulative_simpson, simpson, uniform_grid};

#[test]
fn orthonormal_up_to_level_32() {
    let n = 10_001;
    let grid = uniform_grid(0.0, 1.0, n);
    let h = 1.0 / (n - 1) as f64;
    let v = basis_values(BasisSpec::cosine(32), &grid);
    let mut worst = 0.0f64;
    for i in 0..v.rows() {
        for j in 0..=i {
            let prod: Vec<f64> = v.row(i).iter().zip(v.row(j)).map(|(a, b)| a * b).collect();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((simpson(&prod, h) - target).abs());
        }
    }
    assert!(worst < 1e-10, "orthonormality defect {worst}");
}

#[test]
fn sum_of_squares_bounded_by_twice_the_dimension() {
    let grid = uniform_grid(0.0, 1.0, 2001);
    for level in [0, 1, 4, 10, 32] {
        let spec = BasisSpec::cosine(level);
        let v = basis_values(spec, &grid);
        let sup = (0..grid.len())
            .map(|k| (0..v.rows()).map(|j| v[(j, k)] * v[(j, k)]).sum::<f64>())
            .fold(0.0, f64::max);
        assert!(sup <= 2.0 * spec.dim() as f64, "level {level}: {sup}");
    }
}

fn five_point_d1(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

fn five_point_d2(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x - 2.0 * h) + 16.0 * f(x - h) - 30.0 * f(x) + 16.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h * h)
}

#[test]
fn derivatives_and_antiderivatives_match_numerics() {
    let spec = BasisSpec::cosine(7);
    let grid = uniform_grid(0.0, 1.0, 1001);
    let e = eval_basis(spec, &grid);
    let h = 1e-3;
    for j in 0..spec.dim() {
        let f = |x: f64| reflected_spectral::basis::cosine_value(j, x);
        for (k, &x) in grid.iter().enumerate() {
            assert!((five_point_d1(f, x, h) - e.d1[(j, k)]).abs() < 1e-5, "d1 j={j} x={x}");
            assert!((five_point_d2(f, x, h) - e.d2[(j, k)]).abs() < 1e-5, "d2 j={j} x={x}");
        }
        let cum = cumulative_simpson(e.values.row(j), 1e-3);
        for (k, c) in cum.iter().enumerate() {
            assert!((c - e.antiderivatives[(j, k)]).abs() < 1e-5, "antiderivative j={j}");
        }
    }
}

#[test]
fn constant_reproduction() {
    let spec = BasisSpec::cosine(6);
    let grid = uniform_grid(0.0, 1.0, 101);
    let e = eval_basis(spec, &grid);
    for c in [0.0f64, 1.0, -2.5, 0.4] {
        let coeffs = project_function(|_| c, spec);
        let back = evaluate_expansion(&coeffs, &e, Derivative::Value).unwrap();
        assert!(back.iter().all(|&v| (v - c).abs() < 1e-13), "c={c}");
    }
}

#[test]
fn antiderivative_of_psi1_vanishes_at_one() {
    let e = eval_basis(BasisSpec::cosine(1), &[1.0f64]);
    let v = evaluate_expansion(&CoefficientVector::unit(2, 1), &e, Derivative::Antiderivative).unwrap();
    assert!(v[0].abs() < 1e-15);
}

proptest! {
    #[test]
    fn bernstein_inequality(level in 1usize..12, raw in prop::collection::vec(-1.0f64..1.0, 12)) {
        let spec = BasisSpec::cosine(level);
        let c: Vec<f64> = raw[..spec.dim()].to_vec();
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-6);
        let coeffs = CoefficientVector(c.iter().map(|v| v / norm).collect());
        let n = 4001;
        let grid = uniform_grid(0.0, 1.0, n);
        let e = eval_basis(spec, &grid);
        let d = evaluate_expansion(&coeffs, &e, Derivative::First).unwrap();
        let sq: Vec<f64> = d.iter().map(|v| v * v).collect();
        let dnorm = simpson(&sq, 1.0 / (n - 1) as f64).sqrt();
        prop_assert!(dnorm <= level as f64 * std::f64::consts::PI * (1.0 + 1e-9));
    }

    #[test]
    fn coefficient_norm_is_l2_norm(raw in prop::collection::vec(-2.0f64..2.0, 1..9)) {
        let spec = BasisSpec::from_dim(raw.len()).unwrap();
        let coeffs = CoefficientVector(raw);
        let n = 2001;
        let grid = uniform_grid(0.0, 1.0, n);
        let e = eval_basis(spec, &grid);
        let v = evaluate_expansion(&coeffs, &e, Derivative::Value).unwrap();
        let sq: Vec<f64> = v.iter().map(|x| x * x).collect();
        let l2 = simpson(&sq, 1.0 / (n - 1) as f64).sqrt();
        prop_assert!((l2 - coeffs.norm()).abs() < 1e-9);
    }
}
