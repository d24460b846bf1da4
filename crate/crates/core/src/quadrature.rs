//! Composite Newton-Cotes rules on uniform grids.

use crate::scalar::Real;

/// Uniform grid of `n` points spanning `[a, b]` (both ends included).
pub fn uniform_grid<T: Real>(a: T, b: T, n: usize) -> Vec<T> {
    assert!(n >= 2, "a uniform grid needs at least two points");
    let h = (b - a) / T::of_usize(n - 1);
    (0..n)
        .map(|i| if i == n - 1 { b } else { a + h * T::of_usize(i) })
        .collect()
}

/// Composite Simpson rule for samples `values` on a uniform grid with spacing `h`.
///
/// An even number of samples (odd interval count) closes with Simpson's 3/8 rule
/// on the last three intervals; two samples fall back to the trapezoid.
pub fn simpson<T: Real>(values: &[T], h: T) -> T {
    let n = values.len();
    match n {
        0 | 1 => T::zero(),
        2 => h * (values[0] + values[1]) / T::of(2.0),
        3 => h / T::of(3.0) * (values[0] + T::of(4.0) * values[1] + values[2]),
        4 => three_eighths(&values[0..4], h),
        _ => {
            let intervals = n - 1;
            if intervals % 2 == 0 {
                simpson_even(values, h)
            } else {
                simpson_even(&values[..n - 3], h) + three_eighths(&values[n - 4..], h)
            }
        }
    }
}

fn simpson_even<T: Real>(values: &[T], h: T) -> T {
    let n = values.len();
    debug_assert!(n % 2 == 1);
    let mut odd = T::zero();
    let mut even = T::zero();
    for i in 1..n - 1 {
        if i % 2 == 1 {
            odd += values[i];
        } else {
            even += values[i];
        }
    }
    h / T::of(3.0) * (values[0] + values[n - 1] + T::of(4.0) * odd + T::of(2.0) * even)
}

fn three_eighths<T: Real>(v: &[T], h: T) -> T {
    T::of(3.0) * h / T::of(8.0) * (v[0] + T::of(3.0) * v[1] + T::of(3.0) * v[2] + v[3])
}

/// Running integral `∫_{x_0}^{x_i}` at every grid point.
///
/// Even nodes use composite Simpson; odd nodes add the third-order
/// half-panel rule `h/12 (5f_0 + 8f_1 - f_2)` to the preceding even node.
pub fn cumulative_simpson<T: Real>(values: &[T], h: T) -> Vec<T> {
    let n = values.len();
    let mut out = vec![T::zero(); n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        out[1] = h * (values[0] + values[1]) / T::of(2.0);
        return out;
    }
    let twelfth = h / T::of(12.0);
    let third = h / T::of(3.0);
    let mut i = 0;
    while i + 2 < n {
        let (f0, f1, f2) = (values[i], values[i + 1], values[i + 2]);
        out[i + 1] = out[i] + twelfth * (T::of(5.0) * f0 + T::of(8.0) * f1 - f2);
        out[i + 2] = out[i] + third * (f0 + T::of(4.0) * f1 + f2);
        i += 2;
    }
    if i + 1 < n {
        // last odd node: mirror the half-panel rule backwards from the end
        let (fm, f0, f1) = (values[i - 1], values[i], values[i + 1]);
        out[i + 1] = out[i] + twelfth * (T::of(5.0) * f1 + T::of(8.0) * f0 - fm);
    }
    out
}

/// Composite Simpson integral of `f` over `[a, b]` with `intervals` panels (rounded up to even).
pub fn integrate<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, intervals: usize) -> T {
    let intervals = (intervals.max(2) + 1) & !1;
    let grid = uniform_grid(a, b, intervals + 1);
    let values: Vec<T> = grid.iter().map(|&x| f(x)).collect();
    simpson(&values, (b - a) / T::of_usize(intervals))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_exact_on_cubics() {
        for n in [3usize, 4, 5, 6, 11, 12] {
            let grid = uniform_grid(0.0, 2.0, n);
            let vals: Vec<f64> = grid.iter().map(|x| x * x * x - x + 1.0).collect();
            let h = 2.0 / (n - 1) as f64;
            assert!((simpson(&vals, h) - 4.0).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn cumulative_matches_closed_form() {
        let n = 101;
        let grid: Vec<f64> = uniform_grid(0.0, 1.0, n);
        let vals: Vec<f64> = grid.iter().map(|x| (3.0 * x).cos()).collect();
        let cum = cumulative_simpson(&vals, 0.01);
        for (x, c) in grid.iter().zip(&cum) {
            assert!((c - (3.0 * x).sin() / 3.0).abs() < 1e-8);
        }
        let even = &vals[..100];
        let cum = cumulative_simpson(even, 0.01);
        assert!((cum[99] - (3.0 * 0.99f64).sin() / 3.0).abs() < 1e-8);
    }

    #[test]
    fn integrate_smooth() {
        let v = integrate(|x: f64| x.exp(), 0.0, 1.0, 1000);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-12);
    }
}
