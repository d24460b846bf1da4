use proptest::prelude::*;

use reflected_spectral::quadrature::simpson;
use reflected_spectral::sde_sim::{
    draw_gaps, fold_into_unit, invariant_density_exact, sample_observations, simulate_observations,
    simulate_path, DiffusionModel, InitialCondition, SamplingScheme,
};

fn rbm() -> DiffusionModel<f64> {
    DiffusionModel::reflected_brownian_motion()
}

/// Sawtooth with period 2, reflected at 0 and 1.
fn fold_oracle(x: f64) -> f64 {
    let r = x.rem_euclid(2.0);
    if r > 1.0 {
        2.0 - r
    } else {
        r
    }
}

proptest! {
    #[test]
    fn fold_is_idempotent(x in -10.0f64..10.0) {
        let y = fold_into_unit(x);
        prop_assert!((0.0..=1.0).contains(&y));
        prop_assert_eq!(fold_into_unit(y), y);
        prop_assert!((y - fold_oracle(x)).abs() < 1e-12);
    }
}

#[test]
fn reflected_bm_time_average_is_one_half() {
    let path = simulate_path(&rbm(), 1000.0, 1e-3, 11, InitialCondition::Stationary).unwrap();
    assert_eq!(path.len(), 1_000_001);
    let mean = path.states.iter().sum::<f64>() / path.len() as f64;
    assert!((mean - 0.5).abs() < 0.01, "time average {mean}");
}

#[test]
fn reflected_bm_occupation_is_uniform() {
    let path = simulate_path(&rbm(), 1000.0, 1e-3, 12, InitialCondition::Stationary).unwrap();
    let mut counts = [0usize; 20];
    for &x in &path.states {
        counts[((x * 20.0) as usize).min(19)] += 1;
    }
    let total = path.len() as f64;
    let mut cum = 0.0;
    let mut sup = 0.0f64;
    for (k, &c) in counts.iter().enumerate() {
        cum += c as f64 / total;
        sup = sup.max((cum - (k + 1) as f64 / 20.0).abs());
    }
    assert!(sup < 0.05, "sup deviation of the occupation CDF at bin edges: {sup}");
}

#[test]
fn same_seed_same_path() {
    let m = DiffusionModel::<f64>::mean_reverting_quadratic();
    let a = simulate_path(&m, 50.0, 1e-3, 5, InitialCondition::Stationary).unwrap();
    let b = simulate_path(&m, 50.0, 1e-3, 5, InitialCondition::Stationary).unwrap();
    assert_eq!(a, b);
    let c = simulate_path(&m, 50.0, 1e-3, 6, InitialCondition::Stationary).unwrap();
    assert_ne!(a, c);
}

#[test]
fn streaming_matches_path_then_sample() {
    let m = DiffusionModel::<f64>::mean_reverting_quadratic();
    for scheme in [
        SamplingScheme::deterministic(0.25),
        SamplingScheme::uniform(0.25),
        SamplingScheme::exponential(0.25),
        SamplingScheme::beta(0.25),
    ] {
        let n = 400;
        let total: f64 = draw_gaps(&scheme, n, 9).unwrap().iter().sum();
        let path = simulate_path(&m, total + 1e-3, 1e-3, 9, InitialCondition::Stationary).unwrap();
        let sampled = sample_observations(&path, &scheme, n, 9).unwrap();
        let streamed = simulate_observations(&m, &scheme, n, 1e-3, 9, InitialCondition::Stationary).unwrap();
        assert_eq!(sampled, streamed, "{}", scheme.name());
    }
}

#[test]
fn gap_means_follow_the_law_of_large_numbers() {
    let delta = 0.25;
    let cases = [
        (SamplingScheme::uniform(delta), 2.0 * delta / 12f64.sqrt()),
        (SamplingScheme::exponential(delta), delta),
        // Var Beta(a, a) = 1 / (4 (2a + 1))
        (SamplingScheme::beta(delta), 2.0 * delta * (1.0 / (4.0 * 1.4f64)).sqrt()),
    ];
    for (scheme, sd) in cases {
        for n in [1_000, 100_000] {
            let gaps: Vec<f64> = draw_gaps(&scheme, n, 21).unwrap();
            assert!(gaps.iter().all(|&g| g > 0.0));
            let mean = gaps.iter().sum::<f64>() / n as f64;
            let se = sd / (n as f64).sqrt();
            assert!(
                (mean - delta).abs() < 4.0 * se,
                "{} n={n}: mean {mean}, 4se {}",
                scheme.name(),
                4.0 * se
            );
        }
    }
}

#[test]
fn uniform_gaps_stay_in_range() {
    let gaps: Vec<f64> = draw_gaps(&SamplingScheme::uniform(0.25), 100_000, 3).unwrap();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    assert!((mean - 0.25).abs() < 0.005);
    assert!(gaps.iter().all(|&g| g > 0.0 && g < 0.5));
}

#[test]
fn exponential_gap_mean() {
    let gaps: Vec<f64> = draw_gaps(&SamplingScheme::exponential(0.25), 100_000, 4).unwrap();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    assert!((mean - 0.25).abs() < 0.01);
}

#[test]
fn exponential_total_time() {
    let m = rbm();
    let obs = simulate_observations(&m, &SamplingScheme::exponential(0.25), 20_000, 1e-3, 8, InitialCondition::Stationary)
        .unwrap();
    let total = *obs.times().last().unwrap();
    assert!((total - 5000.0).abs() < 100.0, "total time {total}");
}

#[test]
fn beta_gaps_survive_in_the_observation_set() {
    let m = rbm();
    let scheme = SamplingScheme::beta(0.25);
    let obs = simulate_observations(&m, &scheme, 20_000, 1e-3, 8, InitialCondition::Stationary).unwrap();
    let drawn: Vec<f64> = draw_gaps(&scheme, 20_000, 8).unwrap();
    assert_eq!(obs.gaps(), drawn.as_slice());
    assert!(obs.gaps().iter().all(|&g| g > 0.0));
}

#[test]
fn densities_integrate_to_one() {
    let grid: Vec<f64> = (0..=20_000).map(|i| i as f64 / 20_000.0).collect();
    for model in [
        rbm(),
        DiffusionModel::mean_reverting_quadratic(),
        DiffusionModel::from_polynomials(
            reflected_spectral::sde_sim::Polynomial(vec![1.0]),
            reflected_spectral::sde_sim::Polynomial(vec![1.0]),
            1.0,
            1.0,
        )
        .unwrap(),
    ] {
        let mu = invariant_density_exact(&model, &grid).unwrap();
        let mass = simpson(&mu, 1.0 / 20_000.0);
        assert!((mass - 1.0).abs() < 1e-8, "mass {mass}");
    }
}

#[test]
fn mean_reverting_density_against_fine_quadrature() {
    // μ ∝ σ⁻² exp(∫ 2b/σ²) with σ² = 0.4 − (x − ½)², b = 0.2 − 0.4x.
    let s2 = |x: f64| 0.4 - (x - 0.5) * (x - 0.5);
    let b = |x: f64| 0.2 - 0.4 * x;
    let n = 200_000;
    let h = 1.0 / n as f64;
    let mut expo = vec![0.0; n + 1];
    for i in 0..n {
        let (x0, x1) = (i as f64 * h, (i + 1) as f64 * h);
        let xm = 0.5 * (x0 + x1);
        let g = |x: f64| 2.0 * b(x) / s2(x);
        expo[i + 1] = expo[i] + h / 6.0 * (g(x0) + 4.0 * g(xm) + g(x1));
    }
    let un: Vec<f64> = (0..=n).map(|i| expo[i].exp() / s2(i as f64 * h)).collect();
    let c = simpson(&un, h);
    let grid: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
    let mu = invariant_density_exact(&DiffusionModel::mean_reverting_quadratic(), &grid).unwrap();
    for (k, &x) in grid.iter().enumerate() {
        let exact = un[k * 200] / c;
        assert!((mu[k] - exact).abs() < 1e-9, "x={x}: {} vs {exact}", mu[k]);
    }
    // Symmetric about ½ since b(1 − x) = −b(x) and σ² is symmetric.
    assert!((mu[100] - mu[900]).abs() < 1e-9);
}

#[test]
fn f32_simulation_runs() {
    let m = DiffusionModel::<f32>::reflected_brownian_motion();
    let obs = simulate_observations(&m, &SamplingScheme::uniform(0.25f32), 500, 1e-3, 2, InitialCondition::Stationary)
        .unwrap();
    assert_eq!(obs.num_gaps(), 500);
    assert!(obs.states().iter().all(|&x| (0.0..=1.0).contains(&x)));
}
