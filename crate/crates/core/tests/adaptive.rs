use proptest::prelude::*;

use reflected_spectral::adaptive::{select_index, ThresholdScaling};
use reflected_spectral::harness::l2_distance_curves;
use reflected_spectral::linalg::Matrix;
use reflected_spectral::{
    lepski_select, simulate_observations, stochastic_threshold, EstimatorConfig, InitialCondition, LepskiConfig,
    Model, Scheme,
};

#[test]
fn thresholds_grow_with_dimension_and_shrink_with_sample_size() {
    for scaling in [ThresholdScaling::Level, ThresholdScaling::DimensionCubed] {
        let mut cfg = LepskiConfig::<f64>::new(20_000);
        cfg.scaling = scaling;
        let by_dim: Vec<f64> = (1..=16).map(|m| stochastic_threshold(&cfg, m).unwrap()).collect();
        assert!(by_dim.windows(2).all(|w| w[1] > w[0]), "{scaling:?}");
        let by_n: Vec<f64> = [16, 100, 1_000, 4_000, 20_000, 1_000_000]
            .iter()
            .map(|&n| {
                cfg.sample_size = n;
                stochastic_threshold(&cfg, 5).unwrap()
            })
            .collect();
        assert!(by_n.windows(2).all(|w| w[1] < w[0]), "{scaling:?}: {by_n:?}");
    }
}

#[test]
fn selection_replays_from_reported_distances() {
    let m = Model::mean_reverting_quadratic();
    for (scheme, seed) in [(Scheme::deterministic(0.25), 1), (Scheme::exponential(0.25), 2)] {
        let obs = simulate_observations(&m, &scheme, 8_000, 1e-3, seed, InitialCondition::Stationary).unwrap();
        let mut cfg = LepskiConfig::new(8_000);
        cfg.dims = (2..=10).collect();
        let res = lepski_select(&obs, &cfg, &EstimatorConfig::default()).unwrap();
        let (idx, fallback) = select_index(&res.distances, &res.thresholds);
        assert_eq!(res.dims[idx], res.chosen_dim);
        assert_eq!(res.fallback, fallback);
        assert_eq!(res.curve.dim, res.chosen_dim);
        for j in idx + 1..res.dims.len() {
            assert!(res.distances[(j, idx)] <= res.thresholds[j]);
        }
        // Distances are symmetric and vanish on the diagonal.
        for i in 0..res.dims.len() {
            assert_eq!(res.distances[(i, i)], 0.0);
            for j in 0..i {
                assert_eq!(res.distances[(i, j)], res.distances[(j, i)]);
            }
        }
        assert_eq!(l2_distance_curves(&res.curve, &res.curve).unwrap(), 0.0);
    }
}

#[test]
fn zero_lambda_requires_exact_agreement() {
    let m = Model::mean_reverting_quadratic();
    let obs = simulate_observations(&m, &Scheme::uniform(0.25), 4_000, 1e-3, 5, InitialCondition::Stationary).unwrap();
    let mut cfg = LepskiConfig::new(4_000);
    cfg.lambda = 0.0;
    cfg.dims = vec![2, 3, 4, 5];
    let res = lepski_select(&obs, &cfg, &EstimatorConfig::default()).unwrap();
    let idx = res.dims.iter().position(|&d| d == res.chosen_dim).unwrap();
    for j in idx + 1..res.dims.len() {
        assert_eq!(res.distances[(j, idx)], 0.0);
    }
    for i in 0..idx {
        assert!((i + 1..res.dims.len()).any(|j| res.distances[(j, i)] > 0.0));
    }
}

fn symmetric_distances(raw: &[f64], k: usize) -> Matrix<f64> {
    let mut d = Matrix::zeros(k, k);
    let mut it = raw.iter();
    for i in 0..k {
        for j in 0..i {
            let v = *it.next().unwrap();
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

proptest! {
    #[test]
    fn dropping_large_candidates_never_raises_the_choice(
        k in 2usize..10,
        raw in prop::collection::vec(0.0f64..1.0, 45),
        thr in prop::collection::vec(0.0f64..1.0, 10),
    ) {
        let d = symmetric_distances(&raw, k);
        let (full, _) = select_index(&d, &thr[..k]);
        for kk in 1..=k {
            let sub = d.leading(kk);
            let (part, _) = select_index(&sub, &thr[..kk]);
            prop_assert!(part <= full.max(kk - 1));
            if kk > full {
                prop_assert!(part <= full);
            }
        }
    }

    #[test]
    fn larger_thresholds_never_raise_the_choice(
        k in 2usize..10,
        raw in prop::collection::vec(0.0f64..1.0, 45),
        thr in prop::collection::vec(0.0f64..1.0, 10),
        bump in 0.0f64..0.5,
    ) {
        let d = symmetric_distances(&raw, k);
        let (base, _) = select_index(&d, &thr[..k]);
        let looser: Vec<f64> = thr[..k].iter().map(|t| t + bump).collect();
        let (loose, _) = select_index(&d, &looser);
        prop_assert!(loose <= base);
    }
}
