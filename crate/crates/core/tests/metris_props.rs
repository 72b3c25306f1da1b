mod common;

use std::sync::Arc;

use common::*;
use geoequiv::expr::Params;
use geoequiv::fixtures::{self, chart};
use geoequiv::linalg::Mat4;
use geoequiv::metris::{
    east_at, is_geodesically_equivalent, liouville_at, metrisability_residual, sigma_at, MetricSigma, SigmaField,
};
use geoequiv::tensor::{christoffel, gauge_values, ExprMetric, MetricField, MetricModel};
use proptest::prelude::*;
use rand::Rng;

fn random_sigma(r: &mut rand_chacha::ChaCha8Rng, n: usize) -> (Mat4, [Mat4; 4]) {
    (random_sym(r, n), [0; 4].map(|_| random_sym(r, n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn east_is_linear_in_sigma(seed in any::<u64>(), n in 2usize..=4, c in -10.0f64..10.0) {
        let mut r = rng(seed);
        let g = random_sym3(&mut r, n);
        let (s, ds) = random_sigma(&mut r, n);
        let e0 = east_at(&g, &s, &ds, n);
        let e1 = east_at(&g, &s.map(|row| row.map(|v| c * v)), &ds.map(|m| m.map(|row| row.map(|v| c * v))), n);
        prop_assert!(diff3(&e1, &e0.map(|a| a.map(|b| b.map(|v| c * v)))) <= 1e-12 * (1.0 + c.abs()));
    }

    #[test]
    fn east_is_gauge_invariant(seed in any::<u64>(), n in 2usize..=4) {
        let mut r = rng(seed);
        let g = random_sym3(&mut r, n);
        let phi = random_vec(&mut r, n);
        let (s, ds) = random_sigma(&mut r, n);
        prop_assert!(diff3(&east_at(&g, &s, &ds, n), &east_at(&gauge_values(&g, &phi, n), &s, &ds, n)) <= 1e-9);
    }

    #[test]
    fn liouville_coefficients_are_exactly_gauge_invariant(seed in any::<u64>()) {
        let mut r = rng(seed);
        let dy = |r: &mut rand_chacha::ChaCha8Rng| r.random_range(-64i32..=64) as f64 / 16.0;
        let mut g = [[[0.0; 4]; 4]; 4];
        for a in 0..2 {
            for b in 0..2 {
                for c in b..2 {
                    g[a][b][c] = dy(&mut r);
                    g[a][c][b] = g[a][b][c];
                }
            }
        }
        let phi = [dy(&mut r), dy(&mut r), 0.0, 0.0];
        prop_assert_eq!(liouville_at(&g), liouville_at(&gauge_values(&g, &phi, 2)));
    }
}

#[test]
fn residual_scales_with_sigma() {
    let (g, gb) = fixtures::aminova_pair(&e("x0"));
    let grid = fixtures::aminova_chart(5).unwrap();
    let gf = MetricField::from_expressions(grid.clone(), &g, &Params::new()).unwrap();
    let gamma = christoffel(&gf).unwrap();
    let bm: Arc<dyn MetricModel> = Arc::new(ExprMetric::new(&gb, &Params::new()).unwrap());
    let at = |c: f64| {
        let s = SigmaField::from_model(grid.clone(), Arc::new(MetricSigma::new(bm.clone(), c))).unwrap();
        metrisability_residual(&gamma, &s).unwrap()
    };
    let base = at(1.0);
    assert!(base > 1e-3);
    for c in [-3.0, 0.25, 7.0] {
        assert!((at(c) - c.abs() * base).abs() <= 1e-12 * base * c.abs());
    }
}

#[test]
fn a_metric_is_equivalent_to_itself_and_its_multiples() {
    let grid = fixtures::sphere_chart(9).unwrap();
    let g = MetricField::from_expressions(grid.clone(), &fixtures::sphere(), &Params::new()).unwrap();
    let g3 = MetricField::from_expressions(grid, &fixtures::sphere().scale(&e("3")), &Params::new()).unwrap();
    assert!(is_geodesically_equivalent(&g, &g, 1e-10).unwrap().equivalent);
    assert!(is_geodesically_equivalent(&g, &g3, 1e-10).unwrap().equivalent);
}

#[test]
fn sampled_dini_pair_within_discretization_tolerance() {
    let (g, gb) = fixtures::dini_pair(&e("exp(x0) + 2"), &e("x0"));
    let grid = chart(&[(0.5, 1.5); 2], 33).unwrap();
    let h = grid.max_spacing();
    let a = MetricField::from_expressions(grid.clone(), &g, &Params::new()).unwrap().to_sampled().unwrap();
    let b = MetricField::from_expressions(grid, &gb, &Params::new()).unwrap().to_sampled().unwrap();
    let eq = is_geodesically_equivalent(&a, &b, 50.0 * h * h).unwrap();
    assert!(eq.equivalent, "{eq:?}");
}

#[test]
fn sigma_of_a_diagonal_metric() {
    let g = [[2.0, 0.0, 0.0, 0.0], [0.0, 8.0, 0.0, 0.0], [0.0; 4], [0.0; 4]];
    // |det g|^{1/3} = 16^{1/3}
    let k = 16f64.powf(1.0 / 3.0);
    let s = sigma_at(&g, 2).unwrap();
    assert!((s[0][0] - k / 2.0).abs() < 1e-15 && (s[1][1] - k / 8.0).abs() < 1e-15);
}
