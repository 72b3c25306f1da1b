mod common;

use std::sync::{Arc, OnceLock};

use common::*;
use geoequiv::expr::Params;
use geoequiv::fixtures::{self, chart};
use geoequiv::linalg::{self, Mat4};
use geoequiv::metris::{metric_from_sigma, sigma_at, sigma_jet};
use geoequiv::recovery::{
    conformal_nullspace, lambda_at, nondegeneracy_check, recover_metric, Recovery, RecoveryOptions, Stage,
};
use geoequiv::tensor::{
    projective_weyl_at, ConnectionField, ConnectionModel, ExprMetric, ExprOneForm, Gauged, LeviCivita, MetricModel,
};
use proptest::prelude::*;
use rand::Rng;

fn schwarzschild_model() -> Arc<dyn MetricModel> {
    Arc::new(ExprMetric::new(&fixtures::schwarzschild(), &fixtures::schwarzschild_params(1.0)).unwrap())
}

fn small_grid() -> geoequiv::ChartGrid {
    chart(&[(0.0, 1.0), (3.5, 4.5), (1.0, 2.0), (0.0, 1.0)], 5).unwrap()
}

fn recover(gamma: Arc<dyn ConnectionModel>) -> Recovery {
    let field = ConnectionField::from_model(small_grid(), gamma).unwrap();
    recover_metric(&field, &RecoveryOptions::default()).unwrap()
}

/// max |a − k b| / max |a| with k fixed at the center node.
fn up_to_constant(a: &Recovery, b: &Recovery) -> f64 {
    let (ma, mb) = (a.metric.as_ref().unwrap(), b.metric.as_ref().unwrap());
    let c = ma.grid().center_node();
    let k = ma.value_at_node(c).unwrap()[0][0] / mb.value_at_node(c).unwrap()[0][0];
    let mut worst = 0.0f64;
    for i in 0..ma.grid().len() {
        let (x, y) = (ma.value_at_node(i).unwrap(), mb.value_at_node(i).unwrap());
        let s = linalg::max_abs(x.iter().flatten().copied());
        worst = worst.max(diff_mat(&x, &y.map(|r| r.map(|v| k * v))) / s);
    }
    worst
}

fn random_nondegenerate(r: &mut rand_chacha::ChaCha8Rng) -> Mat4 {
    let mut m = random_sym(r, 4);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] += if r.random_bool(0.5) { 3.0 } else { -3.0 };
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn sigma_inversion_round_trip(seed in any::<u64>()) {
        let g = random_nondegenerate(&mut rng(seed));
        let back = metric_from_sigma(&sigma_at(&g, 4).unwrap(), 4).unwrap();
        prop_assert!(diff_mat(&g, &back) <= 1e-10 * linalg::max_abs(g.iter().flatten().copied()));
    }

    #[test]
    fn lambda_is_scale_covariant(seed in any::<u64>(), c in 0.1f64..10.0) {
        // a = e^{−μ} σ(g) with μ = p·x, so dλ = p and e^λ a = σ(g)
        let mut r = rng(seed);
        let x = [r.random_range(0.0..1.0), r.random_range(3.5..4.5), r.random_range(1.0..2.0), r.random_range(0.0..1.0)];
        let p = random_vec(&mut r, 4);
        let m = schwarzschild_model();
        let jet = m.jet1(&x).unwrap();
        let (s, ds) = sigma_jet(&jet, &x).unwrap();
        let gamma = LeviCivita::new(m.clone()).value(&x).unwrap();
        let mu: f64 = (0..4).map(|k| p[k] * x[k]).sum();
        let scaled = |c: f64| {
            let f = c * (-mu).exp();
            let a = s.map(|row| row.map(|v| f * v));
            let da: [Mat4; 4] = std::array::from_fn(|k| std::array::from_fn(|i| std::array::from_fn(|j| f * (ds[k][i][j] - p[k] * s[i][j]))));
            (a, da)
        };
        let (a1, da1) = scaled(1.0);
        let (ac, dac) = scaled(c);
        let (l1, r1) = lambda_at(&gamma, &a1, &da1);
        let (lc, rc) = lambda_at(&gamma, &ac, &dac);
        prop_assert!(r1 <= 1e-10 && rc <= 1e-10);
        for k in 0..4 {
            prop_assert!((l1[k] - p[k]).abs() <= 1e-9);
            prop_assert!((lc[k] - l1[k]).abs() <= 1e-9);
        }
        let g1 = metric_from_sigma(&a1.map(|row| row.map(|v| v * mu.exp())), 4).unwrap();
        let gc = metric_from_sigma(&ac.map(|row| row.map(|v| v * (mu - c.ln()).exp())), 4).unwrap();
        prop_assert!(diff_mat(&g1, &gc) <= 1e-8 * linalg::max_abs(g1.iter().flatten().copied()));
        prop_assert!(diff_mat(&g1, &jet.g) <= 1e-8 * linalg::max_abs(g1.iter().flatten().copied()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn recovery_is_gauge_invariant(seed in any::<u64>()) {
        static BASE: OnceLock<Recovery> = OnceLock::new();
        let lc: Arc<dyn ConnectionModel> = Arc::new(LeviCivita::new(schwarzschild_model()));
        let base = BASE.get_or_init(|| recover(lc.clone()));
        let phi = Arc::new(ExprOneForm::new(random_one_form(&mut rng(seed), 4, 0.3), &Params::new()).unwrap());
        let gauged = recover(Arc::new(Gauged::new(lc, phi).unwrap()));
        prop_assert_eq!(base.report.stage, Stage::Verified);
        prop_assert_eq!(gauged.report.stage, Stage::Verified);
        let d = up_to_constant(base, &gauged);
        prop_assert!(d <= 1e-5, "{d:e}");
    }
}

#[test]
fn flat_connection_stops_at_conformal_stage() {
    let rec = recover_metric(&ConnectionField::flat(small_grid()), &RecoveryOptions::default()).unwrap();
    assert_eq!(rec.report.stage, Stage::Conformal);
    assert!(rec.report.failure.is_some());
    assert!(rec.metric.is_none());
}

#[test]
fn schwarzschild_conformal_class_is_one_dimensional() {
    let lc = LeviCivita::new(schwarzschild_model());
    let w = projective_weyl_at(&lc.jet(&[0.5, 4.0, 1.2, 0.3]).unwrap());
    assert!(nondegeneracy_check(&w));
    assert_eq!(conformal_nullspace(&w).ncols(), 1);
}

#[test]
fn shared_kernel_weyl_is_degenerate() {
    let lc = LeviCivita::new(schwarzschild_model());
    let mut w = projective_weyl_at(&lc.jet(&[0.5, 4.0, 1.2, 0.3]).unwrap());
    // W^a ξ_a = 0 for ξ = dx^0
    w[0] = [[[0.0; 4]; 4]; 4];
    assert!(!nondegeneracy_check(&w));
}

#[test]
fn sampled_recovery_reaches_verified() {
    let g = fixtures::schwarzschild_field(1.0, 7).unwrap();
    let field = geoequiv::tensor::christoffel(&g.to_sampled().unwrap()).unwrap();
    let rec = recover_metric(&field, &RecoveryOptions::default()).unwrap();
    assert_eq!(rec.report.stage, Stage::Verified, "{:?}", rec.report);
    assert!(!rec.report.analytic);
    let (small, gap) = rec.report.singular_ratios.unwrap();
    assert!(small < rec.report.nullspace_tol && gap > 10.0 * rec.report.nullspace_tol);
}

#[test]
fn flrw_class_is_not_recovered_as_ricci_flat() {
    let grid = fixtures::flrw_chart(5).unwrap();
    let g = geoequiv::MetricField::from_expressions(grid, &fixtures::flrw(&e("x0^(2/3)"), 0.0), &Params::new()).unwrap();
    let rec = recover_metric(&geoequiv::tensor::christoffel(&g).unwrap(), &RecoveryOptions::default()).unwrap();
    println!("flrw: {:?}", rec.report);
    assert!(rec.report.stage != Stage::Verified || rec.report.ricci_norm.unwrap() > 1e-4);
}
