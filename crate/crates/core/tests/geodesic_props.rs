mod common;

use common::*;
use geoequiv::fixtures;
use geoequiv::geodesic::{
    estimate_jets, gamma_vv, geodesic_through, sample_family, worst_subset_condition, Curve, FamilyOptions, JetMode,
};
use geoequiv::tensor::{christoffel, ConnectionField};
use proptest::prelude::*;
use rand::Rng;

fn schwarzschild() -> ConnectionField {
    christoffel(&fixtures::schwarzschild_field(1.0, 5).unwrap()).unwrap()
}

fn targets() -> Vec<Vec<f64>> {
    vec![vec![0.2, 3.5, 1.0, 0.2], vec![0.8, 4.5, 2.0, 0.8], vec![0.5, 4.0, 1.5, 0.5], vec![0.2, 4.5, 1.0, 0.8]]
}

fn unit_direction(seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let d: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
    let norm = d.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
    d.iter().map(|x| x / norm).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn integrated_geodesics_satisfy_the_equation(seed in any::<u64>()) {
        let gamma = schwarzschild();
        let x0 = [0.5, 4.0, 1.5, 0.5];
        let step = 1e-3 * gamma.grid().diameter();
        let c = geodesic_through(&gamma, &x0, &unit_direction(seed), 0.2, step).unwrap();
        prop_assert!(c.len() > 10);
        for k in 2..c.len() - 2 {
            let h = c.t[k + 1] - c.t[k];
            let mut worst = 0.0f64;
            let q = gamma_vv(&gamma, &c.x[k], &c.v[k]).unwrap();
            for i in 0..4 {
                let acc = (8.0 * (c.v[k + 1][i] - c.v[k - 1][i]) - (c.v[k + 2][i] - c.v[k - 2][i])) / (12.0 * h);
                worst = worst.max((acc + q[i]).abs());
            }
            prop_assert!(worst <= 1e-6, "sample {k}: {worst:e}");
        }
    }

    #[test]
    fn jets_are_homogeneous_under_rescaling(seed in any::<u64>(), c in prop_oneof![Just(0.5), Just(2.0), Just(10.0)]) {
        let gamma = schwarzschild();
        let x0 = [0.5, 4.0, 1.5, 0.5];
        let curve = geodesic_through(&gamma, &x0, &unit_direction(seed), 0.05, 5e-3).unwrap();
        let fast = Curve {
            t: curve.t.iter().map(|t| t / c).collect(),
            v: curve.v.iter().map(|v| v.map(|x| x * c)).collect(),
            t0: curve.t0 / c,
            ..curve.clone()
        };
        let j = estimate_jets(&curve, curve.t0).unwrap().rescaled(c);
        let k = estimate_jets(&fast, fast.t0).unwrap();
        for i in 0..4 {
            prop_assert!((j.v[i] - k.v[i]).abs() <= 1e-9 * c);
            prop_assert!((j.a[i] - k.a[i]).abs() <= 1e-7 * c * c);
        }
    }

    #[test]
    fn sampled_directions_are_generic(seed in any::<u64>()) {
        let gamma = schwarzschild();
        let targets = targets();
        let fam = sample_family(&gamma, &targets, &FamilyOptions { seed, ..Default::default() }).unwrap();
        for chunk in fam.jets.chunks(12) {
            let dirs: Vec<[f64; 4]> = chunk
                .iter()
                .map(|j| {
                    let n = j.v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    std::array::from_fn(|i| j.v[i] / n)
                })
                .collect();
            prop_assert!(worst_subset_condition(&dirs, 4) <= 1e6);
        }
    }
}

#[test]
fn fitted_curves_have_increasing_parameters() {
    let gamma = schwarzschild();
    let targets = vec![vec![0.5, 4.0, 1.5, 0.5]];
    let fam = sample_family(
        &gamma,
        &targets,
        &FamilyOptions {
            mode: JetMode::Fit,
            seed: 5,
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(fam.curves.len(), 12);
    for c in &fam.curves {
        assert!(c.t.windows(2).all(|w| w[1] > w[0]));
        assert!(c.v.iter().all(|v| v.iter().map(|x| x.abs()).fold(0.0, f64::max) > 1e-6));
    }
}

#[test]
fn families_are_deterministic_and_ordered() {
    let gamma = schwarzschild();
    let targets = targets();
    let opts = FamilyOptions {
        seed: 11,
        ..Default::default()
    };
    let a = sample_family(&gamma, &targets, &opts).unwrap();
    let b = sample_family(&gamma, &targets, &opts).unwrap();
    assert_eq!(a.jets, b.jets);
    assert!(a.jets.iter().enumerate().all(|(k, j)| j.curve_id == k));
}
