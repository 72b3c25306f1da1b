//! Shared inputs for the benchmarks.

use geoequiv::geodesic::GeodesicJet;
use geoequiv::linalg::Ten3;

/// Exact jets of `count` curves through the origin for a constant connection,
/// with deterministic directions and parameter speeds.
pub fn jets_through_origin(gamma: &Ten3, n: usize, count: usize) -> Vec<GeodesicJet> {
    (0..count)
        .map(|k| {
            let v: Vec<f64> = (0..n).map(|i| (((k * n + i + 1) as f64).powi(2) * 0.731).sin()).collect();
            let f = 0.3 * (k as f64).cos();
            let a = (0..n)
                .map(|i| {
                    let mut q = 0.0;
                    for p in 0..n {
                        for r in 0..n {
                            q += gamma[i][p][r] * v[p] * v[r];
                        }
                    }
                    f * v[i] - q
                })
                .collect();
            GeodesicJet {
                curve_id: k,
                t: 0.0,
                x: vec![0.0; n],
                v,
                a,
            }
        })
        .collect()
}

/// A fixed symmetric connection with small, distinct entries.
pub fn sample_connection(n: usize) -> Ten3 {
    let mut g = [[[0.0; 4]; 4]; 4];
    for i in 0..n {
        for j in 0..n {
            for k in j..n {
                let v = ((i * 16 + j * 4 + k) as f64 * 0.71).sin() * 0.2;
                g[i][j][k] = v;
                g[i][k][j] = v;
            }
        }
    }
    g
}
