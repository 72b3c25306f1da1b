#![allow(dead_code)]

use geoequiv::expr::{parse, Expr};
use geoequiv::linalg::{Mat4, Ten3, Ten4, Vec4};
use geoequiv::tensor::{gauge_values, ConnJet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn e(s: &str) -> Expr {
    parse(s).unwrap()
}

/// Random torsion-free jet with entries in [-1, 1].
pub fn random_jet(rng: &mut ChaCha8Rng, n: usize) -> ConnJet {
    let mut j = ConnJet::zero(n);
    j.gamma = random_sym3(rng, n);
    for m in 0..n {
        j.dgamma[m] = random_sym3(rng, n);
    }
    j
}

pub fn random_sym3(rng: &mut ChaCha8Rng, n: usize) -> Ten3 {
    let mut t = [[[0.0; 4]; 4]; 4];
    for a in 0..n {
        for b in 0..n {
            for c in b..n {
                let v = rng.random_range(-1.0..1.0);
                t[a][b][c] = v;
                t[a][c][b] = v;
            }
        }
    }
    t
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec4 {
    let mut v = [0.0; 4];
    for x in v.iter_mut().take(n) {
        *x = rng.random_range(-1.0..1.0);
    }
    v
}

pub fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    for a in 0..n {
        for b in a..n {
            m[a][b] = rng.random_range(-1.0..1.0);
            m[b][a] = m[a][b];
        }
    }
    m
}

pub fn gauge_jet(j: &ConnJet, phi: &Vec4, dphi: &[Vec4; 4]) -> ConnJet {
    let mut out = *j;
    out.gamma = gauge_values(&j.gamma, phi, j.n);
    for m in 0..j.n {
        out.dgamma[m] = gauge_values(&j.dgamma[m], &dphi[m], j.n);
    }
    out
}

/// Random polynomial one-form in four variables.
pub fn random_one_form(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<Expr> {
    (0..n)
        .map(|_| {
            let c: Vec<f64> = (0..4).map(|_| rng.random_range(-scale..scale)).collect();
            e(&format!("{} + {}*x1 + {}*x0*x2 + {}*sin(x3)", c[0], c[1], c[2], c[3]))
        })
        .collect()
}

pub fn diff3(a: &Ten3, b: &Ten3) -> f64 {
    a.iter()
        .flatten()
        .flatten()
        .zip(b.iter().flatten().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn diff4(a: &Ten4, b: &Ten4) -> f64 {
    a.iter()
        .flatten()
        .flatten()
        .flatten()
        .zip(b.iter().flatten().flatten().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn diff_mat(a: &Mat4, b: &Mat4) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
