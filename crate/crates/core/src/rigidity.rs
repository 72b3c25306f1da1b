//! Pointwise rank test for geodesic rigidity in dimension four.
//!
//! Every metric geodesically equivalent to g has the same projective Weyl
//! tensor, and its inverse g^{ij} solves the homogeneous linear system
//!
//! `n g^{a(i} W^{j)}_{akl} = g^{ab} W^{(i}_{ab[l} δ^{j)}_{k]}`
//!
//! with both brackets expanded without division. Rank 9 at a point leaves a
//! one-dimensional solution space, so any partner is conformal and hence
//! proportional to g.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixtures::rigidity_curvature;
use crate::linalg::{self, sym_pairs, Ten4};
use crate::tensor::{christoffel, curvature, MetricField};

const N: usize = 4;

/// 60 x 10 coefficient matrix at one point.
#[derive(Clone, Debug)]
pub struct RigiditySystem {
    pub point: Vec<f64>,
    /// `(i, j, k, l)` of each row, 0-based, `i <= j`, `k < l`.
    pub rows: Vec<[usize; 4]>,
    /// Unknowns g^{ab}, a <= b, lexicographic.
    pub matrix: DMatrix<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Rigid,
    Inconclusive,
}

/// Projective Weyl tensor of the fixture curvature, indices raised with the identity.
pub fn fixture_weyl() -> Ten4 {
    let r = rigidity_curvature();
    let ric = fixture_ricci(&r);
    curvature::weyl_from(&r, &ric, N)
}

/// `R_{jk} = Σ_a R_{ajka}` with the identity metric.
pub fn fixture_ricci(r: &Ten4) -> linalg::Mat4 {
    curvature::ricci(r, N)
}

/// Coefficients of the equation with free indices (i, j, k, l) on the
/// unknowns g^{ab}, a <= b.
pub fn row_coefficients(w: &Ten4, i: usize, j: usize, k: usize, l: usize) -> Vec<f64> {
    let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let n = N as f64;
    // ordered coefficient of g^{ab}
    let c = |a: usize, b: usize| {
        n * (d(b, i) * w[j][a][k][l] + d(b, j) * w[i][a][k][l])
            - (w[i][a][b][l] * d(j, k) - w[i][a][b][k] * d(j, l) + w[j][a][b][l] * d(i, k)
                - w[j][a][b][k] * d(i, l))
    };
    sym_pairs(N)
        .into_iter()
        .map(|(a, b)| if a == b { c(a, a) } else { c(a, b) + c(b, a) })
        .collect()
}

pub fn assemble_rigidity_system(w: &Ten4, point: &[f64]) -> RigiditySystem {
    let mut rows = Vec::with_capacity(60);
    let mut data = Vec::with_capacity(600);
    for i in 0..N {
        for j in i..N {
            for k in 0..N {
                for l in (k + 1)..N {
                    rows.push([i, j, k, l]);
                    data.extend(row_coefficients(w, i, j, k, l));
                }
            }
        }
    }
    RigiditySystem {
        point: point.to_vec(),
        matrix: DMatrix::from_row_slice(rows.len(), 10, &data),
        rows,
    }
}

/// SVD rank at threshold `tol * σ_max` and the resulting verdict.
pub fn rigidity_rank(system: &RigiditySystem, tol: f64) -> Result<(usize, Verdict)> {
    let rank = linalg::rank(&system.matrix, tol);
    match rank {
        10 => Err(Error::Numerical(format!(
            "rigidity system has full rank 10 at {:?}; the generating metric must solve it",
            system.point
        ))),
        9 => Ok((9, Verdict::Rigid)),
        r => Ok((r, Verdict::Inconclusive)),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PointVerdict {
    pub node: usize,
    pub point: Vec<f64>,
    pub rank: usize,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, Serialize)]
pub struct RigidityScan {
    pub tol: f64,
    pub points: Vec<PointVerdict>,
    pub rigid_fraction: f64,
}

/// Rank test at every node of the metric's grid.
pub fn rigidity_scan(g: &MetricField, tol: f64) -> Result<RigidityScan> {
    if g.dim() != N {
        return Err(Error::Dimension("rigidity test needs n = 4".into()));
    }
    let gamma = christoffel(g)?;
    let grid = g.grid();
    let points = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let w = curvature::projective_weyl_at(&gamma.jet_at_node(idx)?);
            let p = grid.point(idx).to_vec();
            let sys = assemble_rigidity_system(&w, &p);
            let (rank, verdict) = rigidity_rank(&sys, tol)?;
            Ok(PointVerdict {
                node: idx,
                point: p,
                rank,
                verdict,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rigid = points.iter().filter(|p| p.verdict == Verdict::Rigid).count();
    Ok(RigidityScan {
        tol,
        rigid_fraction: rigid as f64 / points.len() as f64,
        points,
    })
}
