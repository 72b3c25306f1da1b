//! Reconstruction of a projective connection from geodesic jets.
//!
//! Along any parameterization ẍ^i + Γ^i_{ab}ẋ^aẋ^b = f ẋ^i. With pivot p
//! (the largest velocity component) eliminating f leaves, for each q ≠ p,
//!
//! `ẋ^q Γ^p(ẋ, ẋ) − ẋ^p Γ^q(ẋ, ẋ) = ẋ^p ẍ^q − ẋ^q ẍ^p`,
//!
//! linear in Γ(x₀). The solution is unique up to the projective gauge and is
//! returned in its trace-free representative.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geodesic::{geodesibility_residual, GeodesicFamily, GeodesicJet};
use crate::linalg::{self, sym_index, sym_pairs, Ten3, ZERO3};
use crate::tensor::{trace_free, trace_free_gauge, ChartGrid, ConnectionField};

/// Singular values below this fraction of σ_max are dropped.
pub const RANK_TOL: f64 = 1e-10;
/// Jets closer than this to a node are attributed to it.
pub const SNAP_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct PointSystem {
    pub point: Vec<f64>,
    pub n: usize,
    /// Rows from every jet; unknowns Γ^i_{jk}, j <= k, lexicographic in (i, j, k).
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub pivots: Vec<usize>,
    pub jets: Vec<GeodesicJet>,
}

pub fn unknown_count(n: usize) -> usize {
    n * n * (n + 1) / 2
}

pub fn unknown_index(n: usize, i: usize, j: usize, k: usize) -> usize {
    i * n * (n + 1) / 2 + sym_index(n, j, k)
}

fn pivot(v: &[f64]) -> usize {
    let mut p = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[p].abs() {
            p = i;
        }
    }
    p
}

pub fn assemble_point_system(point: &[f64], jets: &[GeodesicJet]) -> Result<PointSystem> {
    let n = point.len();
    if jets.is_empty() {
        return Err(Error::Insufficient(format!("no jets at {point:?}")));
    }
    let m = unknown_count(n);
    let rows = jets.len() * (n - 1);
    let mut a = DMatrix::zeros(rows, m);
    let mut b = DVector::zeros(rows);
    let mut pivots = Vec::with_capacity(jets.len());
    let mut r = 0;
    for j in jets {
        if j.dim() != n {
            return Err(Error::Dimension("jet dimension differs from the point".into()));
        }
        let off = j.x.iter().zip(point).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if off > SNAP_TOL {
            return Err(Error::InvalidArgument(format!("jet of curve {} is {off:e} away from {point:?}", j.curve_id)));
        }
        let v = &j.v;
        if linalg::max_abs(v.iter().copied()) == 0.0 {
            return Err(Error::InvalidArgument(format!("jet of curve {} has zero velocity", j.curve_id)));
        }
        let p = pivot(v);
        pivots.push(p);
        // c_{jk} with Γ^i(v, v) = Σ_{j<=k} c_{jk} Γ^i_{jk}
        let c: Vec<f64> = sym_pairs(n)
            .into_iter()
            .map(|(s, t)| if s == t { v[s] * v[s] } else { 2.0 * v[s] * v[t] })
            .collect();
        for q in (0..n).filter(|&q| q != p) {
            for (col, cc) in c.iter().enumerate() {
                a[(r, unknown_index(n, p, 0, 0) + col)] += v[q] * cc;
                a[(r, unknown_index(n, q, 0, 0) + col)] -= v[p] * cc;
            }
            b[r] = v[p] * j.a[q] - v[q] * j.a[p];
            r += 1;
        }
    }
    Ok(PointSystem {
        point: point.to_vec(),
        n,
        a,
        b,
        pivots,
        jets: jets.to_vec(),
    })
}

#[derive(Clone, Debug)]
pub struct PointSolution {
    /// Trace-free representative.
    pub gamma: Ten3,
    /// Gauge one-form taking the minimum-norm solution to `gamma`.
    pub gauge: Vec<f64>,
    /// f per jet, for the returned representative.
    pub f: Vec<f64>,
    pub rank: usize,
    pub residual: f64,
}

pub fn solve_connection(sys: &PointSystem) -> Result<PointSolution> {
    let n = sys.n;
    let m = unknown_count(n);
    if sys.jets.len() < 2 {
        return Err(Error::Insufficient(format!("{} jet(s) at {:?}, need at least 2", sys.jets.len(), sys.point)));
    }
    let (x, rank) = linalg::lstsq(&sys.a, &sys.b, RANK_TOL);
    if rank < m - n {
        return Err(Error::Insufficient(format!(
            "rank {rank} < {} at {:?}: family not big enough",
            m - n,
            sys.point
        )));
    }
    let residual = linalg::max_abs((&sys.a * &x - &sys.b).iter().copied());
    let mut g = ZERO3;
    for i in 0..n {
        for (s, t) in sym_pairs(n) {
            let val = x[unknown_index(n, i, s, t)];
            g[i][s][t] = val;
            g[i][t][s] = val;
        }
    }
    let phi = trace_free_gauge(&g, n);
    let gamma = trace_free(&g, n);
    let f = sys
        .jets
        .iter()
        .zip(&sys.pivots)
        .map(|(j, &p)| {
            let q: f64 = (0..n)
                .flat_map(|a| (0..n).map(move |b| (a, b)))
                .map(|(a, b)| gamma[p][a][b] * j.v[a] * j.v[b])
                .sum();
            (j.a[p] + q) / j.v[p]
        })
        .collect();
    Ok(PointSolution {
        gamma,
        gauge: phi[..n].to_vec(),
        f,
        rank,
        residual,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReconVerdict {
    Geodesible,
    NotGeodesible,
    Underdetermined,
}

#[derive(Clone, Debug, Serialize)]
pub struct PointReport {
    pub node: usize,
    pub jets: usize,
    pub rank: usize,
    pub residual: f64,
    pub gauge: Vec<f64>,
    pub f: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReconstructionReport {
    pub tol: f64,
    pub points: Vec<PointReport>,
    /// Nodes where the system was rank deficient beyond the gauge.
    pub underdetermined: Vec<usize>,
    pub max_residual: f64,
    pub geodesibility_residual: f64,
    pub verdict: ReconVerdict,
}

/// Group jets by the grid node they sit on.
pub fn jets_by_node(grid: &ChartGrid, jets: &[GeodesicJet]) -> Result<BTreeMap<usize, Vec<GeodesicJet>>> {
    let n = grid.dim();
    let mut map: BTreeMap<usize, Vec<GeodesicJet>> = BTreeMap::new();
    for j in jets {
        if j.dim() != n {
            return Err(Error::Dimension("jet dimension differs from the grid".into()));
        }
        let mut m = [0usize; 4];
        for k in 0..n {
            let ax = grid.axes()[k];
            let s = ((j.x[k] - ax.lo) / grid.spacing(k)).round();
            if s < 0.0 || s > (ax.count - 1) as f64 {
                return Err(Error::InvalidArgument(format!("jet of curve {} lies outside the grid", j.curve_id)));
            }
            m[k] = s as usize;
        }
        let idx = grid.flat_index(&m[..n]);
        let p = grid.point(idx);
        let off = (0..n).map(|k| (p[k] - j.x[k]).abs()).fold(0.0, f64::max);
        if off > SNAP_TOL * (1.0 + linalg::max_abs(p.iter().copied())) {
            return Err(Error::InvalidArgument(format!(
                "jet of curve {} at {:?} is not on a grid node",
                j.curve_id, j.x
            )));
        }
        map.entry(idx).or_default().push(j.clone());
    }
    Ok(map)
}

/// Reconstruct the trace-free connection at every node of `grid`.
///
/// `tol` bounds the geodesibility residual for the verdict.
pub fn reconstruct(family: &GeodesicFamily, grid: &ChartGrid, tol: f64) -> Result<(ConnectionField, ReconstructionReport)> {
    if family.jets.is_empty() {
        return Err(Error::Insufficient("empty family".into()));
    }
    let n = grid.dim();
    let by_node = jets_by_node(grid, &family.jets)?;
    let results = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let p = grid.point(idx)[..n].to_vec();
            let jets = by_node.get(&idx).map(Vec::as_slice).unwrap_or(&[]);
            let jets: Vec<GeodesicJet> = jets
                .iter()
                .map(|j| GeodesicJet { x: p.clone(), ..j.clone() })
                .collect();
            let sys = assemble_point_system(&p, &jets)?;
            match solve_connection(&sys) {
                Ok(s) => Ok((idx, jets.len(), Some(s))),
                Err(Error::Insufficient(_)) => Ok((idx, jets.len(), None)),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values = Vec::with_capacity(grid.len());
    let mut points = Vec::new();
    let mut under = Vec::new();
    let mut max_res = 0.0f64;
    for (idx, count, sol) in results {
        match sol {
            Some(s) => {
                max_res = max_res.max(s.residual);
                values.push(s.gamma);
                points.push(PointReport {
                    node: idx,
                    jets: count,
                    rank: s.rank,
                    residual: s.residual,
                    gauge: s.gauge,
                    f: s.f,
                });
            }
            None => {
                values.push(ZERO3);
                under.push(idx);
            }
        }
    }
    let field = ConnectionField::sampled(grid.clone(), values)?;
    let geo = geodesibility_residual(&field, &family.jets)?;
    let verdict = if !under.is_empty() {
        ReconVerdict::Underdetermined
    } else if geo > tol || max_res > tol {
        ReconVerdict::NotGeodesible
    } else {
        ReconVerdict::Geodesible
    };
    Ok((
        field,
        ReconstructionReport {
            tol,
            points,
            underdetermined: under,
            max_residual: max_res,
            geodesibility_residual: geo,
            verdict,
        },
    ))
}
