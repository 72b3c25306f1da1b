//! Recovery of a Ricci-flat metric from its projective class.
//!
//! For a Ricci-flat metric ḡ the projective Weyl tensor is its Riemann
//! tensor, so ḡ_{ij} solves the linear system expressing the antisymmetry and
//! pair symmetry of ḡ_{ia}W^a_{jkm}. A one-dimensional solution space gives
//! the conformal class a^{ij}; substituting σ = e^λ a into the metrisability
//! equation gives a linear system for dλ, which is checked for closedness and
//! integrated from a base point.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, sym_index, sym_pairs, Mat4, Ten3, Ten4, Vec4};
use crate::metris::{east_at, metric_from_sigma, sigma_at, SigmaField, SigmaModel};
use crate::tensor::{
    christoffel, curvature, fd, projective_weyl_at, ricci, riemann, ChartGrid, ConnectionField, ConnectionModel, FnMetric, LeviCivita,
    MetricField, MetricModel,
};

const N: usize = 4;
const UNKNOWNS: usize = 10;

/// Rows: ḡ_{ia}W^a_{jkm} + ḡ_{ja}W^a_{ikm} = 0 for i <= j, k < m (60), then
/// ḡ_{ia}W^a_{jkm} − ḡ_{ka}W^a_{mij} = 0 for pairs (i < j) < (k < m) (15).
/// Unknowns ḡ_{ij}, i <= j, lexicographic.
pub fn assemble_conformal_system(w: &Ten4) -> DMatrix<f64> {
    let mut rows: Vec<[f64; UNKNOWNS]> = Vec::with_capacity(75);
    // coefficient vector of ḡ_{pa}W^a_{qrs}
    let term = |row: &mut [f64; UNKNOWNS], sign: f64, p: usize, q: usize, r: usize, s: usize| {
        for a in 0..N {
            row[sym_index(N, p, a)] += sign * w[a][q][r][s];
        }
    };
    for (i, j) in sym_pairs(N) {
        for k in 0..N {
            for m in (k + 1)..N {
                let mut row = [0.0; UNKNOWNS];
                term(&mut row, 1.0, i, j, k, m);
                term(&mut row, 1.0, j, i, k, m);
                rows.push(row);
            }
        }
    }
    let pairs: Vec<(usize, usize)> = (0..N).flat_map(|i| ((i + 1)..N).map(move |j| (i, j))).collect();
    for (x, &(i, j)) in pairs.iter().enumerate() {
        for &(k, m) in &pairs[x + 1..] {
            let mut row = [0.0; UNKNOWNS];
            term(&mut row, 1.0, i, j, k, m);
            term(&mut row, -1.0, k, m, i, j);
            rows.push(row);
        }
    }
    DMatrix::from_fn(rows.len(), UNKNOWNS, |r, c| rows[r][c])
}

/// True iff no ξ ≠ 0 has W^a_{jkl} ξ_a = 0 (64 x 4 matrix of full rank).
pub fn nondegeneracy_check(w: &Ten4) -> bool {
    let m = DMatrix::from_fn(64, N, |r, a| w[a][r / 16][(r / 4) % 4][r % 4]);
    let sv = linalg::singular_values(&m);
    sv[0] > 0.0 && sv[N - 1] > 1e-10 * sv[0]
}

/// Relative singular-value threshold for the conformal nullspace.
pub const NULLSPACE_TOL: f64 = 1e-9;
/// The same threshold for finite-difference input, where W carries O(h²) errors.
pub const SAMPLED_NULLSPACE_TOL: f64 = 1e-2;

/// Nullspace basis of the conformal system (columns).
pub fn conformal_nullspace(w: &Ten4) -> DMatrix<f64> {
    conformal_nullspace_with(w, NULLSPACE_TOL)
}

pub fn conformal_nullspace_with(w: &Ten4, rel_tol: f64) -> DMatrix<f64> {
    linalg::null_space(&assemble_conformal_system(w), rel_tol)
}

fn unpack(v: &[f64]) -> Mat4 {
    let mut g = [[0.0; 4]; 4];
    for (c, (i, j)) in sym_pairs(N).into_iter().enumerate() {
        g[i][j] = v[c];
        g[j][i] = v[c];
    }
    g
}

/// Normalized representative ḡ at one point: the nullspace vector scaled so
/// that component `index` equals +1.
pub fn representative(w: &Ten4, index: usize, x: &[f64]) -> Result<Mat4> {
    representative_with(w, index, x, NULLSPACE_TOL)
}

pub fn representative_with(w: &Ten4, index: usize, x: &[f64], rel_tol: f64) -> Result<Mat4> {
    if !nondegeneracy_check(w) {
        return Err(Error::precondition(x, "nondegeneracy check failed (W has a common kernel)"));
    }
    let ns = conformal_nullspace_with(w, rel_tol);
    match ns.ncols() {
        0 => Err(Error::precondition(x, "conformal system has only the zero solution: no Ricci-flat metric in the class")),
        1 => {
            let v: Vec<f64> = ns.column(0).iter().copied().collect();
            if v[index].abs() < 1e-8 * linalg::max_abs(v.iter().copied()) {
                return Err(Error::precondition(x, "normalizing component vanishes"));
            }
            let s = 1.0 / v[index];
            Ok(unpack(&v.iter().map(|c| c * s).collect::<Vec<_>>()))
        }
        d => Err(Error::precondition(x, format!("conformal solution space has dimension {d}; refusing a degenerate class"))),
    }
}

/// Conformal representative a^{ij} = σ(ḡ) as a function of position.
pub struct ConformalModel {
    gamma: Arc<dyn ConnectionModel>,
    index: usize,
    h: f64,
}

impl ConformalModel {
    pub fn new(gamma: Arc<dyn ConnectionModel>, index: usize, h: f64) -> Self {
        ConformalModel { gamma, index, h }
    }

    pub fn metric_at(&self, x: &[f64]) -> Result<Mat4> {
        let w = projective_weyl_at(&self.gamma.jet(x)?);
        representative(&w, self.index, x)
    }

    pub fn value(&self, x: &[f64]) -> Result<Mat4> {
        let g = self.metric_at(x)?;
        sigma_at(&g, N).ok_or_else(|| Error::SingularMetric {
            point: x.to_vec(),
            det: 0.0,
        })
    }
}

impl SigmaModel for ConformalModel {
    fn dim(&self) -> usize {
        N
    }

    fn jet(&self, x: &[f64]) -> Result<(Mat4, [Mat4; 4])> {
        Ok((self.value(x)?, fd::jet1_central(N, x, self.h, |y| self.value(y))?))
    }
}

#[derive(Clone, Debug)]
pub struct ConformalSolveResult {
    pub nullspace_dims: Vec<usize>,
    pub base_node: usize,
    /// Component of ḡ (in `sym_pairs` order) fixed to +1.
    pub norm_index: usize,
    /// Nodes with det ḡ > 0 and < 0.
    pub det_signs: (usize, usize),
    pub nondegenerate: bool,
    /// Over all nodes: largest σ₁₀/σ₁ and smallest σ₉/σ₁ of the conformal system.
    pub singular_ratios: (f64, f64),
    /// Covariant representatives at the nodes.
    pub representatives: Vec<Mat4>,
    pub a: SigmaField,
}

fn weyl_at_node(gamma: &ConnectionField, idx: usize) -> Result<Ten4> {
    Ok(projective_weyl_at(&gamma.jet_at_node(idx)?))
}

/// Solve the conformal system at every node and normalize the representative.
pub fn solve_conformal_class(gamma: &ConnectionField, fd_step: f64, ns_tol: f64) -> Result<ConformalSolveResult> {
    let grid = gamma.grid();
    if gamma.dim() != N {
        return Err(Error::Dimension("recovery needs n = 4".into()));
    }
    let weyl = (0..grid.len())
        .into_par_iter()
        .map(|idx| weyl_at_node(gamma, idx))
        .collect::<Result<Vec<_>>>()?;
    let bad: Vec<usize> = (0..grid.len()).filter(|&i| !nondegeneracy_check(&weyl[i])).collect();
    if let Some(&first) = bad.first() {
        return Err(Error::Precondition {
            point: grid.point(first)[..N].to_vec(),
            message: format!("nondegeneracy check failed at {} of {} nodes", bad.len(), grid.len()),
        });
    }
    let spaces: Vec<DMatrix<f64>> = weyl.par_iter().map(|w| conformal_nullspace_with(w, ns_tol)).collect();
    let singular_ratios = weyl
        .par_iter()
        .map(|w| {
            let sv = linalg::singular_values(&assemble_conformal_system(w));
            (sv[UNKNOWNS - 1] / sv[0], sv[UNKNOWNS - 2] / sv[0])
        })
        .reduce(|| (0.0, f64::INFINITY), |a, b| (a.0.max(b.0), a.1.min(b.1)));
    let dims: Vec<usize> = spaces.iter().map(|s| s.ncols()).collect();
    if let Some(i) = dims.iter().position(|&d| d != 1) {
        let p = grid.point(i)[..N].to_vec();
        return Err(if dims[i] == 0 {
            Error::precondition(&p, "conformal system has only the zero solution: no Ricci-flat metric in the class")
        } else {
            Error::precondition(&p, format!("conformal solution space has dimension {}", dims[i]))
        });
    }
    let base = grid.center_node();
    let bv = spaces[base].column(0);
    let norm_index = (0..UNKNOWNS).fold(0, |m, c| if bv[c].abs() > bv[m].abs() { c } else { m });
    let reps = (0..grid.len())
        .map(|i| representative_with(&weyl[i], norm_index, &grid.point(i)[..N], ns_tol))
        .collect::<Result<Vec<_>>>()?;
    let mut signs = (0, 0);
    for r in &reps {
        let d = linalg::determinant(r, N);
        if d == 0.0 {
            return Err(Error::Numerical("degenerate conformal representative".into()));
        }
        if d > 0.0 {
            signs.0 += 1;
        } else {
            signs.1 += 1;
        }
    }
    let a = match gamma.model() {
        Some(m) => SigmaField::from_model(grid.clone(), Arc::new(ConformalModel::new(m.clone(), norm_index, fd_step)))?,
        None => {
            let vals = reps.iter().map(|g| sigma_at(g, N).expect("nonzero determinant")).collect();
            SigmaField::sampled(grid.clone(), vals)?
        }
    };
    Ok(ConformalSolveResult {
        nullspace_dims: dims,
        base_node: base,
        norm_index,
        det_signs: signs,
        nondegenerate: true,
        singular_ratios,
        representatives: reps,
        a,
    })
}

/// Rows over all (a, b, c) of ∂_aλ a^{bc} − (δ^c_a ∂_iλ a^{ib} + δ^b_a ∂_iλ a^{ic})/(n+1) = −E(a)^{bc}_a.
pub fn lambda_system(gamma: &Ten3, a: &Mat4, da: &[Mat4; 4]) -> (DMatrix<f64>, DVector<f64>) {
    let e = east_at(gamma, a, da, N);
    let f = 1.0 / (N as f64 + 1.0);
    let mut m = DMatrix::zeros(N * N * N, N);
    let mut rhs = DVector::zeros(N * N * N);
    for aa in 0..N {
        for b in 0..N {
            for c in 0..N {
                let r = aa * 16 + b * 4 + c;
                m[(r, aa)] += a[b][c];
                for i in 0..N {
                    if c == aa {
                        m[(r, i)] -= f * a[i][b];
                    }
                    if b == aa {
                        m[(r, i)] -= f * a[i][c];
                    }
                }
                rhs[r] = -e[aa][b][c];
            }
        }
    }
    (m, rhs)
}

/// Least-squares dλ and the max residual at one point.
pub fn lambda_at(gamma: &Ten3, a: &Mat4, da: &[Mat4; 4]) -> (Vec4, f64) {
    let (m, rhs) = lambda_system(gamma, a, da);
    let (x, _) = linalg::lstsq(&m, &rhs, 1e-12);
    let res = linalg::max_abs((&m * &x - &rhs).iter().copied());
    ([x[0], x[1], x[2], x[3]], res)
}

#[derive(Clone, Debug)]
pub struct LambdaGradient {
    pub values: Vec<Vec4>,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

pub fn solve_lambda_gradient(gamma: &ConnectionField, a: &SigmaField) -> Result<LambdaGradient> {
    if gamma.grid() != a.grid() {
        return Err(Error::InvalidArgument("connection and representative live on different grids".into()));
    }
    let out = (0..gamma.grid().len())
        .into_par_iter()
        .map(|idx| {
            let g = gamma.value_at_node(idx)?;
            let (s, ds) = a.jet_at_node(idx)?;
            Ok(lambda_at(&g, &s, &ds))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_residual = out.iter().map(|o| o.1).fold(0.0, f64::max);
    Ok(LambdaGradient {
        values: out.iter().map(|o| o.0).collect(),
        residuals: out.iter().map(|o| o.1).collect(),
        max_residual,
    })
}

/// max |∂_k(dλ)_i − ∂_i(dλ)_k| with grid differences.
pub fn check_closedness(grid: &ChartGrid, dl: &[Vec4]) -> f64 {
    let n = grid.dim();
    let mut worst = 0.0f64;
    for idx in 0..grid.len() {
        let d: Vec<Vec4> = (0..n).map(|k| fd::node_derivative(grid, idx, k, |i| dl[i])).collect();
        for i in 0..n {
            for k in (i + 1)..n {
                worst = worst.max((d[k][i] - d[i][k]).abs());
            }
        }
    }
    worst
}

/// Integrate along axis-ordered grid paths from `base` (axis 0 first).
///
/// `segment(idx, axis)` is the integral from node `idx` to its neighbour one
/// step up along `axis`.
pub fn integrate_lambda_with<F>(grid: &ChartGrid, base: usize, segment: F) -> Result<Vec<f64>>
where
    F: Fn(usize, usize) -> Result<f64> + Sync,
{
    let n = grid.dim();
    let bm = grid.multi_index(base);
    let mut lam = vec![f64::NAN; grid.len()];
    lam[base] = 0.0;
    // nodes reached after finishing axes 0..=k
    let mut frontier = vec![base];
    for k in 0..n {
        let count = grid.axes()[k].count;
        let lines = frontier
            .par_iter()
            .map(|&start| {
                let mut line = vec![(start, 0.0)];
                let stride = grid.stride(k);
                let mut up = Vec::new();
                let mut acc = 0.0;
                let mut idx = start;
                for _ in bm[k]..count - 1 {
                    acc += segment(idx, k)?;
                    idx += stride;
                    up.push((idx, acc));
                }
                let mut down = Vec::new();
                acc = 0.0;
                idx = start;
                for _ in 0..bm[k] {
                    idx -= stride;
                    acc -= segment(idx, k)?;
                    down.push((idx, acc));
                }
                line.extend(up);
                line.extend(down);
                Ok(line)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut next = Vec::new();
        for (line, &start) in lines.iter().zip(&frontier) {
            let l0 = lam[start];
            for &(idx, v) in line.iter().skip(1) {
                lam[idx] = l0 + v;
                next.push(idx);
            }
            next.push(start);
        }
        next.sort_unstable();
        frontier = next;
    }
    Ok(lam)
}

/// Trapezoid integration of sampled dλ; λ(base) = 0.
pub fn integrate_lambda(grid: &ChartGrid, dl: &[Vec4], base: usize) -> Result<Vec<f64>> {
    integrate_lambda_with(grid, base, |idx, k| {
        let j = idx + grid.stride(k);
        Ok(0.5 * grid.spacing(k) * (dl[idx][k] + dl[j][k]))
    })
}

/// Max |∮ dλ| over `count` random rectangular grid loops.
pub fn loop_consistency<F>(grid: &ChartGrid, count: usize, seed: u64, segment: F) -> Result<f64>
where
    F: Fn(usize, usize) -> Result<f64> + Sync,
{
    let n = grid.dim();
    if n < 2 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let loops: Vec<([usize; 4], usize, usize, usize, usize)> = (0..count)
        .map(|_| {
            let k = rng.random_range(0..n);
            let mut l = rng.random_range(0..n - 1);
            if l >= k {
                l += 1;
            }
            let mut m = [0usize; 4];
            for (ax, mi) in m.iter_mut().enumerate().take(n) {
                *mi = rng.random_range(0..grid.axes()[ax].count - 1);
            }
            let wk = rng.random_range(1..grid.axes()[k].count - m[k]);
            let wl = rng.random_range(1..grid.axes()[l].count - m[l]);
            (m, k, l, wk, wl)
        })
        .collect();
    let vals = loops
        .par_iter()
        .map(|&(m, k, l, wk, wl)| {
            let start = grid.flat_index(&m[..n]);
            let (sk, sl) = (grid.stride(k), grid.stride(l));
            let mut s = 0.0;
            for i in 0..wk {
                s += segment(start + i * sk, k)?;
                s -= segment(start + wl * sl + i * sk, k)?;
            }
            for j in 0..wl {
                s += segment(start + wk * sk + j * sl, l)?;
                s -= segment(start + j * sl, l)?;
            }
            Ok(s.abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// Gauss-Legendre nodes and weights on [0, 1] (4 points).
const GL4: [(f64, f64); 4] = [
    (0.069_431_844_202_973_71, 0.173_927_422_568_726_93),
    (0.330_009_478_207_571_9, 0.326_072_577_431_273_07),
    (0.669_990_521_792_428_1, 0.326_072_577_431_273_07),
    (0.930_568_155_797_026_3, 0.173_927_422_568_726_93),
];

/// dλ as a function of position (model mode).
pub struct LambdaModel {
    gamma: Arc<dyn ConnectionModel>,
    a: Arc<ConformalModel>,
}

impl LambdaModel {
    pub fn new(gamma: Arc<dyn ConnectionModel>, a: Arc<ConformalModel>) -> Self {
        LambdaModel { gamma, a }
    }

    pub fn dlambda(&self, x: &[f64]) -> Result<Vec4> {
        let (s, ds) = self.a.jet(x)?;
        Ok(lambda_at(&self.gamma.value(x)?, &s, &ds).0)
    }

    /// ∫ dλ along the straight segment from `p` to `q`.
    pub fn line_integral(&self, p: &[f64], q: &[f64]) -> Result<f64> {
        let mut s = 0.0;
        for (t, w) in GL4 {
            let x: Vec<f64> = (0..N).map(|k| p[k] + t * (q[k] - p[k])).collect();
            let d = self.dlambda(&x)?;
            s += w * (0..N).map(|k| d[k] * (q[k] - p[k])).sum::<f64>();
        }
        Ok(s)
    }

    /// Curl of dλ at x by fourth-order central differences.
    pub fn curl(&self, x: &[f64], h: f64) -> Result<f64> {
        let d = fd::jet1_central(N, x, h, |y| self.dlambda(y))?;
        let mut worst = 0.0f64;
        for i in 0..N {
            for k in (i + 1)..N {
                worst = worst.max((d[k][i] - d[i][k]).abs());
            }
        }
        Ok(worst)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Weyl,
    Conformal,
    LambdaSolve,
    Closedness,
    Integrated,
    Verified,
}

#[derive(Clone, Debug)]
pub struct RecoveryOptions {
    /// Tolerances; `None` picks 1e-6 for models and 50 h² for sampled input.
    pub tol: Option<f64>,
    /// Relative nullspace threshold of the conformal system; `None` picks
    /// [`NULLSPACE_TOL`] for models and [`SAMPLED_NULLSPACE_TOL`] for sampled input.
    pub nullspace_tol: Option<f64>,
    /// Step of the off-grid differences in model mode.
    pub fd_step: f64,
    /// Random loops in the consistency check.
    pub loops: usize,
    /// Per-axis stride of the nodes where off-grid checks (curl, Ricci) run.
    pub check_stride: usize,
    pub seed: u64,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        RecoveryOptions {
            tol: None,
            nullspace_tol: None,
            fd_step: 1e-3,
            loops: 100,
            check_stride: 4,
            seed: 1,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RecoveryReport {
    /// Last stage completed, or the stage that failed when `failure` is set.
    pub stage: Stage,
    pub failure: Option<String>,
    pub analytic: bool,
    pub tol: f64,
    pub base_node: Option<usize>,
    pub norm_index: Option<usize>,
    pub det_signs: Option<(usize, usize)>,
    pub nullspace_tol: f64,
    /// Largest σ₁₀/σ₁ and smallest σ₉/σ₁ of the conformal system over the grid.
    pub singular_ratios: Option<(f64, f64)>,
    pub lambda_residual: Option<f64>,
    pub closedness: Option<f64>,
    pub loop_residual: Option<f64>,
    pub metrisability_residual: Option<f64>,
    pub ricci_norm: Option<f64>,
}

pub struct Recovery {
    /// Recovered metric sampled at the nodes.
    pub metric: Option<MetricField>,
    /// Recovered metric as a function of position (model input only).
    pub model: Option<Arc<dyn MetricModel>>,
    pub lambda: Option<Vec<f64>>,
    pub report: RecoveryReport,
}

fn fail(mut report: RecoveryReport, stage: Stage, e: Error) -> Recovery {
    report.stage = stage;
    report.failure = Some(e.to_string());
    Recovery {
        metric: None,
        model: None,
        lambda: None,
        report,
    }
}

/// Nodes on a coarser sub-lattice used for the expensive off-grid checks.
fn check_nodes(grid: &ChartGrid, stride: usize) -> Vec<usize> {
    let n = grid.dim();
    (0..grid.len())
        .filter(|&i| {
            let m = grid.multi_index(i);
            (0..n).all(|k| m[k] % stride.max(1) == (grid.axes()[k].count / 2) % stride.max(1))
        })
        .collect()
}

/// Run the full pipeline. Stage failures are reported, not returned as errors.
pub fn recover_metric(gamma: &ConnectionField, opts: &RecoveryOptions) -> Result<Recovery> {
    let grid = gamma.grid().clone();
    let analytic = gamma.model().is_some();
    let h = grid.max_spacing();
    let tol = opts.tol.unwrap_or(if analytic { 1e-6 } else { 50.0 * h * h });
    let ns_tol = opts
        .nullspace_tol
        .unwrap_or(if analytic { NULLSPACE_TOL } else { SAMPLED_NULLSPACE_TOL });
    let mut report = RecoveryReport {
        stage: Stage::Weyl,
        failure: None,
        analytic,
        tol,
        base_node: None,
        norm_index: None,
        det_signs: None,
        nullspace_tol: ns_tol,
        singular_ratios: None,
        lambda_residual: None,
        closedness: None,
        loop_residual: None,
        metrisability_residual: None,
        ricci_norm: None,
    };
    if gamma.dim() != N {
        return Ok(fail(report, Stage::Weyl, Error::Dimension("recovery needs n = 4".into())));
    }
    if let Err(e) = gamma.jet_at_node(grid.center_node()) {
        return Ok(fail(report, Stage::Weyl, e));
    }
    report.stage = Stage::Weyl;

    let conf = match solve_conformal_class(gamma, opts.fd_step, ns_tol) {
        Ok(c) => c,
        Err(e) => return Ok(fail(report, Stage::Conformal, e)),
    };
    report.stage = Stage::Conformal;
    report.base_node = Some(conf.base_node);
    report.norm_index = Some(conf.norm_index);
    report.det_signs = Some(conf.det_signs);
    report.singular_ratios = Some(conf.singular_ratios);

    let grad = match solve_lambda_gradient(gamma, &conf.a) {
        Ok(g) => g,
        Err(e) => return Ok(fail(report, Stage::LambdaSolve, e)),
    };
    report.lambda_residual = Some(grad.max_residual);
    if grad.max_residual > tol {
        return Ok(fail(
            report,
            Stage::LambdaSolve,
            Error::Numerical(format!(
                "dλ system residual {:e} > {tol:e}: no metric in the class with this conformal representative",
                grad.max_residual
            )),
        ));
    }
    report.stage = Stage::LambdaSolve;

    let model = gamma.model().map(|m| {
        let a = Arc::new(ConformalModel::new(m.clone(), conf.norm_index, opts.fd_step));
        Arc::new(LambdaModel::new(m.clone(), a))
    });
    let closed = match &model {
        Some(lm) => {
            let nodes = check_nodes(&grid, opts.check_stride);
            let v = nodes
                .par_iter()
                .map(|&i| lm.curl(&grid.point(i)[..N], opts.fd_step))
                .collect::<Result<Vec<f64>>>();
            match v {
                Ok(v) => v.into_iter().fold(0.0, f64::max),
                Err(e) => return Ok(fail(report, Stage::Closedness, e)),
            }
        }
        None => check_closedness(&grid, &grad.values),
    };
    report.closedness = Some(closed);
    if closed > tol {
        return Ok(fail(
            report,
            Stage::Closedness,
            Error::Numerical(format!("dλ is not closed (curl {closed:e} > {tol:e})")),
        ));
    }
    report.stage = Stage::Closedness;

    let dl = &grad.values;
    // loops revisit edges already used by the integration paths
    let edges: Mutex<HashMap<(usize, usize), f64>> = Mutex::new(HashMap::new());
    let segment = |idx: usize, k: usize| -> Result<f64> {
        let j = idx + grid.stride(k);
        match &model {
            Some(lm) => {
                if let Some(&v) = edges.lock().unwrap().get(&(idx, k)) {
                    return Ok(v);
                }
                let v = lm.line_integral(&grid.point(idx)[..N], &grid.point(j)[..N])?;
                edges.lock().unwrap().insert((idx, k), v);
                Ok(v)
            }
            None => Ok(0.5 * grid.spacing(k) * (dl[idx][k] + dl[j][k])),
        }
    };
    let lam = match integrate_lambda_with(&grid, conf.base_node, segment) {
        Ok(l) => l,
        Err(e) => return Ok(fail(report, Stage::Integrated, e)),
    };
    let loops = loop_consistency(&grid, opts.loops, opts.seed, segment)?;
    report.loop_residual = Some(loops);
    if loops > tol {
        return Ok(fail(
            report,
            Stage::Integrated,
            Error::Numerical(format!("loop inconsistency {loops:e} > {tol:e}")),
        ));
    }
    report.stage = Stage::Integrated;

    let sigma_nodes: Vec<Mat4> = (0..grid.len())
        .map(|i| {
            let a = sigma_at(&conf.representatives[i], N).ok_or_else(|| Error::SingularMetric {
                point: grid.point(i)[..N].to_vec(),
                det: 0.0,
            })?;
            let e = lam[i].exp();
            Ok(a.map(|r| r.map(|x| x * e)))
        })
        .collect::<Result<Vec<_>>>()?;
    let metric_nodes = sigma_nodes
        .iter()
        .enumerate()
        .map(|(i, s)| {
            metric_from_sigma(s, N).ok_or_else(|| Error::SingularMetric {
                point: grid.point(i)[..N].to_vec(),
                det: 0.0,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (metric, out_model, mres, ric) = match &model {
        Some(lm) => {
            // metrisability residual from the exact density jet e^λ(a, dλ a + ∂a)
            let mres = grid
                .interior_nodes()
                .par_iter()
                .map(|&i| {
                    let x = &grid.point(i)[..N];
                    let (a, da) = conf.a.jet_at_node(i)?;
                    let d = dl[i];
                    let e = lam[i].exp();
                    let s = a.map(|r| r.map(|v| v * e));
                    let mut ds = [[[0.0; 4]; 4]; 4];
                    for k in 0..N {
                        for b in 0..N {
                            for c in 0..N {
                                ds[k][b][c] = e * (d[k] * a[b][c] + da[k][b][c]);
                            }
                        }
                    }
                    let ev = east_at(&gamma.value_at(x)?, &s, &ds, N);
                    Ok(linalg::max_abs(ev.iter().flatten().flatten().copied()))
                })
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            let lam_nodes = Arc::new(lam.clone());
            let g2 = grid.clone();
            let lm2 = lm.clone();
            let a2 = Arc::new(ConformalModel::new(gamma.model().unwrap().clone(), conf.norm_index, opts.fd_step));
            let f = move |x: &[f64]| -> Result<Mat4> {
                // λ(x) from the nearest node plus a straight segment
                let mut m = [0usize; 4];
                for k in 0..N {
                    let ax = g2.axes()[k];
                    m[k] = (((x[k] - ax.lo) / g2.spacing(k)).round().max(0.0) as usize).min(ax.count - 1);
                }
                let node = g2.flat_index(&m[..N]);
                let p = g2.point(node);
                let l = lam_nodes[node] + lm2.line_integral(&p[..N], x)?;
                let s = a2.value(x)?.map(|r| r.map(|v| v * l.exp()));
                metric_from_sigma(&s, N).ok_or_else(|| Error::SingularMetric {
                    point: x.to_vec(),
                    det: 0.0,
                })
            };
            let model: Arc<dyn MetricModel> = Arc::new(FnMetric::new(N, opts.fd_step, f));
            let lc = LeviCivita::new(model.clone());
            let ric = check_nodes(&grid, opts.check_stride)
                .par_iter()
                .map(|&i| {
                    let r = riemann(&lc.jet(&grid.point(i)[..N])?);
                    let rc = ricci(&r, N);
                    Ok(linalg::max_abs(rc.iter().flatten().copied()))
                })
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(0.0, f64::max);
            (MetricField::sampled(grid.clone(), metric_nodes)?, Some(model), mres, ric)
        }
        None => {
            let sf = SigmaField::sampled(grid.clone(), sigma_nodes)?;
            let mres = crate::metris::metrisability_residual(gamma, &sf)?;
            let mf = MetricField::sampled(grid.clone(), metric_nodes)?;
            let (_, ric_field) = curvature(&christoffel(&mf)?)?;
            let ric = grid
                .nodes_with_margin(2)
                .iter()
                .map(|&i| linalg::max_abs(ric_field.node(i).iter().copied()))
                .fold(0.0, f64::max);
            (mf, None, mres, ric)
        }
    };
    report.metrisability_residual = Some(mres);
    report.ricci_norm = Some(ric);
    if mres > tol {
        report.failure = Some(format!("metrisability residual {mres:e} > {tol:e}"));
        return Ok(Recovery {
            metric: Some(metric),
            model: out_model,
            lambda: Some(lam),
            report,
        });
    }
    report.stage = Stage::Verified;
    Ok(Recovery {
        metric: Some(metric),
        model: out_model,
        lambda: Some(lam),
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weyl() {
        let w = linalg::ZERO4;
        assert_eq!(conformal_nullspace(&w).ncols(), 10);
        assert!(!nondegeneracy_check(&w));
    }

    #[test]
    fn closedness_of_exact_and_non_exact_forms() {
        let grid = ChartGrid::uniform(&[0.0; 4], &[1.0; 4], 5).unwrap();
        let exact: Vec<Vec4> = (0..grid.len())
            .map(|i| {
                let p = grid.point(i);
                [p[1], p[0], 0.0, 0.0]
            })
            .collect();
        assert!(check_closedness(&grid, &exact) <= 1e-10);
        let curl: Vec<Vec4> = (0..grid.len()).map(|i| [grid.point(i)[1], 0.0, 0.0, 0.0]).collect();
        assert!((check_closedness(&grid, &curl) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn integrate_simple_forms() {
        let grid = ChartGrid::uniform(&[0.0; 4], &[1.0; 4], 5).unwrap();
        let base = grid.center_node();
        let zero = vec![[0.0; 4]; grid.len()];
        assert!(integrate_lambda(&grid, &zero, base).unwrap().iter().all(|&v| v == 0.0));
        let dx0 = vec![[1.0, 0.0, 0.0, 0.0]; grid.len()];
        let lam = integrate_lambda(&grid, &dx0, base).unwrap();
        for i in 0..grid.len() {
            assert!((lam[i] - (grid.point(i)[0] - 0.5)).abs() < 1e-14);
        }
    }
}
