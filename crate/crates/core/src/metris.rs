//! The metrisability operator, 2-D Liouville coefficients and the
//! equivalence tests built on them.
//!
//! Densities are taken with `|det g|`: σ^{ab} = g^{ab}|det g|^{1/(n+1)}. For a
//! Lorentz metric in even dimension this differs from the signed root only by
//! an overall constant sign, which the (linear) operator does not see.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Mat4, Ten3};
use crate::tensor::metric::{check_nondegenerate_at, MetricJet, MetricModel, MetricRepr};
use crate::tensor::{christoffel, fd, ChartGrid, ConnectionField, MetricField};

/// σ^{ab} = g^{ab}|det g|^{1/(n+1)} at a point.
pub fn sigma_at(g: &Mat4, n: usize) -> Option<Mat4> {
    let gi = linalg::inverse(g, n)?;
    let d = linalg::determinant(g, n).abs();
    let s = d.powf(1.0 / (n as f64 + 1.0));
    let mut out = [[0.0; 4]; 4];
    for i in 0..n {
        for j in 0..n {
            out[i][j] = gi[i][j] * s;
        }
    }
    Some(out)
}

/// Inverse of [`sigma_at`]: |det σ| = |det g|^{−1/(n+1)}, so g = (|det σ| σ)^{−1}.
pub fn metric_from_sigma(s: &Mat4, n: usize) -> Option<Mat4> {
    let d = linalg::determinant(s, n).abs();
    let mut m = *s;
    for row in m.iter_mut().take(n) {
        for v in row.iter_mut().take(n) {
            *v *= d;
        }
    }
    linalg::inverse(&m, n)
}

/// `L^i_j = (det ḡ / det g)^{1/(n+1)} ḡ^{ik} g_{kj}`.
///
/// A negative ratio is handled with a real odd root for even n and by
/// flipping ḡ for odd n; both give `sign(r)|r|^{1/(n+1)} ḡ^{-1} g`.
pub fn l_tensor_at(g: &Mat4, gbar: &Mat4, n: usize) -> Option<Mat4> {
    let gbi = linalg::inverse(gbar, n)?;
    let dg = linalg::determinant(g, n);
    if dg == 0.0 {
        return None;
    }
    let r = linalg::determinant(gbar, n) / dg;
    let f = r.signum() * r.abs().powf(1.0 / (n as f64 + 1.0));
    let mut l = linalg::matmul(&gbi, g, n);
    for row in l.iter_mut().take(n) {
        for v in row.iter_mut().take(n) {
            *v *= f;
        }
    }
    Some(l)
}

/// σ̄^{ab} = L^a_l g^{lb} |det g|^{1/(n+1)}.
pub fn sigma_pair_at(g: &Mat4, gbar: &Mat4, n: usize) -> Option<Mat4> {
    let l = l_tensor_at(g, gbar, n)?;
    let s = sigma_at(g, n)?;
    Some(linalg::matmul(&l, &s, n))
}

/// Value and first derivatives `ds[k][a][b] = ∂_k σ^{ab}` of a density field.
pub trait SigmaModel: Send + Sync {
    fn dim(&self) -> usize;
    fn jet(&self, x: &[f64]) -> Result<(Mat4, [Mat4; 4])>;
}

/// `scale · σ(g)` for a metric model, differentiated analytically from the metric jet.
pub struct MetricSigma {
    metric: Arc<dyn MetricModel>,
    scale: f64,
}

impl MetricSigma {
    pub fn new(metric: Arc<dyn MetricModel>, scale: f64) -> Self {
        MetricSigma { metric, scale }
    }
}

/// σ and ∂σ from a first-order metric jet:
/// ∂σ = |det g|^{1/(n+1)}(−g^{-1}∂g g^{-1} + g^{-1} tr(g^{-1}∂g)/(n+1)).
pub fn sigma_jet(jet: &MetricJet, x: &[f64]) -> Result<(Mat4, [Mat4; 4])> {
    let n = jet.n;
    check_nondegenerate_at(&jet.g, n, x)?;
    let gi = linalg::inverse(&jet.g, n).ok_or_else(|| Error::SingularMetric {
        point: x.to_vec(),
        det: 0.0,
    })?;
    let d = linalg::determinant(&jet.g, n).abs().powf(1.0 / (n as f64 + 1.0));
    let mut s = [[0.0; 4]; 4];
    for i in 0..n {
        for j in 0..n {
            s[i][j] = gi[i][j] * d;
        }
    }
    let mut ds = [[[0.0; 4]; 4]; 4];
    for k in 0..n {
        let a = linalg::matmul(&gi, &jet.dg[k], n);
        let tr: f64 = (0..n).map(|i| a[i][i]).sum();
        let b = linalg::matmul(&a, &gi, n);
        for i in 0..n {
            for j in 0..n {
                ds[k][i][j] = d * (-b[i][j] + gi[i][j] * tr / (n as f64 + 1.0));
            }
        }
    }
    Ok((s, ds))
}

impl SigmaModel for MetricSigma {
    fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn jet(&self, x: &[f64]) -> Result<(Mat4, [Mat4; 4])> {
        let (mut s, mut ds) = sigma_jet(&self.metric.jet1(x)?, x)?;
        let n = self.dim();
        let scale = |m: &mut Mat4| {
            for row in m.iter_mut().take(n) {
                for v in row.iter_mut().take(n) {
                    *v *= self.scale;
                }
            }
        };
        scale(&mut s);
        for d in ds.iter_mut().take(n) {
            scale(d);
        }
        Ok((s, ds))
    }
}

/// A pointwise density closure differentiated by fourth-order central differences.
pub struct FnSigma<F> {
    n: usize,
    h: f64,
    f: F,
}

impl<F> FnSigma<F>
where
    F: Fn(&[f64]) -> Result<Mat4> + Send + Sync,
{
    pub fn new(n: usize, h: f64, f: F) -> Self {
        FnSigma { n, h, f }
    }
}

impl<F> SigmaModel for FnSigma<F>
where
    F: Fn(&[f64]) -> Result<Mat4> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.n
    }

    fn jet(&self, x: &[f64]) -> Result<(Mat4, [Mat4; 4])> {
        Ok(((self.f)(x)?, fd::jet1_central(self.n, x, self.h, &self.f)?))
    }
}

#[derive(Clone)]
pub enum SigmaRepr {
    Model(Arc<dyn SigmaModel>),
    Sampled(Arc<Vec<Mat4>>),
}

/// Symmetric contravariant density of weight 2/(n+1) on a grid.
#[derive(Clone)]
pub struct SigmaField {
    grid: ChartGrid,
    repr: SigmaRepr,
}

impl fmt::Debug for SigmaField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SigmaField").field("grid", &self.grid).finish()
    }
}

impl SigmaField {
    pub fn from_model(grid: ChartGrid, model: Arc<dyn SigmaModel>) -> Result<Self> {
        if model.dim() != grid.dim() {
            return Err(Error::Dimension("sigma model dimension".into()));
        }
        Ok(SigmaField {
            grid,
            repr: SigmaRepr::Model(model),
        })
    }

    pub fn sampled(grid: ChartGrid, values: Vec<Mat4>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension("sigma samples do not match grid".into()));
        }
        Ok(SigmaField {
            grid,
            repr: SigmaRepr::Sampled(Arc::new(values)),
        })
    }

    pub fn grid(&self) -> &ChartGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Density weight 2/(n+1).
    pub fn weight(&self) -> f64 {
        2.0 / (self.dim() as f64 + 1.0)
    }

    pub fn value_at_node(&self, idx: usize) -> Result<Mat4> {
        match &self.repr {
            SigmaRepr::Model(m) => Ok(m.jet(&self.grid.point(idx))?.0),
            SigmaRepr::Sampled(v) => Ok(v[idx]),
        }
    }

    pub fn jet_at_node(&self, idx: usize) -> Result<(Mat4, [Mat4; 4])> {
        match &self.repr {
            SigmaRepr::Model(m) => m.jet(&self.grid.point(idx)),
            SigmaRepr::Sampled(v) => {
                let mut ds = [[[0.0; 4]; 4]; 4];
                for (k, d) in ds.iter_mut().enumerate().take(self.dim()) {
                    *d = fd::node_derivative(&self.grid, idx, k, |i| v[i]);
                }
                Ok((v[idx], ds))
            }
        }
    }
}

pub fn sigma_from_metric(g: &MetricField) -> Result<SigmaField> {
    let grid = g.grid().clone();
    let n = grid.dim();
    match g.repr() {
        MetricRepr::Model(m) => SigmaField::from_model(grid, Arc::new(MetricSigma::new(m.clone(), 1.0))),
        MetricRepr::Sampled(v) => {
            let values = v
                .iter()
                .enumerate()
                .map(|(idx, gm)| {
                    check_nondegenerate_at(gm, n, &grid.point(idx)[..n])?;
                    sigma_at(gm, n).ok_or_else(|| Error::SingularMetric {
                        point: grid.point(idx)[..n].to_vec(),
                        det: 0.0,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            SigmaField::sampled(grid, values)
        }
    }
}

/// σ̄ = L g^{-1}|det g|^{1/(n+1)}.
///
/// Algebraically σ̄ = sign(det ḡ/det g)·σ(ḡ), so for model metrics the field is
/// differentiated exactly through ḡ; [`sigma_pair_at`] is the literal formula.
pub fn sigma_pair(g: &MetricField, gbar: &MetricField) -> Result<SigmaField> {
    if g.grid() != gbar.grid() {
        return Err(Error::InvalidArgument("metrics live on different grids".into()));
    }
    let grid = g.grid().clone();
    let n = grid.dim();
    match (g.repr(), gbar.repr()) {
        (MetricRepr::Model(gm), MetricRepr::Model(bm)) => {
            let x = grid.point(grid.center_node());
            let r = linalg::determinant(&bm.value(&x)?, n) / linalg::determinant(&gm.value(&x)?, n);
            SigmaField::from_model(grid, Arc::new(MetricSigma::new(bm.clone(), r.signum())))
        }
        _ => {
            let values = (0..grid.len())
                .map(|idx| {
                    let a = g.value_at_node(idx)?;
                    let b = gbar.value_at_node(idx)?;
                    let x = &grid.point(idx)[..n];
                    check_nondegenerate_at(&a, n, x)?;
                    check_nondegenerate_at(&b, n, x)?;
                    sigma_pair_at(&a, &b, n).ok_or_else(|| Error::SingularMetric {
                        point: x.to_vec(),
                        det: 0.0,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            SigmaField::sampled(grid, values)
        }
    }
}

/// The left-hand side of the metrisability equation, `E[a][b][c]`.
pub fn east_at(gamma: &Ten3, s: &Mat4, ds: &[Mat4; 4], n: usize) -> Ten3 {
    let w = 2.0 / (n as f64 + 1.0);
    let mut d = [[[0.0; 4]; 4]; 4];
    for a in 0..n {
        let tr: f64 = (0..n).map(|k| gamma[k][k][a]).sum();
        for b in 0..n {
            for c in 0..n {
                let mut v = ds[a][b][c] - w * tr * s[b][c];
                for k in 0..n {
                    v += gamma[b][a][k] * s[k][c] + gamma[c][k][a] * s[b][k];
                }
                d[a][b][c] = v;
            }
        }
    }
    let mut div = [0.0; 4];
    for (b, slot) in div.iter_mut().enumerate().take(n) {
        *slot = (0..n).map(|i| d[i][i][b]).sum();
    }
    let f = 1.0 / (n as f64 + 1.0);
    let mut e = d;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut t = 0.0;
                if c == a {
                    t += div[b];
                }
                if b == a {
                    t += div[c];
                }
                e[a][b][c] -= f * t;
            }
        }
    }
    e
}

fn max_abs3(e: &Ten3, n: usize) -> f64 {
    let mut m = 0.0f64;
    for a in e.iter().take(n) {
        for b in a.iter().take(n) {
            for c in b.iter().take(n) {
                m = m.max(c.abs());
            }
        }
    }
    m
}

/// Max |E| over index triples and interior nodes.
pub fn metrisability_residual(gamma: &ConnectionField, sigma: &SigmaField) -> Result<f64> {
    if gamma.grid() != sigma.grid() {
        return Err(Error::InvalidArgument("connection and sigma live on different grids".into()));
    }
    let n = gamma.dim();
    let nodes = gamma.grid().interior_nodes();
    let vals = nodes
        .par_iter()
        .map(|&idx| {
            let g = gamma.value_at_node(idx)?;
            let (s, ds) = sigma.jet_at_node(idx)?;
            Ok(max_abs3(&east_at(&g, &s, &ds, n), n))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// `(K0, K1, K2, K3)` of the 2-D Liouville system at a point.
pub fn liouville_at(g: &Ten3) -> [f64; 4] {
    [
        -g[1][0][0],
        g[0][0][0] - 2.0 * g[1][0][1],
        -g[1][1][1] + 2.0 * g[0][0][1],
        g[0][1][1],
    ]
}

pub fn liouville_coefficients(gamma: &ConnectionField) -> Result<Vec<[f64; 4]>> {
    if gamma.dim() != 2 {
        return Err(Error::Dimension(format!(
            "Liouville coefficients need n = 2, got {}",
            gamma.dim()
        )));
    }
    (0..gamma.grid().len())
        .into_par_iter()
        .map(|idx| Ok(liouville_at(&gamma.value_at_node(idx)?)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Equivalence {
    pub equivalent: bool,
    /// Residual of σ̄(g, ḡ) against Γ(g).
    pub residual: f64,
    /// Residual of σ̄(ḡ, g) against Γ(ḡ).
    pub reverse_residual: f64,
}

pub fn is_geodesically_equivalent(g: &MetricField, gbar: &MetricField, tol: f64) -> Result<Equivalence> {
    if tol <= 0.0 {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let residual = metrisability_residual(&christoffel(g)?, &sigma_pair(g, gbar)?)?;
    let reverse_residual = metrisability_residual(&christoffel(gbar)?, &sigma_pair(gbar, g)?)?;
    Ok(Equivalence {
        equivalent: residual <= tol && reverse_residual <= tol,
        residual,
        reverse_residual,
    })
}

/// Max-norm difference of the Levi-Civita connections and whether it is ≤ tol.
pub fn is_affinely_equivalent(g: &MetricField, gbar: &MetricField, tol: f64) -> Result<(bool, f64)> {
    if g.grid() != gbar.grid() {
        return Err(Error::InvalidArgument("metrics live on different grids".into()));
    }
    let a = christoffel(g)?;
    let b = christoffel(gbar)?;
    let n = g.dim();
    let diffs = (0..g.grid().len())
        .into_par_iter()
        .map(|idx| {
            let x = a.value_at_node(idx)?;
            let y = b.value_at_node(idx)?;
            let mut m = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        m = m.max((x[i][j][k] - y[i][j][k]).abs());
                    }
                }
            }
            Ok(m)
        })
        .collect::<Result<Vec<f64>>>()?;
    let d = diffs.into_iter().fold(0.0, f64::max);
    Ok((d <= tol, d))
}
