use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::fd;
use super::grid::ChartGrid;
use crate::error::{Error, Result};
use crate::expr::{ExpressionMatrix, Params, Scalar};
use crate::linalg::{self, Mat4};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signature {
    Riemannian,
    Lorentz,
    Other,
}

impl Signature {
    /// Classify a symmetric matrix by the signs of its eigenvalues.
    pub fn classify(g: &Mat4, n: usize) -> Signature {
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| g[i][j]);
        let ev = m.symmetric_eigenvalues();
        let neg = ev.iter().filter(|&&x| x < 0.0).count();
        let pos = ev.iter().filter(|&&x| x > 0.0).count();
        if neg + pos < n {
            Signature::Other
        } else if neg == 0 || pos == 0 {
            Signature::Riemannian
        } else if neg == 1 || pos == 1 {
            Signature::Lorentz
        } else {
            Signature::Other
        }
    }
}

/// Value and first/second partial derivatives of a metric at a point.
///
/// `dg[k][i][j] = ∂_k g_ij`, `ddg[k][l][i][j] = ∂_k ∂_l g_ij`.
#[derive(Clone, Copy, Debug)]
pub struct MetricJet {
    pub n: usize,
    pub g: Mat4,
    pub dg: [Mat4; 4],
    pub ddg: [[Mat4; 4]; 4],
}

impl MetricJet {
    pub fn zero(n: usize) -> Self {
        MetricJet {
            n,
            g: [[0.0; 4]; 4],
            dg: [[[0.0; 4]; 4]; 4],
            ddg: [[[[0.0; 4]; 4]; 4]; 4],
        }
    }
}

/// A metric that can be evaluated with derivatives at arbitrary points.
pub trait MetricModel: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<Mat4>;
    /// Value and first derivatives (`ddg` may be left zero).
    fn jet1(&self, x: &[f64]) -> Result<MetricJet> {
        self.jet2(x)
    }
    fn jet2(&self, x: &[f64]) -> Result<MetricJet>;
}

/// Metric with expression components; derivatives are exact (forward mode).
#[derive(Clone, Debug)]
pub struct ExprMetric {
    comps: ExpressionMatrix,
}

impl ExprMetric {
    pub fn new(matrix: &ExpressionMatrix, params: &Params) -> Result<Self> {
        if matrix.dim() == 0 || matrix.dim() > 4 {
            return Err(Error::Dimension(format!("metric dimension {}", matrix.dim())));
        }
        if !matrix.is_symmetric() || !matrix.check_symmetry() {
            return Err(Error::InvalidArgument("metric matrix must be symmetric".into()));
        }
        let comps = matrix.bind(params).map_err(|e| Error::eval(&[], e))?;
        Ok(ExprMetric { comps })
    }

    pub fn matrix(&self) -> &ExpressionMatrix {
        &self.comps
    }

    fn eval_with<T: Scalar>(&self, x: &[T], mut put: impl FnMut(usize, usize, T)) -> Result<()> {
        let n = self.comps.dim();
        let empty = Params::new();
        for i in 0..n {
            for j in i..n {
                let v = self
                    .comps
                    .get(i, j)
                    .eval_scalar(x, &empty)
                    .map_err(|e| Error::eval(&x.iter().map(|t| t.value()).collect::<Vec<_>>(), e))?;
                put(i, j, v);
            }
        }
        Ok(())
    }
}

impl MetricModel for ExprMetric {
    fn dim(&self) -> usize {
        self.comps.dim()
    }

    fn value(&self, x: &[f64]) -> Result<Mat4> {
        let n = self.dim();
        let mut g = [[0.0; 4]; 4];
        self.eval_with(&x[..n], |i, j, v| {
            g[i][j] = v;
            g[j][i] = v;
        })?;
        Ok(g)
    }

    fn jet1(&self, x: &[f64]) -> Result<MetricJet> {
        let n = self.dim();
        let vars: Vec<crate::expr::Dual1> =
            (0..n).map(|k| crate::expr::Dual1::variable(x[k], k)).collect();
        let mut jet = MetricJet::zero(n);
        self.eval_with(&vars, |i, j, v| {
            jet.g[i][j] = v.v;
            jet.g[j][i] = v.v;
            for k in 0..n {
                jet.dg[k][i][j] = v.d[k];
                jet.dg[k][j][i] = v.d[k];
            }
        })?;
        Ok(jet)
    }

    fn jet2(&self, x: &[f64]) -> Result<MetricJet> {
        let n = self.dim();
        let vars: Vec<crate::expr::Dual2> =
            (0..n).map(|k| crate::expr::Dual2::variable(x[k], k)).collect();
        let mut jet = MetricJet::zero(n);
        self.eval_with(&vars, |i, j, v| {
            jet.g[i][j] = v.v;
            jet.g[j][i] = v.v;
            for k in 0..n {
                jet.dg[k][i][j] = v.d[k];
                jet.dg[k][j][i] = v.d[k];
                for l in 0..n {
                    jet.ddg[k][l][i][j] = v.dd[k][l];
                    jet.ddg[k][l][j][i] = v.dd[k][l];
                }
            }
        })?;
        Ok(jet)
    }
}

/// A metric given as a closure; derivatives by fourth-order central differences.
pub struct FnMetric<F> {
    n: usize,
    f: F,
    h: f64,
}

impl<F> FnMetric<F>
where
    F: Fn(&[f64]) -> Result<Mat4> + Send + Sync,
{
    pub fn new(n: usize, h: f64, f: F) -> Self {
        FnMetric { n, f, h }
    }
}

impl<F> MetricModel for FnMetric<F>
where
    F: Fn(&[f64]) -> Result<Mat4> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &[f64]) -> Result<Mat4> {
        (self.f)(x)
    }

    fn jet2(&self, x: &[f64]) -> Result<MetricJet> {
        let n = self.n;
        let mut jet = MetricJet::zero(n);
        jet.g = (self.f)(x)?;
        let d = fd::jet2_central(n, x, self.h, |p| (self.f)(p))?;
        jet.dg = d.0;
        jet.ddg = d.1;
        Ok(jet)
    }

    fn jet1(&self, x: &[f64]) -> Result<MetricJet> {
        let n = self.n;
        let mut jet = MetricJet::zero(n);
        jet.g = (self.f)(x)?;
        jet.dg = fd::jet1_central(n, x, self.h, |p| (self.f)(p))?;
        Ok(jet)
    }
}

#[derive(Clone)]
pub enum MetricRepr {
    Model(Arc<dyn MetricModel>),
    /// Per-node component matrices.
    Sampled(Arc<Vec<Mat4>>),
}

/// A metric on a chart grid.
#[derive(Clone)]
pub struct MetricField {
    grid: ChartGrid,
    repr: MetricRepr,
    signature: Signature,
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.repr {
            MetricRepr::Model(_) => "model",
            MetricRepr::Sampled(_) => "sampled",
        };
        f.debug_struct("MetricField")
            .field("grid", &self.grid)
            .field("repr", &kind)
            .field("signature", &self.signature)
            .finish()
    }
}

impl MetricField {
    pub fn from_model(grid: ChartGrid, model: Arc<dyn MetricModel>) -> Result<Self> {
        if model.dim() != grid.dim() {
            return Err(Error::Dimension(format!(
                "metric dim {} vs grid dim {}",
                model.dim(),
                grid.dim()
            )));
        }
        let g = model.value(&grid.point(grid.center_node()))?;
        let signature = Signature::classify(&g, grid.dim());
        Ok(MetricField {
            grid,
            repr: MetricRepr::Model(model),
            signature,
        })
    }

    pub fn from_expressions(grid: ChartGrid, matrix: &ExpressionMatrix, params: &Params) -> Result<Self> {
        Self::from_model(grid, Arc::new(ExprMetric::new(matrix, params)?))
    }

    pub fn sampled(grid: ChartGrid, values: Vec<Mat4>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "{} samples for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        let signature = Signature::classify(&values[grid.center_node()], grid.dim());
        Ok(MetricField {
            grid,
            repr: MetricRepr::Sampled(Arc::new(values)),
            signature,
        })
    }

    /// Sample this field at the nodes of its own grid.
    pub fn to_sampled(&self) -> Result<Self> {
        let values = (0..self.grid.len())
            .map(|i| self.value_at_node(i))
            .collect::<Result<Vec<_>>>()?;
        Self::sampled(self.grid.clone(), values)
    }

    pub fn grid(&self) -> &ChartGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn repr(&self) -> &MetricRepr {
        &self.repr
    }

    pub fn model(&self) -> Option<&Arc<dyn MetricModel>> {
        match &self.repr {
            MetricRepr::Model(m) => Some(m),
            MetricRepr::Sampled(_) => None,
        }
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn with_grid(&self, grid: ChartGrid) -> Result<Self> {
        match &self.repr {
            MetricRepr::Model(m) => Self::from_model(grid, m.clone()),
            MetricRepr::Sampled(_) => Err(Error::InvalidArgument(
                "cannot move a sampled metric to another grid".into(),
            )),
        }
    }

    pub fn value_at_node(&self, idx: usize) -> Result<Mat4> {
        match &self.repr {
            MetricRepr::Model(m) => m.value(&self.grid.point(idx)),
            MetricRepr::Sampled(v) => Ok(v[idx]),
        }
    }

    /// Value at an arbitrary point (multilinear interpolation for samples).
    pub fn value_at(&self, x: &[f64]) -> Result<Mat4> {
        match &self.repr {
            MetricRepr::Model(m) => m.value(x),
            MetricRepr::Sampled(v) => Ok(fd::interpolate(&self.grid, x, |i| v[i])),
        }
    }

    /// Value and first derivatives at a node.
    pub fn jet1_at_node(&self, idx: usize) -> Result<MetricJet> {
        match &self.repr {
            MetricRepr::Model(m) => m.jet1(&self.grid.point(idx)),
            MetricRepr::Sampled(v) => {
                let n = self.dim();
                let mut jet = MetricJet::zero(n);
                jet.g = v[idx];
                for k in 0..n {
                    jet.dg[k] = fd::node_derivative(&self.grid, idx, k, |i| v[i]);
                }
                Ok(jet)
            }
        }
    }

    /// Check |det g| > 1e-10 (max row norm)^n at every node.
    pub fn check_nondegenerate(&self) -> Result<()> {
        let n = self.dim();
        for idx in 0..self.grid.len() {
            let g = self.value_at_node(idx)?;
            check_nondegenerate_at(&g, n, &self.grid.point(idx)[..n])?;
        }
        Ok(())
    }
}

pub fn check_nondegenerate_at(g: &Mat4, n: usize, x: &[f64]) -> Result<()> {
    let det = linalg::determinant(g, n);
    let row = (0..n)
        .map(|i| (0..n).map(|j| g[i][j] * g[i][j]).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    if !(det.abs() > 1e-10 * row.powi(n as i32)) {
        return Err(Error::SingularMetric {
            point: x.to_vec(),
            det,
        });
    }
    Ok(())
}
