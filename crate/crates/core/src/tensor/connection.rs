use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use super::fd;
use super::grid::ChartGrid;
use super::metric::{MetricField, MetricJet, MetricModel, MetricRepr};
use crate::error::{Error, Result};
use crate::expr::{Dual1, Expr, Params, Scalar};
use crate::linalg::{self, Mat4, Ten3, Vec4, ZERO3};

/// Connection coefficients and their first derivatives at a point.
///
/// `gamma[i][j][k] = Γ^i_{jk}`, `dgamma[m][i][j][k] = ∂_m Γ^i_{jk}`.
#[derive(Clone, Copy, Debug)]
pub struct ConnJet {
    pub n: usize,
    pub gamma: Ten3,
    pub dgamma: [Ten3; 4],
}

impl ConnJet {
    pub fn zero(n: usize) -> Self {
        ConnJet {
            n,
            gamma: ZERO3,
            dgamma: [ZERO3; 4],
        }
    }
}

pub trait ConnectionModel: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<Ten3> {
        Ok(self.jet(x)?.gamma)
    }
    fn jet(&self, x: &[f64]) -> Result<ConnJet>;
}

/// Levi-Civita connection of a metric model.
pub struct LeviCivita {
    metric: Arc<dyn MetricModel>,
}

impl LeviCivita {
    pub fn new(metric: Arc<dyn MetricModel>) -> Self {
        LeviCivita { metric }
    }
}

fn inverse_at(g: &Mat4, n: usize, x: &[f64]) -> Result<Mat4> {
    super::metric::check_nondegenerate_at(g, n, x)?;
    linalg::inverse(g, n).ok_or_else(|| Error::SingularMetric {
        point: x.to_vec(),
        det: 0.0,
    })
}

/// Γ^i_{jk} = ½ g^{il}(∂_j g_{lk} + ∂_k g_{lj} − ∂_l g_{jk}).
pub fn christoffel_from_jet(jet: &MetricJet, x: &[f64]) -> Result<Ten3> {
    let n = jet.n;
    let gi = inverse_at(&jet.g, n, x)?;
    Ok(christoffel_with_inverse(jet, &gi))
}

fn lowered(jet: &MetricJet) -> Ten3 {
    // Γ_{ljk}
    let n = jet.n;
    let mut c = ZERO3;
    for l in 0..n {
        for j in 0..n {
            for k in j..n {
                let v = 0.5 * (jet.dg[j][l][k] + jet.dg[k][l][j] - jet.dg[l][j][k]);
                c[l][j][k] = v;
                c[l][k][j] = v;
            }
        }
    }
    c
}

fn christoffel_with_inverse(jet: &MetricJet, gi: &Mat4) -> Ten3 {
    let n = jet.n;
    let low = lowered(jet);
    let mut gam = ZERO3;
    for i in 0..n {
        for j in 0..n {
            for k in j..n {
                let v: f64 = (0..n).map(|l| gi[i][l] * low[l][j][k]).sum();
                gam[i][j][k] = v;
                gam[i][k][j] = v;
            }
        }
    }
    gam
}

/// Christoffel symbols and their derivatives from a second-order metric jet.
pub fn levi_civita_jet(jet: &MetricJet, x: &[f64]) -> Result<ConnJet> {
    let n = jet.n;
    let gi = inverse_at(&jet.g, n, x)?;
    let low = lowered(jet);
    let mut out = ConnJet::zero(n);
    out.gamma = christoffel_with_inverse(jet, &gi);
    for m in 0..n {
        // ∂_m g^{il} = −g^{ia} ∂_m g_{ab} g^{bl}
        let t = linalg::matmul(&jet.dg[m], &gi, n);
        let dgi = linalg::matmul(&gi, &t, n);
        for i in 0..n {
            for j in 0..n {
                for k in j..n {
                    let mut v = 0.0;
                    for l in 0..n {
                        let dlow = 0.5
                            * (jet.ddg[m][j][l][k] + jet.ddg[m][k][l][j] - jet.ddg[m][l][j][k]);
                        v += -dgi[i][l] * low[l][j][k] + gi[i][l] * dlow;
                    }
                    out.dgamma[m][i][j][k] = v;
                    out.dgamma[m][i][k][j] = v;
                }
            }
        }
    }
    Ok(out)
}

impl ConnectionModel for LeviCivita {
    fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn value(&self, x: &[f64]) -> Result<Ten3> {
        let jet = self.metric.jet1(x)?;
        christoffel_from_jet(&jet, x)
    }

    fn jet(&self, x: &[f64]) -> Result<ConnJet> {
        let jet = self.metric.jet2(x)?;
        levi_civita_jet(&jet, x)
    }
}

/// Connection with expression components `Γ^i_{jk}` (symmetric in j, k).
#[derive(Clone, Debug)]
pub struct ExprConnection {
    n: usize,
    comps: Vec<Expr>,
}

impl ExprConnection {
    /// `comps[i * n * n + j * n + k] = Γ^i_{jk}`.
    pub fn new(n: usize, comps: Vec<Expr>, params: &Params) -> Result<Self> {
        if n == 0 || n > 4 || comps.len() != n * n * n {
            return Err(Error::Dimension(format!(
                "{} connection components for dimension {n}",
                comps.len()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..j {
                    if comps[i * n * n + j * n + k] != comps[i * n * n + k * n + j] {
                        return Err(Error::InvalidArgument(format!(
                            "connection not symmetric in lower indices at ({i},{j},{k})"
                        )));
                    }
                }
            }
        }
        let comps = comps
            .iter()
            .map(|e| e.bind(params))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::eval(&[], e))?;
        Ok(ExprConnection { n, comps })
    }

    pub fn component(&self, i: usize, j: usize, k: usize) -> &Expr {
        &self.comps[i * self.n * self.n + j * self.n + k]
    }
}

impl ConnectionModel for ExprConnection {
    fn dim(&self) -> usize {
        self.n
    }

    fn jet(&self, x: &[f64]) -> Result<ConnJet> {
        let n = self.n;
        let vars: Vec<Dual1> = (0..n).map(|k| Dual1::variable(x[k], k)).collect();
        let empty = Params::new();
        let mut out = ConnJet::zero(n);
        for i in 0..n {
            for j in 0..n {
                for k in j..n {
                    let v = self
                        .component(i, j, k)
                        .eval_scalar(&vars, &empty)
                        .map_err(|e| Error::eval(&x[..n], e))?;
                    out.gamma[i][j][k] = v.v;
                    out.gamma[i][k][j] = v.v;
                    for m in 0..n {
                        out.dgamma[m][i][j][k] = v.d[m];
                        out.dgamma[m][i][k][j] = v.d[m];
                    }
                }
            }
        }
        Ok(out)
    }
}

/// The zero connection.
pub struct Flat(pub usize);

impl ConnectionModel for Flat {
    fn dim(&self) -> usize {
        self.0
    }
    fn jet(&self, _x: &[f64]) -> Result<ConnJet> {
        Ok(ConnJet::zero(self.0))
    }
}

/// A one-form with first derivatives: value `φ_b` and `dphi[k][b] = ∂_k φ_b`.
pub trait OneFormModel: Send + Sync {
    fn dim(&self) -> usize;
    fn jet(&self, x: &[f64]) -> Result<(Vec4, Mat4)>;
}

#[derive(Clone, Debug)]
pub struct ExprOneForm {
    comps: Vec<Expr>,
}

impl ExprOneForm {
    pub fn new(comps: Vec<Expr>, params: &Params) -> Result<Self> {
        if comps.is_empty() || comps.len() > 4 {
            return Err(Error::Dimension(format!("one-form with {} components", comps.len())));
        }
        let comps = comps
            .iter()
            .map(|e| e.bind(params))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::eval(&[], e))?;
        Ok(ExprOneForm { comps })
    }
}

impl OneFormModel for ExprOneForm {
    fn dim(&self) -> usize {
        self.comps.len()
    }

    fn jet(&self, x: &[f64]) -> Result<(Vec4, Mat4)> {
        let n = self.comps.len();
        let vars: Vec<Dual1> = (0..n).map(|k| Dual1::variable(x[k], k)).collect();
        let empty = Params::new();
        let mut v = [0.0; 4];
        let mut d = [[0.0; 4]; 4];
        for (b, e) in self.comps.iter().enumerate() {
            let r = e.eval_scalar(&vars, &empty).map_err(|err| Error::eval(&x[..n], err))?;
            v[b] = r.value();
            for k in 0..n {
                d[k][b] = r.d[k];
            }
        }
        Ok((v, d))
    }
}

/// Γ̄^a_{bc} = Γ^a_{bc} + δ^a_b φ_c + δ^a_c φ_b.
pub fn gauge_values(gamma: &Ten3, phi: &Vec4, n: usize) -> Ten3 {
    let mut out = *gamma;
    for a in 0..n {
        for c in 0..n {
            out[a][a][c] += phi[c];
            out[a][c][a] += phi[c];
        }
    }
    out
}

/// A connection shifted by a projective gauge one-form.
pub struct Gauged {
    base: Arc<dyn ConnectionModel>,
    phi: Arc<dyn OneFormModel>,
}

impl Gauged {
    pub fn new(base: Arc<dyn ConnectionModel>, phi: Arc<dyn OneFormModel>) -> Result<Self> {
        if base.dim() != phi.dim() {
            return Err(Error::Dimension("gauge one-form dimension".into()));
        }
        Ok(Gauged { base, phi })
    }
}

impl ConnectionModel for Gauged {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn jet(&self, x: &[f64]) -> Result<ConnJet> {
        let n = self.dim();
        let mut j = self.base.jet(x)?;
        let (phi, dphi) = self.phi.jet(x)?;
        j.gamma = gauge_values(&j.gamma, &phi, n);
        for m in 0..n {
            j.dgamma[m] = gauge_values(&j.dgamma[m], &dphi[m], n);
        }
        Ok(j)
    }
}

#[derive(Clone)]
pub enum ConnectionRepr {
    Model(Arc<dyn ConnectionModel>),
    /// Per-node coefficient arrays.
    Sampled(Arc<Vec<Ten3>>),
}

/// A symmetric affine connection on a chart grid.
#[derive(Clone)]
pub struct ConnectionField {
    grid: ChartGrid,
    repr: ConnectionRepr,
}

impl fmt::Debug for ConnectionField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.repr {
            ConnectionRepr::Model(_) => "model",
            ConnectionRepr::Sampled(_) => "sampled",
        };
        f.debug_struct("ConnectionField")
            .field("grid", &self.grid)
            .field("repr", &kind)
            .finish()
    }
}

impl ConnectionField {
    pub fn from_model(grid: ChartGrid, model: Arc<dyn ConnectionModel>) -> Result<Self> {
        if model.dim() != grid.dim() {
            return Err(Error::Dimension(format!(
                "connection dim {} vs grid dim {}",
                model.dim(),
                grid.dim()
            )));
        }
        Ok(ConnectionField {
            grid,
            repr: ConnectionRepr::Model(model),
        })
    }

    pub fn sampled(grid: ChartGrid, values: Vec<Ten3>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!(
                "{} samples for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(ConnectionField {
            grid,
            repr: ConnectionRepr::Sampled(Arc::new(values)),
        })
    }

    pub fn flat(grid: ChartGrid) -> Self {
        let n = grid.dim();
        ConnectionField {
            grid,
            repr: ConnectionRepr::Model(Arc::new(Flat(n))),
        }
    }

    pub fn grid(&self) -> &ChartGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn repr(&self) -> &ConnectionRepr {
        &self.repr
    }

    pub fn model(&self) -> Option<&Arc<dyn ConnectionModel>> {
        match &self.repr {
            ConnectionRepr::Model(m) => Some(m),
            ConnectionRepr::Sampled(_) => None,
        }
    }

    pub fn with_grid(&self, grid: ChartGrid) -> Result<Self> {
        match &self.repr {
            ConnectionRepr::Model(m) => Self::from_model(grid, m.clone()),
            ConnectionRepr::Sampled(_) => Err(Error::InvalidArgument(
                "cannot move a sampled connection to another grid".into(),
            )),
        }
    }

    pub fn value_at_node(&self, idx: usize) -> Result<Ten3> {
        match &self.repr {
            ConnectionRepr::Model(m) => m.value(&self.grid.point(idx)),
            ConnectionRepr::Sampled(v) => Ok(v[idx]),
        }
    }

    /// Value at an arbitrary point (multilinear interpolation for samples).
    pub fn value_at(&self, x: &[f64]) -> Result<Ten3> {
        match &self.repr {
            ConnectionRepr::Model(m) => m.value(x),
            ConnectionRepr::Sampled(v) => Ok(fd::interpolate(&self.grid, x, |i| v[i])),
        }
    }

    /// Value and first derivatives at a node; grid differences for samples.
    pub fn jet_at_node(&self, idx: usize) -> Result<ConnJet> {
        match &self.repr {
            ConnectionRepr::Model(m) => m.jet(&self.grid.point(idx)),
            ConnectionRepr::Sampled(v) => {
                let n = self.dim();
                let mut j = ConnJet::zero(n);
                j.gamma = v[idx];
                for k in 0..n {
                    j.dgamma[k] = fd::node_derivative(&self.grid, idx, k, |i| v[i]);
                }
                Ok(j)
            }
        }
    }

    pub fn to_sampled(&self) -> Result<Self> {
        let values = (0..self.grid.len())
            .into_par_iter()
            .map(|i| self.value_at_node(i))
            .collect::<Result<Vec<_>>>()?;
        Self::sampled(self.grid.clone(), values)
    }

    /// Maximum of |Γ^i_{jk} − Γ^i_{kj}| over the nodes.
    pub fn symmetry_defect(&self) -> Result<f64> {
        let n = self.dim();
        let mut worst = 0.0f64;
        for idx in 0..self.grid.len() {
            let g = self.value_at_node(idx)?;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        worst = worst.max((g[i][j][k] - g[i][k][j]).abs());
                    }
                }
            }
        }
        Ok(worst)
    }
}

/// A one-form on a grid, as a model or per-node samples.
#[derive(Clone)]
pub enum OneForm {
    Model(Arc<dyn OneFormModel>),
    Sampled(Arc<Vec<Vec4>>),
}

impl OneForm {
    pub fn value_at_node(&self, grid: &ChartGrid, idx: usize) -> Result<Vec4> {
        match self {
            OneForm::Model(m) => Ok(m.jet(&grid.point(idx))?.0),
            OneForm::Sampled(v) => Ok(v[idx]),
        }
    }
}

/// The Levi-Civita connection of `g`. Exact for model metrics; grid
/// differences of the sampled components otherwise.
pub fn christoffel(g: &MetricField) -> Result<ConnectionField> {
    let grid = g.grid().clone();
    match g.repr() {
        MetricRepr::Model(m) => ConnectionField::from_model(grid, Arc::new(LeviCivita::new(m.clone()))),
        MetricRepr::Sampled(_) => {
            let values = (0..grid.len())
                .into_par_iter()
                .map(|idx| {
                    let jet = g.jet1_at_node(idx)?;
                    christoffel_from_jet(&jet, &grid.point(idx)[..grid.dim()])
                })
                .collect::<Result<Vec<_>>>()?;
            ConnectionField::sampled(grid, values)
        }
    }
}

/// Γ̄ = Γ + δφ + δφ. Stays analytic when both inputs are models.
pub fn apply_projective_gauge(gamma: &ConnectionField, phi: &OneForm) -> Result<ConnectionField> {
    let grid = gamma.grid().clone();
    let n = grid.dim();
    match (gamma.repr(), phi) {
        (ConnectionRepr::Model(m), OneForm::Model(p)) => {
            ConnectionField::from_model(grid, Arc::new(Gauged::new(m.clone(), p.clone())?))
        }
        _ => {
            if let OneForm::Sampled(v) = phi {
                if v.len() != grid.len() {
                    return Err(Error::Dimension("one-form samples do not match grid".into()));
                }
            }
            let values = (0..grid.len())
                .into_par_iter()
                .map(|idx| {
                    let g = gamma.value_at_node(idx)?;
                    let p = phi.value_at_node(&grid, idx)?;
                    Ok(gauge_values(&g, &p, n))
                })
                .collect::<Result<Vec<_>>>()?;
            ConnectionField::sampled(grid, values)
        }
    }
}

/// φ_b = −Γ^a_{ab}/(n+1): the gauge taking Γ to its trace-free representative.
pub fn trace_free_gauge(gamma: &Ten3, n: usize) -> Vec4 {
    let mut phi = [0.0; 4];
    for b in 0..n {
        let tr: f64 = (0..n).map(|a| gamma[a][a][b]).sum();
        phi[b] = -tr / (n as f64 + 1.0);
    }
    phi
}

/// The trace-free representative Γ̂ with Γ̂^a_{ab} = 0.
pub fn trace_free(gamma: &Ten3, n: usize) -> Ten3 {
    gauge_values(gamma, &trace_free_gauge(gamma, n), n)
}
