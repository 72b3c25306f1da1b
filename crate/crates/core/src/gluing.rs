//! Building blocks of geodesically equivalent pairs, the gluing operation and
//! the catalog of Lorentz normal forms in dimension four.
//!
//! Block-local coordinates are `x0..x{m-1}`; gluing shifts the coordinates of
//! the second factor past those of the first. One-variable functions (X, Y, λ)
//! are given as expressions in `x0` and placed in their slot by the constructor.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{parse, Expr, ExpressionMatrix, Params};
use crate::fixtures::in_slot;
use crate::metris::{self, Equivalence};
use crate::tensor::{Axis, ChartGrid, MetricField, Signature};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    OneDim,
    LiouvilleTrivial,
    ComplexLiouville,
    Jordan2,
    Petrov3,
    Eisenhart3,
    Trivial,
}

/// Metrics, comparison tensor and characteristic polynomial of a pair.
pub trait PairData {
    fn dim(&self) -> usize;
    fn g(&self) -> &ExpressionMatrix;
    fn gbar(&self) -> &ExpressionMatrix;
    fn l(&self) -> &ExpressionMatrix;
    /// Coefficients `c[0..=m]` of χ(t) = det(t Id − L).
    fn chi(&self) -> &[Expr];
    fn domain(&self) -> &[(f64, f64)];
    fn parts(&self) -> Vec<Part>;
}

/// Where a building block sits inside a glued pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Part {
    pub kind: BlockKind,
    pub offset: usize,
    pub dim: usize,
}

#[derive(Clone, Debug)]
pub struct BuildingBlock {
    pub kind: BlockKind,
    pub g: ExpressionMatrix,
    pub gbar: ExpressionMatrix,
    pub l: ExpressionMatrix,
    pub chi: Vec<Expr>,
    pub domain: Vec<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct GluedPair {
    pub parts: Vec<Part>,
    pub g: ExpressionMatrix,
    pub gbar: ExpressionMatrix,
    pub l: ExpressionMatrix,
    pub chi: Vec<Expr>,
    pub domain: Vec<(f64, f64)>,
}

macro_rules! pair_data {
    ($t:ty) => {
        impl PairData for $t {
            fn dim(&self) -> usize {
                self.g.dim()
            }
            fn g(&self) -> &ExpressionMatrix {
                &self.g
            }
            fn gbar(&self) -> &ExpressionMatrix {
                &self.gbar
            }
            fn l(&self) -> &ExpressionMatrix {
                &self.l
            }
            fn chi(&self) -> &[Expr] {
                &self.chi
            }
            fn domain(&self) -> &[(f64, f64)] {
                &self.domain
            }
            fn parts(&self) -> Vec<Part> {
                self.parts_impl()
            }
        }
    };
}

impl BuildingBlock {
    fn parts_impl(&self) -> Vec<Part> {
        vec![Part {
            kind: self.kind,
            offset: 0,
            dim: self.g.dim(),
        }]
    }
}

impl GluedPair {
    fn parts_impl(&self) -> Vec<Part> {
        self.parts.clone()
    }
}

pair_data!(BuildingBlock);
pair_data!(GluedPair);

/// Characteristic polynomial coefficients of an expression matrix.
pub fn char_poly(l: &ExpressionMatrix) -> Vec<Expr> {
    l.char_poly()
}

/// Numeric L(g, ḡ) at every node, as a row-major (1,1) tensor field.
pub fn l_tensor(g: &MetricField, gbar: &MetricField) -> Result<crate::tensor::TensorField> {
    use crate::tensor::{field::flatten_mat, Slot, TensorField};
    if g.grid() != gbar.grid() {
        return Err(Error::InvalidArgument("metrics live on different grids".into()));
    }
    let n = g.dim();
    TensorField::from_nodes(g.grid().clone(), vec![Slot::Up, Slot::Down], vec![], |idx| {
        let a = g.value_at_node(idx)?;
        let b = gbar.value_at_node(idx)?;
        let x = &g.grid().point(idx)[..n];
        crate::tensor::metric::check_nondegenerate_at(&a, n, x)?;
        crate::tensor::metric::check_nondegenerate_at(&b, n, x)?;
        let l = metris::l_tensor_at(&a, &b, n).ok_or_else(|| Error::SingularMetric {
            point: x.to_vec(),
            det: 0.0,
        })?;
        Ok(flatten_mat(&l, n))
    })
}

fn poly_mul(a: &[Expr], b: &[Expr]) -> Vec<Expr> {
    let mut out = vec![Expr::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] = out[i + j].add(&x.mul(y));
        }
    }
    out
}

fn check_domain(domain: &[(f64, f64)], dim: usize) -> Result<()> {
    if domain.len() != dim {
        return Err(Error::Dimension(format!("domain has {} axes, block has {dim}", domain.len())));
    }
    for &(lo, hi) in domain {
        if !(lo < hi) {
            return Err(Error::InvalidArgument(format!("empty interval [{lo}, {hi}]")));
        }
    }
    Ok(())
}

fn check_vars(e: &Expr, allowed: &[usize], what: &str) -> Result<()> {
    if let Some(v) = e.free_vars().into_iter().find(|v| !allowed.contains(v)) {
        return Err(Error::InvalidArgument(format!("{what} depends on x{v}")));
    }
    Ok(())
}

/// Sample points of a box: a 5-point lattice plus `extra` seeded random points.
pub fn sample_points(domain: &[(f64, f64)], extra: usize, seed: u64) -> Vec<Vec<f64>> {
    let m = domain.len();
    let count = 5usize;
    let mut pts = Vec::new();
    for idx in 0..count.pow(m as u32) {
        let mut r = idx;
        let mut p = Vec::with_capacity(m);
        for &(lo, hi) in domain.iter().rev() {
            let k = r % count;
            r /= count;
            p.push(lo + (hi - lo) * k as f64 / (count - 1) as f64);
        }
        p.reverse();
        pts.push(p);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..extra {
        pts.push(domain.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect());
    }
    pts
}

fn require<F>(block: &str, domain: &[(f64, f64)], mut ok: F) -> Result<()>
where
    F: FnMut(&[f64]) -> Result<bool>,
{
    for p in sample_points(domain, 200, 7) {
        if !ok(&p)? {
            return Err(Error::precondition(&p, format!("{block} precondition violated")));
        }
    }
    Ok(())
}

fn ev(e: &Expr, p: &[f64]) -> Result<f64> {
    e.eval(p, &Params::new()).map_err(|err| Error::eval(p, err))
}

/// h = ε dx², h̄ = ε dx²/X², L = (X), χ(t) = t − X. Requires X > 0.
pub fn block_1d(x: &Expr, sign: f64, domain: &[(f64, f64)]) -> Result<BuildingBlock> {
    check_domain(domain, 1)?;
    check_vars(x, &[0], "X")?;
    if sign != 1.0 && sign != -1.0 {
        return Err(Error::InvalidArgument("sign must be +1 or -1".into()));
    }
    require("one-dimensional block (X > 0)", domain, |p| Ok(ev(x, p)? > 0.0))?;
    let eps = Expr::num(sign);
    Ok(BuildingBlock {
        kind: BlockKind::OneDim,
        g: ExpressionMatrix::diagonal(std::slice::from_ref(&eps)),
        gbar: ExpressionMatrix::diagonal(&[eps.div(&x.powi(2))]),
        l: ExpressionMatrix::diagonal(std::slice::from_ref(x)),
        chi: vec![x.neg(), Expr::one()],
        domain: domain.to_vec(),
    })
}

/// h̄ = c·h with L = c^{−1/(m+1)} Id. Requires c > 0.
pub fn block_trivial(h: &ExpressionMatrix, c: f64, domain: &[(f64, f64)]) -> Result<BuildingBlock> {
    let m = h.dim();
    check_domain(domain, m)?;
    if !(c > 0.0) {
        return Err(Error::InvalidArgument("trivial block needs c > 0".into()));
    }
    if !h.is_symmetric() {
        return Err(Error::InvalidArgument("h must be symmetric".into()));
    }
    for i in 0..m {
        for j in 0..m {
            check_vars(h.get(i, j), &(0..m).collect::<Vec<_>>(), "h")?;
        }
    }
    require("trivial block (h nondegenerate)", domain, |p| {
        let v = h.eval(p, &Params::new()).map_err(|e| Error::eval(p, e))?;
        let mut g = [[0.0; 4]; 4];
        for i in 0..m {
            for j in 0..m {
                g[i][j] = v[i * m + j];
            }
        }
        Ok(crate::tensor::metric::check_nondegenerate_at(&g, m, p).is_ok())
    })?;
    let lam = Expr::num(c.powf(-1.0 / (m as f64 + 1.0)));
    let l = ExpressionMatrix::identity(m).scale(&lam);
    let chi = l.char_poly();
    Ok(BuildingBlock {
        kind: if m == 2 {
            BlockKind::LiouvilleTrivial
        } else {
            BlockKind::Trivial
        },
        g: h.clone(),
        gbar: h.scale(&Expr::num(c)),
        l,
        chi,
        domain: domain.to_vec(),
    })
}

pub fn block_liouville_trivial(h: &ExpressionMatrix, c: f64, domain: &[(f64, f64)]) -> Result<BuildingBlock> {
    if h.dim() != 2 {
        return Err(Error::Dimension("Liouville trivial block is two-dimensional".into()));
    }
    block_trivial(h, c, domain)
}

/// Complex-Liouville block from the real and imaginary parts of a
/// holomorphic h(x0 + i x1): g = Im h dx dy and its standard partner (halved).
pub fn block_complex_liouville(re: &Expr, im: &Expr, domain: &[(f64, f64)]) -> Result<BuildingBlock> {
    check_domain(domain, 2)?;
    check_vars(re, &[0, 1], "Re h")?;
    check_vars(im, &[0, 1], "Im h")?;
    let e = Params::new();
    require("complex-Liouville block (Cauchy-Riemann, Im h != 0)", domain, |p| {
        let a = re.eval_dual1(p, &e).map_err(|err| Error::eval(p, err))?;
        let b = im.eval_dual1(p, &e).map_err(|err| Error::eval(p, err))?;
        let cr = (a.d[0] - b.d[1]).abs().max((a.d[1] + b.d[0]).abs());
        Ok(cr <= 1e-8 && b.v != 0.0)
    })?;
    let half = Expr::num(0.5);
    let q = im.powi(2).add(&re.powi(2));
    let r = im.div(&q);
    let g = ExpressionMatrix::symmetric_from_upper(2, |i, j| match (i, j) {
        (0, 1) => half.mul(im),
        _ => Expr::zero(),
    });
    let gbar = ExpressionMatrix::symmetric_from_upper(2, |i, j| match (i, j) {
        (0, 0) => half.mul(&r.powi(2)).neg(),
        (0, 1) => half.mul(&re.mul(im)).div(&q.powi(2)),
        _ => half.mul(&r.powi(2)),
    });
    let l = ExpressionMatrix::from_fn(2, |i, j| match (i, j) {
        (0, 1) => im.neg(),
        (1, 0) => im.clone(),
        _ => re.clone(),
    });
    let chi = l.char_poly();
    Ok(BuildingBlock {
        kind: BlockKind::ComplexLiouville,
        g,
        gbar,
        l,
        chi,
        domain: domain.to_vec(),
    })
}

/// Jordan-block pair with Y = Y(x1): g = P dx dy, P = 1 + x0 Y'(x1), and the
/// standard partner scaled by −1/2.
pub fn block_jordan2(y: &Expr, domain: &[(f64, f64)]) -> Result<BuildingBlock> {
    check_domain(domain, 2)?;
    check_vars(y, &[0], "Y")?;
    let dy = in_slot(&y.differentiate(0), 1);
    let y = in_slot(y, 1);
    let pp = Expr::one().add(&Expr::var(0).mul(&dy));
    require("Jordan block (1 + x Y' != 0, Y != 0)", domain, |p| {
        Ok(ev(&pp, p)? != 0.0 && ev(&y, p)? != 0.0)
    })?;
    let half = Expr::num(0.5);
    let g = ExpressionMatrix::symmetric_from_upper(2, |i, j| match (i, j) {
        (0, 1) => half.mul(&pp),
        _ => Expr::zero(),
    });
    let gbar = ExpressionMatrix::symmetric_from_upper(2, |i, j| match (i, j) {
        (0, 0) => Expr::zero(),
        (0, 1) => half.mul(&pp).div(&y.powi(3)),
        _ => half.mul(&pp.powi(2)).div(&y.powi(4)).neg(),
    });
    let l = ExpressionMatrix::from_fn(2, |i, j| match (i, j) {
        (0, 1) => pp.clone(),
        (1, 0) => Expr::zero(),
        _ => y.clone(),
    });
    let chi = l.char_poly();
    Ok(BuildingBlock {
        kind: BlockKind::Jordan2,
        g,
        gbar,
        l,
        chi,
        domain: domain.to_vec(),
    })
}

/// Three-dimensional block with a single 3x3 Jordan block, λ = λ(x2).
pub fn block_petrov3(lambda: &Expr, domain: &[(f64, f64)]) -> Result<BuildingBlock> {
    check_domain(domain, 3)?;
    check_vars(lambda, &[0], "lambda")?;
    let d = in_slot(&lambda.differentiate(0), 2);
    let la = in_slot(lambda, 2);
    require("Petrov block (lambda != 0)", domain, |p| Ok(ev(&la, p)? != 0.0))?;
    let x0 = Expr::var(0);
    let x1 = Expr::var(1);
    let num = Expr::num;
    let g = ExpressionMatrix::symmetric_from_upper(3, |i, j| match (i, j) {
        (0, 2) => num(2.0).mul(&x1).mul(&d).add(&Expr::one()),
        (1, 1) => Expr::one(),
        (1, 2) => x0.mul(&d),
        (2, 2) => x0.powi(2).mul(&d.powi(2)),
        _ => Expr::zero(),
    });
    let l2 = la.powi(2);
    let inv6 = Expr::one().div(&la.powi(6));
    let gbar = ExpressionMatrix::symmetric_from_upper(3, |i, j| {
        let e = match (i, j) {
            (0, 2) => num(2.0).mul(&x1).mul(&l2).mul(&d).add(&l2),
            (1, 1) => l2.clone(),
            (1, 2) => num(2.0)
                .mul(&x1)
                .mul(&la)
                .mul(&d)
                .add(&la)
                .sub(&x0.mul(&l2).mul(&d))
                .neg(),
            (2, 2) => Expr::sum(&[
                num(4.0).mul(&x1.powi(2)).mul(&d.powi(2)),
                num(4.0).mul(&x1).mul(&d),
                num(-4.0).mul(&x0).mul(&x1).mul(&la).mul(&d.powi(2)),
                Expr::one(),
                x0.powi(2).mul(&l2).mul(&d.powi(2)),
                num(-2.0).mul(&x0).mul(&la).mul(&d),
            ]),
            _ => Expr::zero(),
        };
        inv6.mul(&e)
    });
    let l = ExpressionMatrix::from_fn(3, |i, j| match (i, j) {
        (a, b) if a == b => la.clone(),
        (0, 1) => Expr::one(),
        (0, 2) => d.mul(&x0),
        (1, 2) => num(2.0).mul(&d).mul(&x1).add(&Expr::one()),
        _ => Expr::zero(),
    });
    let chi = l.char_poly();
    Ok(BuildingBlock {
        kind: BlockKind::Petrov3,
        g,
        gbar,
        l,
        chi,
        domain: domain.to_vec(),
    })
}

/// Affinely equivalent three-dimensional block: g = 2 dx2 dx0 + h(x1, x2),
/// ḡ = α g + β dx2².
pub fn block_eisenhart3(
    h11: &Expr,
    h12: &Expr,
    h22: &Expr,
    alpha: f64,
    beta: f64,
    domain: &[(f64, f64)],
) -> Result<BuildingBlock> {
    check_domain(domain, 3)?;
    for (e, w) in [(h11, "h11"), (h12, "h12"), (h22, "h22")] {
        check_vars(e, &[1, 2], w)?;
    }
    if alpha == 0.0 {
        return Err(Error::InvalidArgument("Eisenhart block needs alpha != 0".into()));
    }
    require("Eisenhart block (h11 != 0)", domain, |p| Ok(ev(h11, p)? != 0.0))?;
    let g = ExpressionMatrix::symmetric_from_upper(3, |i, j| match (i, j) {
        (0, 2) => Expr::one(),
        (1, 1) => h11.clone(),
        (1, 2) => h12.clone(),
        (2, 2) => h22.clone(),
        _ => Expr::zero(),
    });
    let a = Expr::num(alpha);
    let mut gbar = g.scale(&a);
    gbar = gbar.add(&ExpressionMatrix::symmetric_from_upper(3, |i, j| {
        if (i, j) == (2, 2) {
            Expr::num(beta)
        } else {
            Expr::zero()
        }
    }));
    // L = α^{-1/4}(Id − (β/α) g^{-1} e eᵀ), e = dx2, and g^{-1}e = ∂0.
    let s = alpha.abs().powf(-0.25);
    let l = ExpressionMatrix::from_fn(3, |i, j| match (i, j) {
        (a, b) if a == b => Expr::num(s),
        (0, 2) => Expr::num(-s * beta / alpha),
        _ => Expr::zero(),
    });
    let chi = l.char_poly();
    Ok(BuildingBlock {
        kind: BlockKind::Eisenhart3,
        g,
        gbar,
        l,
        chi,
        domain: domain.to_vec(),
    })
}

/// Options for [`glue`].
#[derive(Clone, Copy, Debug)]
pub struct GlueOptions {
    /// Minimum distance between the sampled spectra.
    pub delta: f64,
    /// Random points per factor on top of the lattice.
    pub random_points: usize,
    pub seed: u64,
}

impl Default for GlueOptions {
    fn default() -> Self {
        GlueOptions {
            delta: 1e-6,
            random_points: 1000,
            seed: 0x5eed,
        }
    }
}

fn spectrum(l: &ExpressionMatrix, p: &[f64]) -> Result<Vec<(f64, f64)>> {
    let m = l.dim();
    let v = l.eval(p, &Params::new()).map_err(|e| Error::eval(p, e))?;
    let a = DMatrix::from_row_slice(m, m, &v);
    Ok(a.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect())
}

/// Sampled spectra of L on the two factors, with the minimum distance between them.
pub fn spectral_gap(a: &impl PairData, b: &impl PairData, opts: &GlueOptions) -> Result<f64> {
    let collect = |p: &dyn Fn(&[f64]) -> Result<Vec<(f64, f64)>>, dom: &[(f64, f64)], seed: u64| {
        let mut all = Vec::new();
        for pt in sample_points(dom, opts.random_points, seed) {
            all.extend(p(&pt)?);
        }
        Ok::<_, Error>(all)
    };
    let sa = collect(&|p| spectrum(a.l(), p), a.domain(), opts.seed)?;
    let sb = collect(&|p| spectrum(b.l(), p), b.domain(), opts.seed ^ 0xabcdef)?;
    let mut gap = f64::INFINITY;
    for x in &sa {
        for y in &sb {
            gap = gap.min(((x.0 - y.0).powi(2) + (x.1 - y.1).powi(2)).sqrt());
        }
    }
    Ok(gap)
}

/// Glue two pairs with disjoint spectra.
///
/// g = diag(h₁χ₂(L₁), h₂χ₁(L₂)), ḡ = diag(h̄₁χ₂(L₁)/det L₂, h̄₂χ₁(L₂)/det L₁).
pub fn glue(a: &impl PairData, b: &impl PairData, opts: &GlueOptions) -> Result<GluedPair> {
    let m1 = a.dim();
    let m2 = b.dim();
    if m1 + m2 > 4 {
        return Err(Error::Dimension(format!("glued dimension {} exceeds 4", m1 + m2)));
    }
    let gap = spectral_gap(a, b, opts)?;
    if !(gap >= opts.delta) {
        return Err(Error::Precondition {
            point: vec![],
            message: format!("spectra of L overlap (sampled gap {gap:e} < {:e})", opts.delta),
        });
    }
    let det_a = a.l().determinant();
    let det_b = b.l().determinant();
    for (det, dom) in [(&det_a, a.domain()), (&det_b, b.domain())] {
        for p in sample_points(dom, opts.random_points.min(200), opts.seed) {
            if ev(det, &p)? == 0.0 {
                return Err(Error::precondition(&p, "characteristic polynomial vanishes at 0"));
            }
        }
    }
    let b_g = b.g().shift_vars(m1);
    let b_gbar = b.gbar().shift_vars(m1);
    let b_l = b.l().shift_vars(m1);
    let b_chi: Vec<Expr> = b.chi().iter().map(|c| c.shift_vars(m1)).collect();
    let det_b = det_b.shift_vars(m1);

    let chi_b_of_la = a.l().poly_eval(&b_chi);
    let chi_a_of_lb = b_l.poly_eval(a.chi());
    let g1 = a.g().matmul(&chi_b_of_la).symmetrized_from_upper();
    let g2 = b_g.matmul(&chi_a_of_lb).symmetrized_from_upper();
    let inv_b = Expr::one().div(&det_b);
    let inv_a = Expr::one().div(&det_a);
    let gb1 = a.gbar().matmul(&chi_b_of_la).scale(&inv_b).symmetrized_from_upper();
    let gb2 = b_gbar.matmul(&chi_a_of_lb).scale(&inv_a).symmetrized_from_upper();

    let mut parts = a.parts();
    parts.extend(b.parts().into_iter().map(|p| Part {
        offset: p.offset + m1,
        ..p
    }));
    let mut domain = a.domain().to_vec();
    domain.extend_from_slice(b.domain());
    Ok(GluedPair {
        parts,
        g: g1.block_diag(&g2),
        gbar: gb1.block_diag(&gb2),
        l: a.l().block_diag(&b_l),
        chi: poly_mul(a.chi(), &b_chi),
        domain,
    })
}

/// Lattice over a pair's domain with `count` points per axis.
pub fn domain_grid(pair: &impl PairData, count: usize) -> Result<ChartGrid> {
    ChartGrid::new(
        pair.domain()
            .iter()
            .map(|&(lo, hi)| Axis { lo, hi, count })
            .collect(),
    )
}

pub fn metric_fields(pair: &impl PairData, grid: &ChartGrid) -> Result<(MetricField, MetricField)> {
    let e = Params::new();
    Ok((
        MetricField::from_expressions(grid.clone(), pair.g(), &e)?,
        MetricField::from_expressions(grid.clone(), pair.gbar(), &e)?,
    ))
}

/// Default verification lattice: 17² for 2-D, 13³ for 3-D, 9⁴ for 4-D.
pub fn default_count(dim: usize) -> usize {
    match dim {
        1 => 33,
        2 => 17,
        3 => 13,
        _ => 9,
    }
}

/// Run the equivalence test on the pair over its domain.
pub fn verify_pair(pair: &impl PairData, count: usize, tol: f64) -> Result<Equivalence> {
    let grid = domain_grid(pair, count)?;
    let (g, gb) = metric_fields(pair, &grid)?;
    metris::is_geodesically_equivalent(&g, &gb, tol)
}

/// The larger of the two metrisability residuals for the pair.
pub fn verify_block(pair: &impl PairData) -> Result<f64> {
    let e = verify_pair(pair, default_count(pair.dim()), 1e-6)?;
    Ok(e.residual.max(e.reverse_residual))
}

/// Max |L_declared − L(g, ḡ)| over a lattice of the domain.
pub fn l_consistency(pair: &impl PairData, count: usize) -> Result<f64> {
    let grid = domain_grid(pair, count)?;
    let (g, gb) = metric_fields(pair, &grid)?;
    let lt = l_tensor(&g, &gb)?;
    let n = pair.dim();
    let mut worst = 0.0f64;
    for idx in 0..grid.len() {
        let p = &grid.point(idx)[..n];
        let decl = pair.l().eval(p, &Params::new()).map_err(|e| Error::eval(p, e))?;
        for (a, b) in decl.iter().zip(lt.node(idx)) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

/// Serializable block recipe: `{"kind": ..., "params": {...}, "domain": [[lo, hi], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum BlockRecipe {
    OneDim { x: String, sign: f64 },
    LiouvilleTrivial { h: [String; 3], c: f64 },
    ComplexLiouville { re: String, im: String },
    Jordan2 { y: String },
    Petrov3 { lambda: String },
    Eisenhart3 { h11: String, h12: String, h22: String, alpha: f64, beta: f64 },
    /// `h` is the upper triangle, row by row.
    Trivial { h: Vec<String>, c: f64, dim: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockFile {
    #[serde(flatten)]
    pub recipe: BlockRecipe,
    pub domain: Vec<[f64; 2]>,
}

fn upper(dim: usize, h: &[String]) -> Result<ExpressionMatrix> {
    if h.len() != dim * (dim + 1) / 2 {
        return Err(Error::InvalidArgument(format!(
            "{} entries for the upper triangle of a {dim}x{dim} metric",
            h.len()
        )));
    }
    let parsed = h.iter().map(|s| parse(s)).collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(ExpressionMatrix::symmetric_from_upper(dim, |i, j| {
        parsed[crate::linalg::sym_index(dim, i, j)].clone()
    }))
}

impl BlockFile {
    pub fn build(&self) -> Result<BuildingBlock> {
        let dom: Vec<(f64, f64)> = self.domain.iter().map(|d| (d[0], d[1])).collect();
        match &self.recipe {
            BlockRecipe::OneDim { x, sign } => block_1d(&parse(x)?, *sign, &dom),
            BlockRecipe::LiouvilleTrivial { h, c } => block_liouville_trivial(&upper(2, h)?, *c, &dom),
            BlockRecipe::ComplexLiouville { re, im } => block_complex_liouville(&parse(re)?, &parse(im)?, &dom),
            BlockRecipe::Jordan2 { y } => block_jordan2(&parse(y)?, &dom),
            BlockRecipe::Petrov3 { lambda } => block_petrov3(&parse(lambda)?, &dom),
            BlockRecipe::Eisenhart3 {
                h11,
                h12,
                h22,
                alpha,
                beta,
            } => block_eisenhart3(&parse(h11)?, &parse(h12)?, &parse(h22)?, *alpha, *beta, &dom),
            BlockRecipe::Trivial { h, c, dim } => block_trivial(&upper(*dim, h)?, *c, &dom),
        }
    }
}

/// Glue blocks left to right. A single block becomes a one-part pair.
pub fn glue_all(blocks: &[BuildingBlock], opts: &GlueOptions) -> Result<GluedPair> {
    let first = blocks
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to glue".into()))?;
    let mut acc = GluedPair {
        parts: first.parts(),
        g: first.g.clone(),
        gbar: first.gbar.clone(),
        l: first.l.clone(),
        chi: first.chi.clone(),
        domain: first.domain.clone(),
    };
    for b in &blocks[1..] {
        acc = glue(&acc, b, opts)?;
    }
    Ok(acc)
}

/// One Lorentz normal form in dimension four.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseDescriptor {
    pub partition: String,
    pub name: String,
    pub blocks: Vec<BlockFile>,
}

impl CaseDescriptor {
    pub fn instantiate(&self) -> Result<GluedPair> {
        let blocks = self.blocks.iter().map(BlockFile::build).collect::<Result<Vec<_>>>()?;
        glue_all(&blocks, &GlueOptions::default())
    }
}

fn one_dim(x: &str, sign: f64, lo: f64, hi: f64) -> BlockFile {
    BlockFile {
        recipe: BlockRecipe::OneDim { x: x.into(), sign },
        domain: vec![[lo, hi]],
    }
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn complex_block() -> BlockFile {
    // h(z) = z²
    BlockFile {
        recipe: BlockRecipe::ComplexLiouville {
            re: "x0^2 - x1^2".into(),
            im: "2*x0*x1".into(),
        },
        domain: vec![[0.5, 1.5], [0.5, 1.5]],
    }
}

fn jordan_block() -> BlockFile {
    BlockFile {
        recipe: BlockRecipe::Jordan2 { y: "x0 + 2".into() },
        domain: vec![[0.5, 1.5], [0.5, 1.5]],
    }
}

fn trivial2(h: [&str; 3], c: f64) -> BlockFile {
    BlockFile {
        recipe: BlockRecipe::LiouvilleTrivial {
            h: [h[0].into(), h[1].into(), h[2].into()],
            c,
        },
        domain: vec![[0.5, 1.5], [0.5, 1.5]],
    }
}

/// The ten Lorentz normal forms grouped by block dimensions (1, 3, 3, 3 cases).
///
/// Parameters are chosen so the spectra are disjoint and the glued metric is
/// Lorentzian on the whole domain.
pub fn lorentz_normal_form_catalog() -> Vec<CaseDescriptor> {
    let case = |partition: &str, name: &str, blocks: Vec<BlockFile>| CaseDescriptor {
        partition: partition.into(),
        name: name.into(),
        blocks,
    };
    let riem2 = ["1 + x1^2", "0.25*x0*x1", "exp(x0)"];
    let lor2 = ["-1 - x1^2", "0.25*x0", "1 + x0^2"];
    vec![
        case(
            "1+1+1+1",
            "levi-civita",
            vec![
                one_dim("x0 + 6", -1.0, 0.5, 1.5),
                one_dim("x0 + 4", -1.0, 0.5, 1.5),
                one_dim("x0 + 2", 1.0, 0.5, 1.5),
                one_dim("x0", -1.0, 0.5, 1.5),
            ],
        ),
        case(
            "1+1+2",
            "complex-liouville",
            vec![one_dim("x0 + 6", 1.0, 0.5, 1.5), one_dim("x0 + 4", -1.0, 0.5, 1.5), complex_block()],
        ),
        case(
            "1+1+2",
            "jordan",
            vec![one_dim("x0 + 6", 1.0, 0.5, 1.5), one_dim("x0 + 4", -1.0, 0.5, 1.5), jordan_block()],
        ),
        case(
            "1+1+2",
            "trivial",
            vec![
                one_dim("x0 + 6", 1.0, 0.5, 1.5),
                one_dim("x0 + 4", 1.0, 0.5, 1.5),
                trivial2(riem2, 8.0),
            ],
        ),
        case("2+2", "trivial+complex-liouville", vec![trivial2(riem2, 8.0), complex_block()]),
        case("2+2", "trivial+jordan", vec![trivial2(riem2, 8.0), jordan_block()]),
        case("2+2", "trivial+trivial", vec![trivial2(lor2, 8.0), trivial2(riem2, 1.0 / 27.0)]),
        case(
            "1+3",
            "petrov",
            vec![
                one_dim("x0", -1.0, 0.5, 1.5),
                BlockFile {
                    recipe: BlockRecipe::Petrov3 { lambda: "x0".into() },
                    domain: vec![[0.5, 1.5], [0.5, 1.5], [2.5, 3.5]],
                },
            ],
        ),
        case(
            "1+3",
            "eisenhart",
            vec![
                one_dim("x0/4", -1.0, 0.5, 1.5),
                BlockFile {
                    recipe: BlockRecipe::Eisenhart3 {
                        h11: "1 + x1^2".into(),
                        h12: "0.5*x1*x2".into(),
                        h22: "x2".into(),
                        alpha: 2.0,
                        beta: 1.0,
                    },
                    domain: vec![[0.5, 1.5], [0.5, 1.5], [0.5, 1.5]],
                },
            ],
        ),
        case(
            "1+3",
            "trivial",
            vec![
                one_dim("x0 + 2", 1.0, 0.5, 1.5),
                BlockFile {
                    recipe: BlockRecipe::Trivial {
                        h: strings(&["1 + x1^2", "0", "0.2*x2", "exp(x0)", "0", "1"]),
                        c: 16.0,
                        dim: 3,
                    },
                    domain: vec![[0.5, 1.5], [0.5, 1.5], [0.5, 1.5]],
                },
            ],
        ),
    ]
}

/// Signature of the glued g at the domain center.
pub fn signature_at_center(pair: &impl PairData) -> Result<Signature> {
    let c: Vec<f64> = pair.domain().iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect();
    let n = pair.dim();
    let v = pair.g().eval(&c, &Params::new()).map_err(|e| Error::eval(&c, e))?;
    let mut g = [[0.0; 4]; 4];
    for i in 0..n {
        for j in 0..n {
            g[i][j] = v[i * n + j];
        }
    }
    Ok(Signature::classify(&g, n))
}

/// FLRW pair with scale factor R(x0); requires R² + c ≠ 0 and c(R² + c) > 0 on the chart.
pub fn flrw_pair(r: &Expr, kappa: f64, c: f64, chart: &ChartGrid) -> Result<(ExpressionMatrix, ExpressionMatrix)> {
    if ![-1.0, 0.0, 1.0].contains(&kappa) {
        return Err(Error::InvalidArgument("kappa must be -1, 0 or 1".into()));
    }
    check_vars(r, &[0], "R")?;
    let ax = chart.axes()[0];
    let dom = [(ax.lo, ax.hi)];
    require("FLRW pair (c (R^2 + c) > 0)", &dom, |p| {
        let rv = ev(r, p)?;
        let s = rv * rv + c;
        Ok(s != 0.0 && c * s > 0.0)
    })?;
    Ok((crate::fixtures::flrw(r, kappa), crate::fixtures::flrw_partner(r, kappa, c)))
}
