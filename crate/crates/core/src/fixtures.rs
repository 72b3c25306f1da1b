//! Ready-made metrics and charts.
//!
//! Coordinates are always `x0..x{n-1}`. Functions of one variable (X, Y, λ, R)
//! are passed as expressions in `x0` and moved to their slot here.

use crate::error::Result;
use crate::expr::{parse, parse_with, Expr, ExpressionMatrix, Params, Symbols};
use crate::linalg::Ten4;
use crate::tensor::{Axis, ChartGrid, MetricField};

fn p(s: &str) -> Expr {
    parse(s).expect("fixture expression parses")
}

/// The function `f(x0)` rewritten as a function of coordinate `slot`.
pub fn in_slot(f: &Expr, slot: usize) -> Expr {
    f.map_vars(&|_| slot)
}

pub fn flat(n: usize) -> ExpressionMatrix {
    ExpressionMatrix::identity(n)
}

/// Minkowski diag(−1, 1, 1, 1).
pub fn minkowski() -> ExpressionMatrix {
    ExpressionMatrix::diagonal(&[Expr::num(-1.0), Expr::one(), Expr::one(), Expr::one()])
}

/// Unit sphere dθ² + sin²θ dφ² in (θ, φ) = (x0, x1).
pub fn sphere() -> ExpressionMatrix {
    ExpressionMatrix::diagonal(&[Expr::one(), p("sin(x0)^2")])
}

pub fn sphere_chart(count: usize) -> Result<ChartGrid> {
    ChartGrid::uniform(&[0.5, 0.0], &[2.5, 2.0], count)
}

/// Schwarzschild in (t, r, θ, φ) with mass parameter `M`.
pub fn schwarzschild() -> ExpressionMatrix {
    let sym = Symbols::coords(4).param("M");
    let q = |s: &str| parse_with(s, &sym).expect("fixture expression parses");
    ExpressionMatrix::diagonal(&[
        q("-(1 - 2*M/x1)"),
        q("1/(1 - 2*M/x1)"),
        p("x1^2"),
        p("x1^2*sin(x2)^2"),
    ])
}

pub fn schwarzschild_params(mass: f64) -> Params {
    Params::from([("M".to_string(), mass)])
}

/// r ∈ [3M, 5M], θ ∈ [π/4, 3π/4], t, φ ∈ [0, 1].
pub fn schwarzschild_chart(mass: f64, count: usize) -> Result<ChartGrid> {
    let q = std::f64::consts::FRAC_PI_4;
    ChartGrid::uniform(&[0.0, 3.0 * mass, q, 0.0], &[1.0, 5.0 * mass, 3.0 * q, 1.0], count)
}

pub fn schwarzschild_field(mass: f64, count: usize) -> Result<MetricField> {
    MetricField::from_expressions(
        schwarzschild_chart(mass, count)?,
        &schwarzschild(),
        &schwarzschild_params(mass),
    )
}

/// Dini pair on (x0, x1): g = (X − Y)(dx² + dy²),
/// ḡ = (1/Y − 1/X)(dx²/X + dy²/Y). `x`, `y` are functions of `x0`.
pub fn dini_pair(x: &Expr, y: &Expr) -> (ExpressionMatrix, ExpressionMatrix) {
    let xx = in_slot(x, 0);
    let yy = in_slot(y, 1);
    let d = xx.sub(&yy);
    let g = ExpressionMatrix::diagonal(&[d.clone(), d]);
    let f = Expr::one().div(&yy).sub(&Expr::one().div(&xx));
    let gb = ExpressionMatrix::diagonal(&[f.div(&xx), f.div(&yy)]);
    (g, gb)
}

/// The four-dimensional Levi-Civita pair, `xs[i]` a function of `x0` placed in slot i.
pub fn levi_civita_pair(xs: &[Expr; 4]) -> (ExpressionMatrix, ExpressionMatrix) {
    let x: Vec<Expr> = xs.iter().enumerate().map(|(i, f)| in_slot(f, i)).collect();
    let prod_all = Expr::product(&x);
    let mut g = Vec::new();
    let mut gb = Vec::new();
    for i in 0..4 {
        let mut terms = Vec::new();
        for j in 0..4 {
            if j != i {
                let (a, b) = if i < j { (i, j) } else { (j, i) };
                terms.push(x[a].sub(&x[b]));
            }
        }
        let gi = Expr::product(&terms);
        gb.push(gi.div(&x[i].mul(&prod_all)));
        g.push(gi);
    }
    (ExpressionMatrix::diagonal(&g), ExpressionMatrix::diagonal(&gb))
}

/// The general Levi-Civita form with r one-dimensional blocks:
/// g = Σ P_i dx_i², ḡ = Σ P_i ρ_i dx_i², P_i = ε_i ∏_{j≠i}(X_i − X_j),
/// ρ_i = 1/(X_i ∏ X_α).
pub fn levi_civita_general(xs: &[Expr], signs: &[f64]) -> (ExpressionMatrix, ExpressionMatrix) {
    let x: Vec<Expr> = xs.iter().enumerate().map(|(i, f)| in_slot(f, i)).collect();
    let prod_all = Expr::product(&x);
    let mut g = Vec::new();
    let mut gb = Vec::new();
    for i in 0..x.len() {
        let terms: Vec<Expr> = (0..x.len()).filter(|&j| j != i).map(|j| x[i].sub(&x[j])).collect();
        let pi = Expr::num(signs[i]).mul(&Expr::product(&terms));
        gb.push(pi.div(&x[i].mul(&prod_all)));
        g.push(pi);
    }
    (ExpressionMatrix::diagonal(&g), ExpressionMatrix::diagonal(&gb))
}

fn spatial_factor(kappa: f64) -> Expr {
    Expr::one().add(&Expr::num(kappa / 4.0).mul(&p("x1^2 + x2^2 + x3^2")))
}

/// FLRW: g = −dt² + R² |dx|²/(1 + κ|x|²/4) with R a function of `x0` = t.
pub fn flrw(r: &Expr, kappa: f64) -> ExpressionMatrix {
    let r = in_slot(r, 0);
    let s = r.powi(2).div(&spatial_factor(kappa));
    ExpressionMatrix::diagonal(&[Expr::num(-1.0), s.clone(), s.clone(), s])
}

/// The partner ḡ = −dt²/(R² + c)² + R²/(c(R² + c)) |dx|²/(1 + κ|x|²/4).
pub fn flrw_partner(r: &Expr, kappa: f64, c: f64) -> ExpressionMatrix {
    let r = in_slot(r, 0);
    let r2c = r.powi(2).add(&Expr::num(c));
    let tt = Expr::num(-1.0).div(&r2c.powi(2));
    let s = r
        .powi(2)
        .div(&Expr::num(c).mul(&r2c))
        .div(&spatial_factor(kappa));
    ExpressionMatrix::diagonal(&[tt, s.clone(), s.clone(), s])
}

/// t ∈ [1, 2], spatial coordinates in [0, 1].
pub fn flrw_chart(count: usize) -> Result<ChartGrid> {
    ChartGrid::uniform(&[1.0, 0.0, 0.0, 0.0], &[2.0, 1.0, 1.0, 1.0], count)
}

/// The two 4-D matrices claimed equivalent in the literature (coordinates
/// x1..x4 of the source are x0..x3 here; `omega` is a function of `x0`).
pub fn aminova_pair(omega: &Expr) -> (ExpressionMatrix, ExpressionMatrix) {
    let w = in_slot(omega, 3);
    let s = |t: &str| p(t);
    let a = Expr::num(3.0).mul(&s("x2").add(&w));
    let g = ExpressionMatrix::symmetric_from_upper(4, |i, j| match (i, j) {
        (0, 3) => a.clone(),
        (1, 2) => Expr::one(),
        (1, 3) => s("2*x1"),
        (2, 3) => s("x0"),
        (3, 3) => s("4*x0*x1"),
        _ => Expr::zero(),
    });
    // q = −3x3 − 3ω + 2x2x4 in source numbering
    let q = a.neg().add(&s("2*x1*x3"));
    let gb = ExpressionMatrix::symmetric_from_upper(4, |i, j| match (i, j) {
        (0, 3) => a.div(&s("x3^5")),
        (1, 2) => s("2/x3^5"),
        (1, 3) => q.div(&s("x3^6")),
        (2, 2) => s("-1/x3^6"),
        (2, 3) => q.neg().add(&s("x0*x3^2")).div(&s("x3^7")),
        (3, 3) => q
            .mul(&s("2*x0*x3^2").add(&a).sub(&s("2*x1*x3")))
            .div(&s("x3^8")),
        _ => Expr::zero(),
    });
    (g, gb)
}

/// x3 ∈ [1.5, 2.5], other coordinates in [1, 2].
pub fn aminova_chart(count: usize) -> Result<ChartGrid> {
    ChartGrid::uniform(&[1.0, 1.0, 1.0, 1.5], &[2.0, 2.0, 2.0, 2.5], count)
}

/// The algebraic curvature tensor R_{ijkl} = h_ik h_jl − h_il h_jk + H_ik H_jl − H_il H_jk
/// with h = diag(1, 2, −1, 0), H = diag(0, 0, 1, 1).
pub fn rigidity_curvature() -> Ten4 {
    let h = [1.0, 2.0, -1.0, 0.0];
    let hh = [0.0, 0.0, 1.0, 1.0];
    let d = |v: &[f64; 4], a: usize, b: usize| if a == b { v[a] } else { 0.0 };
    let mut r = [[[[0.0; 4]; 4]; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                for l in 0..4 {
                    r[i][j][k][l] = d(&h, i, k) * d(&h, j, l) - d(&h, i, l) * d(&h, j, k)
                        + d(&hh, i, k) * d(&hh, j, l)
                        - d(&hh, i, l) * d(&hh, j, k);
                }
            }
        }
    }
    r
}

/// A metric whose curvature at the origin is [`rigidity_curvature`]:
/// g_ij = δ_ij − (1/3) R_{ikjl} x^k x^l (normal-coordinate expansion).
pub fn rigidity_metric() -> ExpressionMatrix {
    let r = rigidity_curvature();
    ExpressionMatrix::symmetric_from_upper(4, |i, j| {
        let mut e = if i == j { Expr::one() } else { Expr::zero() };
        for k in 0..4 {
            for l in 0..4 {
                let c = r[i][k][j][l];
                if c != 0.0 {
                    e = e.add(&Expr::num(-c / 3.0).mul(&Expr::var(k)).mul(&Expr::var(l)));
                }
            }
        }
        e
    })
}

/// A small box around the origin.
pub fn rigidity_chart(count: usize) -> Result<ChartGrid> {
    ChartGrid::uniform(&[-0.1; 4], &[0.1; 4], count)
}

/// Build a chart from per-axis (lo, hi) pairs with a common count.
pub fn chart(bounds: &[(f64, f64)], count: usize) -> Result<ChartGrid> {
    ChartGrid::new(bounds.iter().map(|&(lo, hi)| Axis { lo, hi, count }).collect())
}
