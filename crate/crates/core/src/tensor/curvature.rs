//! Riemann, Ricci and projective Weyl tensors of a connection.
//!
//! Conventions: `R^i_{jkl} = ∂_k Γ^i_{jl} − ∂_l Γ^i_{jk} + Γ^i_{ka}Γ^a_{jl} − Γ^i_{la}Γ^a_{jk}`,
//! `R_{jk} = R^a_{jka}`. The round sphere has `R^θ_{φθφ} = sin²θ`.

use super::connection::{gauge_values, ConnJet, ConnectionField};
use super::field::{flatten_mat, flatten_ten4, Slot, Symmetry, TensorField};
use crate::error::{Error, Result};
use crate::linalg::{Mat4, Ten4, ZERO4};

pub fn riemann(j: &ConnJet) -> Ten4 {
    let n = j.n;
    let g = &j.gamma;
    let mut r = ZERO4;
    for i in 0..n {
        for jj in 0..n {
            for k in 0..n {
                for l in (k + 1)..n {
                    let mut v = j.dgamma[k][i][jj][l] - j.dgamma[l][i][jj][k];
                    for a in 0..n {
                        v += g[i][k][a] * g[a][jj][l] - g[i][l][a] * g[a][jj][k];
                    }
                    r[i][jj][k][l] = v;
                    r[i][jj][l][k] = -v;
                }
            }
        }
    }
    r
}

pub fn ricci(r: &Ten4, n: usize) -> Mat4 {
    let mut ric = [[0.0; 4]; 4];
    for j in 0..n {
        for k in 0..n {
            ric[j][k] = (0..n).map(|a| r[a][j][k][a]).sum();
        }
    }
    ric
}

/// `W^i_{jkl} = R^i_{jkl} − 1/(n−1)(δ^i_l R_{jk} − δ^i_k R_{jl})`.
pub fn weyl_from(r: &Ten4, ric: &Mat4, n: usize) -> Ten4 {
    let c = 1.0 / (n as f64 - 1.0);
    let mut w = *r;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let dl = if i == l { ric[j][k] } else { 0.0 };
                    let dk = if i == k { ric[j][l] } else { 0.0 };
                    w[i][j][k][l] -= c * (dl - dk);
                }
            }
        }
    }
    w
}

/// Projective Weyl tensor, computed in the trace-free gauge (Γ^a_{ak} = 0),
/// where the Ricci tensor is symmetric.
pub fn projective_weyl_at(j: &ConnJet) -> Ten4 {
    let tf = trace_free_jet(j);
    let r = riemann(&tf);
    let ric = ricci(&r, tf.n);
    weyl_from(&r, &ric, tf.n)
}

/// The jet shifted by φ_k = −Γ^a_{ak}/(n+1).
pub fn trace_free_jet(j: &ConnJet) -> ConnJet {
    let n = j.n;
    let c = -1.0 / (n as f64 + 1.0);
    let mut out = j.clone();
    let mut phi = [0.0; 4];
    for (k, p) in phi.iter_mut().enumerate().take(n) {
        *p = c * (0..n).map(|a| j.gamma[a][a][k]).sum::<f64>();
    }
    out.gamma = gauge_values(&j.gamma, &phi, n);
    for m in 0..n {
        let mut dphi = [0.0; 4];
        for (k, p) in dphi.iter_mut().enumerate().take(n) {
            *p = c * (0..n).map(|a| j.dgamma[m][a][a][k]).sum::<f64>();
        }
        out.dgamma[m] = gauge_values(&j.dgamma[m], &dphi, n);
    }
    out
}

fn riemann_slots() -> (Vec<Slot>, Vec<Symmetry>) {
    (
        vec![Slot::Up, Slot::Down, Slot::Down, Slot::Down],
        vec![Symmetry::Antisymmetric(2, 3)],
    )
}

/// Riemann and Ricci tensors at every node.
pub fn curvature(gamma: &ConnectionField) -> Result<(TensorField, TensorField)> {
    let n = gamma.dim();
    let grid = gamma.grid().clone();
    let (slots, syms) = riemann_slots();
    let riem = TensorField::from_nodes(grid.clone(), slots, syms, |idx| {
        Ok(flatten_ten4(&riemann(&gamma.jet_at_node(idx)?), n))
    })?;
    let ric = TensorField::from_nodes(grid, vec![Slot::Down, Slot::Down], vec![], |idx| {
        let r = crate::tensor::field::unflatten_ten4(riem.node(idx), n);
        Ok(flatten_mat(&ricci(&r, n), n))
    })?;
    Ok((riem, ric))
}

pub fn projective_weyl(gamma: &ConnectionField) -> Result<TensorField> {
    let n = gamma.dim();
    if n < 2 {
        return Err(Error::Dimension("projective Weyl tensor needs n >= 2".into()));
    }
    let (slots, syms) = riemann_slots();
    TensorField::from_nodes(gamma.grid().clone(), slots, syms, |idx| {
        Ok(flatten_ten4(&projective_weyl_at(&gamma.jet_at_node(idx)?), n))
    })
}

/// Largest |W^a_{jka}| over all j, k.
pub fn weyl_trace(w: &Ten4, n: usize) -> f64 {
    let mut m = 0.0f64;
    for j in 0..n {
        for k in 0..n {
            let t: f64 = (0..n).map(|a| w[a][j][k][a]).sum();
            m = m.max(t.abs());
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::expr::{parse, Expr, ExpressionMatrix, Params};
    use crate::tensor::connection::{ConnectionModel, LeviCivita};
    use crate::tensor::metric::ExprMetric;

    #[test]
    fn sphere_sign_and_vanishing_weyl() {
        let m = ExpressionMatrix::diagonal(&[Expr::one(), parse("sin(x0)^2").unwrap()]);
        let lc = LeviCivita::new(Arc::new(ExprMetric::new(&m, &Params::new()).unwrap()));
        let th = 0.9f64;
        let j = lc.jet(&[th, 0.2]).unwrap();
        let r = riemann(&j);
        assert!((r[0][1][0][1] - th.sin().powi(2)).abs() < 1e-13);
        let ric = ricci(&r, 2);
        // with R_{jk} = R^a_{jka} the unit sphere has Ric = −g
        assert!((ric[0][0] + 1.0).abs() < 1e-13);
        assert!((ric[1][1] + th.sin().powi(2)).abs() < 1e-13);
        let w = projective_weyl_at(&j);
        assert!(w.iter().flatten().flatten().flatten().all(|x| x.abs() < 1e-13));
    }
}
