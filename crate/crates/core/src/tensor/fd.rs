//! Finite-difference stencils and interpolation on chart grids.

use super::grid::ChartGrid;
use crate::error::Result;
use crate::linalg::{Mat4, Ten3, Vec4};

/// Values that can be combined linearly (component arrays).
pub trait Lin: Copy {
    fn zero() -> Self;
    fn axpy(&mut self, a: f64, x: &Self);
}

impl Lin for f64 {
    fn zero() -> Self {
        0.0
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        *self += a * x;
    }
}

impl Lin for Vec4 {
    fn zero() -> Self {
        [0.0; 4]
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        for i in 0..4 {
            self[i] += a * x[i];
        }
    }
}

impl Lin for Mat4 {
    fn zero() -> Self {
        [[0.0; 4]; 4]
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        for i in 0..4 {
            for j in 0..4 {
                self[i][j] += a * x[i][j];
            }
        }
    }
}

impl Lin for Ten3 {
    fn zero() -> Self {
        [[[0.0; 4]; 4]; 4]
    }
    fn axpy(&mut self, a: f64, x: &Self) {
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..4 {
                    self[i][j][k] += a * x[i][j][k];
                }
            }
        }
    }
}

fn combo<T: Lin>(terms: &[(f64, T)]) -> T {
    let mut r = T::zero();
    for (a, x) in terms {
        r.axpy(*a, x);
    }
    r
}

/// Second-order derivative along `axis` at node `idx`: central in the
/// interior, one-sided three-point at the boundary layers.
pub fn node_derivative<T: Lin>(grid: &ChartGrid, idx: usize, axis: usize, get: impl Fn(usize) -> T) -> T {
    let m = grid.multi_index(idx)[axis];
    let count = grid.axes()[axis].count;
    let s = grid.stride(axis);
    let h = grid.spacing(axis);
    if m > 0 && m + 1 < count {
        combo(&[(0.5 / h, get(idx + s)), (-0.5 / h, get(idx - s))])
    } else if m == 0 {
        combo(&[
            (-1.5 / h, get(idx)),
            (2.0 / h, get(idx + s)),
            (-0.5 / h, get(idx + 2 * s)),
        ])
    } else {
        combo(&[
            (1.5 / h, get(idx)),
            (-2.0 / h, get(idx - s)),
            (0.5 / h, get(idx - 2 * s)),
        ])
    }
}

/// Multilinear interpolation of node values (clamped to the box).
pub fn interpolate<T: Lin>(grid: &ChartGrid, x: &[f64], get: impl Fn(usize) -> T) -> T {
    let n = grid.dim();
    let (cell, frac) = grid.locate(x);
    let mut r = T::zero();
    for corner in 0..(1usize << n) {
        let mut w = 1.0;
        let mut m = [0usize; 4];
        for k in 0..n {
            let up = (corner >> k) & 1 == 1;
            m[k] = cell[k] + up as usize;
            w *= if up { frac[k] } else { 1.0 - frac[k] };
        }
        if w != 0.0 {
            r.axpy(w, &get(grid.flat_index(&m)));
        }
    }
    r
}

fn shifted(x: &[f64], n: usize, moves: &[(usize, f64)]) -> Vec4 {
    let mut p = [0.0; 4];
    p[..n].copy_from_slice(&x[..n]);
    for &(k, d) in moves {
        p[k] += d;
    }
    p
}

/// Fourth-order central first derivatives of a pointwise function.
pub fn jet1_central<T: Lin>(n: usize, x: &[f64], h: f64, f: impl Fn(&[f64]) -> Result<T>) -> Result<[T; 4]> {
    let mut d = [T::zero(); 4];
    for k in 0..n {
        let fp1 = f(&shifted(x, n, &[(k, h)])[..n])?;
        let fm1 = f(&shifted(x, n, &[(k, -h)])[..n])?;
        let fp2 = f(&shifted(x, n, &[(k, 2.0 * h)])[..n])?;
        let fm2 = f(&shifted(x, n, &[(k, -2.0 * h)])[..n])?;
        let c = 1.0 / (12.0 * h);
        d[k] = combo(&[(8.0 * c, fp1), (-8.0 * c, fm1), (-c, fp2), (c, fm2)]);
    }
    Ok(d)
}

/// Fourth-order central first and second derivatives of a pointwise function.
#[allow(clippy::type_complexity)]
pub fn jet2_central<T: Lin>(
    n: usize,
    x: &[f64],
    h: f64,
    f: impl Fn(&[f64]) -> Result<T>,
) -> Result<([T; 4], [[T; 4]; 4])> {
    let f0 = f(&x[..n])?;
    let mut d = [T::zero(); 4];
    let mut dd = [[T::zero(); 4]; 4];
    for k in 0..n {
        let fp1 = f(&shifted(x, n, &[(k, h)])[..n])?;
        let fm1 = f(&shifted(x, n, &[(k, -h)])[..n])?;
        let fp2 = f(&shifted(x, n, &[(k, 2.0 * h)])[..n])?;
        let fm2 = f(&shifted(x, n, &[(k, -2.0 * h)])[..n])?;
        let c = 1.0 / (12.0 * h);
        d[k] = combo(&[(8.0 * c, fp1), (-8.0 * c, fm1), (-c, fp2), (c, fm2)]);
        let c2 = 1.0 / (12.0 * h * h);
        dd[k][k] = combo(&[
            (16.0 * c2, fp1),
            (16.0 * c2, fm1),
            (-c2, fp2),
            (-c2, fm2),
            (-30.0 * c2, f0),
        ]);
    }
    for k in 0..n {
        for l in (k + 1)..n {
            let mixed = |s: f64| -> Result<T> {
                let pp = f(&shifted(x, n, &[(k, s), (l, s)])[..n])?;
                let pm = f(&shifted(x, n, &[(k, s), (l, -s)])[..n])?;
                let mp = f(&shifted(x, n, &[(k, -s), (l, s)])[..n])?;
                let mm = f(&shifted(x, n, &[(k, -s), (l, -s)])[..n])?;
                let c = 1.0 / (4.0 * s * s);
                Ok(combo(&[(c, pp), (-c, pm), (-c, mp), (c, mm)]))
            };
            let d1 = mixed(h)?;
            let d2 = mixed(2.0 * h)?;
            let v = combo(&[(4.0 / 3.0, d1), (-1.0 / 3.0, d2)]);
            dd[k][l] = v;
            dd[l][k] = v;
        }
    }
    Ok((d, dd))
}
