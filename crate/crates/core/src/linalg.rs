//! Small dense helpers: rank, least squares and null spaces.

use nalgebra::{DMatrix, DVector, Matrix4};

/// Fixed-size storage for tensors in up to four dimensions.
pub type Vec4 = [f64; 4];
pub type Mat4 = [[f64; 4]; 4];
/// `c[i][j][k]`, e.g. Christoffel symbols Γ^i_{jk}.
pub type Ten3 = [[[f64; 4]; 4]; 4];
/// `r[i][j][k][l]`, e.g. Riemann R^i_{jkl}.
pub type Ten4 = [[[[f64; 4]; 4]; 4]; 4];

pub const ZERO3: Ten3 = [[[0.0; 4]; 4]; 4];
pub const ZERO4: Ten4 = [[[[0.0; 4]; 4]; 4]; 4];

/// Embed an n x n block into a 4 x 4 matrix padded with the identity, so
/// inverses and determinants of the block can be taken with fixed-size code.
pub fn padded(m: &Mat4, n: usize) -> Matrix4<f64> {
    Matrix4::from_fn(|i, j| {
        if i < n && j < n {
            m[i][j]
        } else if i == j {
            1.0
        } else {
            0.0
        }
    })
}

pub fn to_arr(m: &Matrix4<f64>, n: usize) -> Mat4 {
    let mut r = [[0.0; 4]; 4];
    for i in 0..n {
        for j in 0..n {
            r[i][j] = m[(i, j)];
        }
    }
    r
}

/// Inverse of the leading n x n block, or `None` when singular.
pub fn inverse(m: &Mat4, n: usize) -> Option<Mat4> {
    padded(m, n).try_inverse().map(|x| to_arr(&x, n))
}

pub fn determinant(m: &Mat4, n: usize) -> f64 {
    padded(m, n).determinant()
}

pub fn matmul(a: &Mat4, b: &Mat4, n: usize) -> Mat4 {
    let mut r = [[0.0; 4]; 4];
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += a[i][k] * b[k][j];
            }
            r[i][j] = s;
        }
    }
    r
}

pub fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| if x.abs() > m { x.abs() } else { m })
}

fn to_faer(a: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// SVD with singular values in descending order. The thin form has U of
/// size m x k and V of size n x k, k = min(m, n); the full form is square.
///
/// nalgebra's bidiagonal SVD can return an inaccurate factorization when
/// entries span many orders of magnitude, so decompositions go through faer.
fn svd_parts(a: &DMatrix<f64>, thin: bool) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let m = to_faer(a);
    let svd = if thin { m.thin_svd() } else { m.svd() }.expect("SVD converges");
    let (u, v) = (svd.U(), svd.V());
    let s: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    (
        DMatrix::from_fn(u.nrows(), u.ncols(), |i, j| u[(i, j)]),
        s,
        DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)]),
    )
}

/// Square R with RᵀR = AᵀA for tall A: same singular values and right
/// singular vectors, at the cost of a QR step.
fn compress(a: &DMatrix<f64>) -> std::borrow::Cow<'_, DMatrix<f64>> {
    if a.nrows() > a.ncols() {
        std::borrow::Cow::Owned(a.clone().qr().r())
    } else {
        std::borrow::Cow::Borrowed(a)
    }
}

/// Singular values in descending order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s = to_faer(&compress(a)).singular_values().expect("SVD converges");
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Numerical rank with threshold `rel_tol * sigma_max`.
pub fn rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = singular_values(a);
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&x| x > rel_tol * smax).count(),
        _ => 0,
    }
}

/// Minimum-norm least-squares solution with singular values below
/// `rel_tol * sigma_max` truncated. Returns the solution and the rank used.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> (DVector<f64>, usize) {
    let mut x = DVector::zeros(a.ncols());
    if a.nrows() == 0 || a.ncols() == 0 {
        return (x, 0);
    }
    let (u, s, v) = svd_parts(a, true);
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return (x, 0);
    }
    let mut r = 0;
    for (i, &si) in s.iter().enumerate() {
        if si <= rel_tol * smax {
            continue;
        }
        r += 1;
        let c = u.column(i).dot(b) / si;
        x.axpy(c, &v.column(i), 1.0);
    }
    (x, r)
}

/// Orthonormal basis of the numerical null space (columns), threshold
/// `rel_tol * sigma_max`.
pub fn null_space(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = a.ncols();
    if a.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    let r = compress(a);
    // the thin V already spans the whole domain when m >= n
    let (_, s, v) = svd_parts(&r, r.nrows() >= n);
    let smax = s.first().copied().unwrap_or(0.0);
    let cols: Vec<usize> = (0..n)
        .filter(|&i| smax == 0.0 || s.get(i).is_none_or(|&x| x <= rel_tol * smax))
        .collect();
    DMatrix::from_fn(n, cols.len(), |j, c| v[(j, cols[c])])
}

/// Index pairs (i, j) with i <= j in lexicographic order.
pub fn sym_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            v.push((i, j));
        }
    }
    v
}

/// Position of the unordered pair {i, j} in [`sym_pairs`].
pub fn sym_index(n: usize, i: usize, j: usize) -> usize {
    let (a, b) = if i <= j { (i, j) } else { (j, i) };
    a * n - a * a.saturating_sub(1) / 2 + (b - a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sym_index_matches_pairs() {
        for n in 1..=4 {
            for (k, (i, j)) in sym_pairs(n).into_iter().enumerate() {
                assert_eq!(sym_index(n, i, j), k);
                assert_eq!(sym_index(n, j, i), k);
            }
        }
    }

    #[test]
    fn null_space_of_rank_one() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0, -1.0, -2.0, -3.0]);
        assert_eq!(rank(&a, 1e-12), 1);
        let ns = null_space(&a, 1e-12);
        assert_eq!(ns.ncols(), 2);
        assert!((&a * &ns).abs().max() < 1e-12);
    }

    #[test]
    fn wide_null_space() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let ns = null_space(&a, 1e-12);
        assert_eq!(ns.ncols(), 2);
    }

    #[test]
    fn lstsq_min_norm() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0]);
        let (x, r) = lstsq(&a, &b, 1e-12);
        assert_eq!(r, 1);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn lstsq_with_widely_scaled_entries() {
        // sparse 64 x 4 systems whose entries range from 1 down to 1e-32
        let mut state = 0x2545f4914f6cdd1du64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let a = DMatrix::from_fn(64, 4, |_, _| {
                let u = next();
                if u < 0.6 {
                    0.0
                } else {
                    (2.0 * next() - 1.0) * 10f64.powi(-((next() * 4.0) as i32) * 8)
                }
            }) + DMatrix::from_fn(64, 4, |i, j| if i % 4 == j { 1.0 + i as f64 / 64.0 } else { 0.0 });
            let x = DVector::from_fn(4, |_, _| 2.0 * next() - 1.0);
            let b = &a * &x;
            let (y, r) = lstsq(&a, &b, 1e-12);
            assert_eq!(r, 4);
            assert!((&y - &x).amax() < 1e-12);
            let (u, s, v) = svd_parts(&a, true);
            let rec = u * DMatrix::from_diagonal(&DVector::from_vec(s)) * v.transpose();
            assert!((rec - &a).amax() < 1e-12);
        }
    }
}
