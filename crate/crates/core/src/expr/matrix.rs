use super::{EvalError, Expr, Params};

/// A square matrix of expressions.
///
/// When `symmetric` is set, entry `(i, j)` and `(j, i)` hold the same tree.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpressionMatrix {
    n: usize,
    entries: Vec<Expr>,
    symmetric: bool,
}

impl ExpressionMatrix {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Expr) -> Self {
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                entries.push(f(i, j));
            }
        }
        ExpressionMatrix {
            n,
            entries,
            symmetric: false,
        }
    }

    /// Build a symmetric matrix from its upper triangle (`f` is called for `i <= j`).
    pub fn symmetric_from_upper(n: usize, mut f: impl FnMut(usize, usize) -> Expr) -> Self {
        let mut entries = vec![Expr::zero(); n * n];
        for i in 0..n {
            for j in i..n {
                let e = f(i, j);
                entries[i * n + j] = e.clone();
                entries[j * n + i] = e;
            }
        }
        ExpressionMatrix {
            n,
            entries,
            symmetric: true,
        }
    }

    pub fn diagonal(diag: &[Expr]) -> Self {
        let n = diag.len();
        Self::symmetric_from_upper(n, |i, j| if i == j { diag[i].clone() } else { Expr::zero() })
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![Expr::one(); n])
    }

    pub fn zeros(n: usize) -> Self {
        Self::symmetric_from_upper(n, |_, _| Expr::zero())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn get(&self, i: usize, j: usize) -> &Expr {
        &self.entries[i * self.n + j]
    }

    /// Mirror the upper triangle and mark the matrix symmetric.
    pub fn symmetrized_from_upper(&self) -> Self {
        Self::symmetric_from_upper(self.n, |i, j| self.get(i, j).clone())
    }

    /// Check the structural symmetry contract.
    pub fn check_symmetry(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> Self {
        ExpressionMatrix {
            n: self.n,
            entries: self.entries.iter().map(f).collect(),
            symmetric: self.symmetric,
        }
    }

    pub fn scale(&self, c: &Expr) -> Self {
        self.map(|e| c.mul(e))
    }

    pub fn add(&self, o: &Self) -> Self {
        assert_eq!(self.n, o.n);
        let mut r = Self::from_fn(self.n, |i, j| self.get(i, j).add(o.get(i, j)));
        r.symmetric = self.symmetric && o.symmetric;
        r
    }

    pub fn matmul(&self, o: &Self) -> Self {
        assert_eq!(self.n, o.n);
        let n = self.n;
        Self::from_fn(n, |i, j| {
            let terms: Vec<Expr> = (0..n).map(|k| self.get(i, k).mul(o.get(k, j))).collect();
            Expr::sum(&terms)
        })
    }

    pub fn transpose(&self) -> Self {
        let mut r = Self::from_fn(self.n, |i, j| self.get(j, i).clone());
        r.symmetric = self.symmetric;
        r
    }

    pub fn trace(&self) -> Expr {
        let d: Vec<Expr> = (0..self.n).map(|i| self.get(i, i).clone()).collect();
        Expr::sum(&d)
    }

    /// Determinant by cofactor expansion (intended for n <= 4).
    pub fn determinant(&self) -> Expr {
        let idx: Vec<usize> = (0..self.n).collect();
        self.minor(&idx, &idx)
    }

    fn minor(&self, rows: &[usize], cols: &[usize]) -> Expr {
        match rows.len() {
            0 => Expr::one(),
            1 => self.get(rows[0], cols[0]).clone(),
            _ => {
                let r0 = rows[0];
                let rest: Vec<usize> = rows[1..].to_vec();
                let mut acc = Expr::zero();
                for (k, &c) in cols.iter().enumerate() {
                    let a = self.get(r0, c);
                    if a.is_zero() {
                        continue;
                    }
                    let sub: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
                    let term = a.mul(&self.minor(&rest, &sub));
                    acc = if k % 2 == 0 { acc.add(&term) } else { acc.sub(&term) };
                }
                acc
            }
        }
    }

    /// Coefficients `c[0..=n]` of `det(t Id - A) = sum c[k] t^k`.
    pub fn char_poly(&self) -> Vec<Expr> {
        let n = self.n;
        let mut c = vec![Expr::zero(); n + 1];
        c[n] = Expr::one();
        for k in 1..=n {
            // sum of k x k principal minors
            let mut e = Expr::zero();
            for subset in subsets(n, k) {
                e = e.add(&self.minor(&subset, &subset));
            }
            c[n - k] = if k % 2 == 0 { e } else { e.neg() };
        }
        c
    }

    /// Evaluate `p(A) = sum coeffs[k] A^k` by Horner's scheme.
    pub fn poly_eval(&self, coeffs: &[Expr]) -> Self {
        let n = self.n;
        let mut acc = Self::zeros(n);
        acc.symmetric = false;
        for c in coeffs.iter().rev() {
            acc = acc.matmul(self).add(&Self::identity(n).scale(c));
        }
        acc
    }

    /// Block-diagonal sum.
    pub fn block_diag(&self, o: &Self) -> Self {
        let n = self.n + o.n;
        let mut r = Self::from_fn(n, |i, j| {
            if i < self.n && j < self.n {
                self.get(i, j).clone()
            } else if i >= self.n && j >= self.n {
                o.get(i - self.n, j - self.n).clone()
            } else {
                Expr::zero()
            }
        });
        r.symmetric = self.symmetric && o.symmetric;
        r
    }

    pub fn shift_vars(&self, offset: usize) -> Self {
        self.map(|e| e.shift_vars(offset))
    }

    pub fn bind(&self, params: &Params) -> Result<Self, EvalError> {
        let entries = self
            .entries
            .iter()
            .map(|e| e.bind(params))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ExpressionMatrix {
            n: self.n,
            entries,
            symmetric: self.symmetric,
        })
    }

    /// Row-major numeric values at a point.
    pub fn eval(&self, point: &[f64], params: &Params) -> Result<Vec<f64>, EvalError> {
        self.entries.iter().map(|e| e.eval(point, params)).collect()
    }
}

/// All increasing index subsets of size k of 0..n.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}
