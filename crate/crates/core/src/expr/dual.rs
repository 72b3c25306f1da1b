//! Forward-mode derivatives in up to four variables.
//!
//! [`Dual1`] carries a value and gradient, [`Dual2`] additionally the Hessian.
//! Both are exact (no truncation error) and are what the tensor layer uses to
//! obtain metric jets from expression components.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub const N: usize = 4;

/// Arithmetic needed by the expression evaluator.
pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(c: f64) -> Self;
    fn variable(value: f64, index: usize) -> Self;
    fn value(&self) -> f64;
    /// True when all derivative parts vanish.
    fn is_constant(&self) -> bool;
    fn all_finite(&self) -> bool;
    /// Apply a scalar function given f, f', f'' at the value.
    fn chain(self, f0: f64, f1: f64, f2: f64) -> Self;

    fn sin(self) -> Self {
        let v = self.value();
        self.chain(v.sin(), v.cos(), -v.sin())
    }
    fn cos(self) -> Self {
        let v = self.value();
        self.chain(v.cos(), -v.sin(), -v.cos())
    }
    fn tan(self) -> Self {
        let t = self.value().tan();
        let s = 1.0 + t * t;
        self.chain(t, s, 2.0 * t * s)
    }
    fn exp(self) -> Self {
        let e = self.value().exp();
        self.chain(e, e, e)
    }
    fn ln(self) -> Self {
        let v = self.value();
        self.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
    }
    fn sqrt(self) -> Self {
        let v = self.value();
        let s = v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * v))
    }
    fn abs(self) -> Self {
        let v = self.value();
        self.chain(v.abs(), v.signum(), 0.0)
    }
    /// Power with a constant exponent.
    fn powf(self, c: f64) -> Self {
        let v = self.value();
        if c == 2.0 {
            return self * self;
        }
        let p = if c.fract() == 0.0 && c.abs() < 64.0 {
            v.powi(c as i32)
        } else {
            v.powf(c)
        };
        let d1 = if c == 0.0 { 0.0 } else { c * pow_fast(v, c - 1.0) };
        let d2 = if c == 0.0 || c == 1.0 {
            0.0
        } else {
            c * (c - 1.0) * pow_fast(v, c - 2.0)
        };
        self.chain(p, d1, d2)
    }
}

fn pow_fast(v: f64, c: f64) -> f64 {
    if c.fract() == 0.0 && c.abs() < 64.0 {
        v.powi(c as i32)
    } else {
        v.powf(c)
    }
}

impl Scalar for f64 {
    fn constant(c: f64) -> Self {
        c
    }
    fn variable(value: f64, _: usize) -> Self {
        value
    }
    fn value(&self) -> f64 {
        *self
    }
    fn is_constant(&self) -> bool {
        true
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
    fn chain(self, f0: f64, _: f64, _: f64) -> Self {
        f0
    }
    fn powf(self, c: f64) -> Self {
        pow_fast(self, c)
    }
}

/// Value and gradient.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual1 {
    pub v: f64,
    pub d: [f64; N],
}

impl Add for Dual1 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut d = self.d;
        for i in 0..N {
            d[i] += o.d[i];
        }
        Dual1 { v: self.v + o.v, d }
    }
}

impl Sub for Dual1 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let mut d = self.d;
        for i in 0..N {
            d[i] -= o.d[i];
        }
        Dual1 { v: self.v - o.v, d }
    }
}

impl Neg for Dual1 {
    type Output = Self;
    fn neg(self) -> Self {
        Dual1 {
            v: -self.v,
            d: self.d.map(|x| -x),
        }
    }
}

impl Mul for Dual1 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = self.d[i] * o.v + self.v * o.d[i];
        }
        Dual1 { v: self.v * o.v, d }
    }
}

impl Div for Dual1 {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let inv = 1.0 / o.v;
        let q = self.v * inv;
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = (self.d[i] - q * o.d[i]) * inv;
        }
        Dual1 { v: q, d }
    }
}

impl Scalar for Dual1 {
    fn constant(c: f64) -> Self {
        Dual1 { v: c, d: [0.0; N] }
    }
    fn variable(value: f64, index: usize) -> Self {
        let mut d = [0.0; N];
        d[index] = 1.0;
        Dual1 { v: value, d }
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn is_constant(&self) -> bool {
        self.d.iter().all(|x| *x == 0.0)
    }
    fn all_finite(&self) -> bool {
        self.v.is_finite() && self.d.iter().all(|x| x.is_finite())
    }
    fn chain(self, f0: f64, f1: f64, _: f64) -> Self {
        Dual1 {
            v: f0,
            d: self.d.map(|x| f1 * x),
        }
    }
}

/// Value, gradient and Hessian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dual2 {
    pub v: f64,
    pub d: [f64; N],
    pub dd: [[f64; N]; N],
}

impl Add for Dual2 {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        self.v += o.v;
        for i in 0..N {
            self.d[i] += o.d[i];
            for j in 0..N {
                self.dd[i][j] += o.dd[i][j];
            }
        }
        self
    }
}

impl Sub for Dual2 {
    type Output = Self;
    fn sub(mut self, o: Self) -> Self {
        self.v -= o.v;
        for i in 0..N {
            self.d[i] -= o.d[i];
            for j in 0..N {
                self.dd[i][j] -= o.dd[i][j];
            }
        }
        self
    }
}

impl Neg for Dual2 {
    type Output = Self;
    fn neg(mut self) -> Self {
        self.v = -self.v;
        for i in 0..N {
            self.d[i] = -self.d[i];
            for j in 0..N {
                self.dd[i][j] = -self.dd[i][j];
            }
        }
        self
    }
}

impl Mul for Dual2 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut r = Dual2::constant(self.v * o.v);
        for i in 0..N {
            r.d[i] = self.d[i] * o.v + self.v * o.d[i];
            for j in 0..N {
                r.dd[i][j] = self.dd[i][j] * o.v
                    + self.d[i] * o.d[j]
                    + self.d[j] * o.d[i]
                    + self.v * o.dd[i][j];
            }
        }
        r
    }
}

impl Div for Dual2 {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let v = o.v;
        let recip = o.chain(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v));
        self * recip
    }
}

impl Scalar for Dual2 {
    fn constant(c: f64) -> Self {
        Dual2 {
            v: c,
            d: [0.0; N],
            dd: [[0.0; N]; N],
        }
    }
    fn variable(value: f64, index: usize) -> Self {
        let mut r = Dual2::constant(value);
        r.d[index] = 1.0;
        r
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn is_constant(&self) -> bool {
        self.d.iter().all(|x| *x == 0.0) && self.dd.iter().flatten().all(|x| *x == 0.0)
    }
    fn all_finite(&self) -> bool {
        self.v.is_finite()
            && self.d.iter().all(|x| x.is_finite())
            && self.dd.iter().flatten().all(|x| x.is_finite())
    }
    fn chain(self, f0: f64, f1: f64, f2: f64) -> Self {
        let mut r = Dual2::constant(f0);
        for i in 0..N {
            r.d[i] = f1 * self.d[i];
            for j in 0..N {
                r.dd[i][j] = f1 * self.dd[i][j] + f2 * self.d[i] * self.d[j];
            }
        }
        r
    }
}
