use thiserror::Error;

use super::dual::{Dual1, Dual2, Scalar, N};
use super::{BinOp, Expr, Func, Node, Params};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound name `{0}`")]
    UnboundName(String),
    #[error("variable x{0} is outside the evaluation point")]
    MissingVariable(usize),
    #[error("division by zero")]
    DivisionByZero,
    #[error("domain error: {0}")]
    Domain(&'static str),
    #[error("non-finite result")]
    NonFinite,
}

impl Expr {
    /// Evaluate at a point, looking parameters up in `params`.
    pub fn eval(&self, point: &[f64], params: &Params) -> Result<f64, EvalError> {
        let vars: Vec<f64> = point.to_vec();
        eval_node(self, &vars, params)
    }

    /// Value and gradient with respect to the first `point.len()` variables (at most 4).
    pub fn eval_dual1(&self, point: &[f64], params: &Params) -> Result<Dual1, EvalError> {
        let vars: Vec<Dual1> = seed(point);
        eval_node(self, &vars, params)
    }

    /// Value, gradient and Hessian with respect to the point's variables (at most 4).
    pub fn eval_dual2(&self, point: &[f64], params: &Params) -> Result<Dual2, EvalError> {
        let vars: Vec<Dual2> = seed(point);
        eval_node(self, &vars, params)
    }

    /// Generic evaluation over any [`Scalar`].
    pub fn eval_scalar<T: Scalar>(&self, point: &[T], params: &Params) -> Result<T, EvalError> {
        eval_node(self, point, params)
    }
}

fn seed<T: Scalar>(point: &[f64]) -> Vec<T> {
    assert!(point.len() <= N, "dual evaluation supports at most {N} variables");
    point
        .iter()
        .enumerate()
        .map(|(i, &x)| T::variable(x, i))
        .collect()
}

fn finite<T: Scalar>(x: T) -> Result<T, EvalError> {
    if x.all_finite() {
        Ok(x)
    } else {
        Err(EvalError::NonFinite)
    }
}

fn eval_node<T: Scalar>(e: &Expr, vars: &[T], params: &Params) -> Result<T, EvalError> {
    match e.node() {
        Node::Num(c) => Ok(T::constant(*c)),
        Node::Var(i) => vars.get(*i).copied().ok_or(EvalError::MissingVariable(*i)),
        Node::Param(name) => params
            .get(name.as_ref())
            .map(|v| T::constant(*v))
            .ok_or_else(|| EvalError::UnboundName(name.to_string())),
        Node::Neg(a) => Ok(-eval_node(a, vars, params)?),
        Node::Call(f, a) => {
            let x = eval_node(a, vars, params)?;
            let v = x.value();
            let y = match f {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Tan => {
                    if v.cos() == 0.0 {
                        return Err(EvalError::Domain("tan at a pole"));
                    }
                    x.tan()
                }
                Func::Exp => x.exp(),
                Func::Log => {
                    if v <= 0.0 {
                        return Err(EvalError::Domain("log of a nonpositive number"));
                    }
                    x.ln()
                }
                Func::Sqrt => {
                    if v < 0.0 {
                        return Err(EvalError::Domain("sqrt of a negative number"));
                    }
                    x.sqrt()
                }
                Func::Abs => x.abs(),
            };
            finite(y)
        }
        Node::Bin(op, a, b) => {
            let x = eval_node(a, vars, params)?;
            let y = eval_node(b, vars, params)?;
            let r = match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div => {
                    if y.value() == 0.0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    x / y
                }
                BinOp::Pow => pow(x, y)?,
            };
            finite(r)
        }
    }
}

fn pow<T: Scalar>(base: T, exp: T) -> Result<T, EvalError> {
    let b = base.value();
    if exp.is_constant() {
        let c = exp.value();
        if b == 0.0 && c < 0.0 {
            return Err(EvalError::DivisionByZero);
        }
        if b < 0.0 && c.fract() != 0.0 {
            return Err(EvalError::Domain("fractional power of a negative number"));
        }
        return Ok(base.powf(c));
    }
    if b <= 0.0 {
        return Err(EvalError::Domain("variable exponent needs a positive base"));
    }
    Ok((exp * base.ln()).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn ev(s: &str, p: &[f64]) -> Result<f64, EvalError> {
        parse(s).unwrap().eval(p, &Params::new())
    }

    #[test]
    fn basic_values() {
        assert_eq!(ev("2*x1", &[0.0, 3.0]).unwrap(), 6.0);
        let v = ev("sin(x2)^2", &[0.0, 0.0, std::f64::consts::FRAC_PI_2]).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert_eq!(ev("2^3^2", &[]).unwrap(), 512.0);
        assert_eq!(ev("-2^2", &[]).unwrap(), -4.0);
    }

    #[test]
    fn domain_errors() {
        assert_eq!(ev("1/(x0-1)", &[1.0]), Err(EvalError::DivisionByZero));
        assert!(matches!(ev("log(x0)", &[0.0]), Err(EvalError::Domain(_))));
        assert!(matches!(ev("sqrt(x0)", &[-1.0]), Err(EvalError::Domain(_))));
        assert!(matches!(ev("x0^0.5", &[-1.0]), Err(EvalError::Domain(_))));
        assert_eq!(ev("x0^-1", &[0.0]), Err(EvalError::DivisionByZero));
        assert_eq!(ev("exp(x0)", &[1000.0]), Err(EvalError::NonFinite));
        assert_eq!(ev("x3", &[1.0]), Err(EvalError::MissingVariable(3)));
        assert_eq!(ev("(-2)^3", &[]).unwrap(), -8.0);
    }

    #[test]
    fn unbound_parameter() {
        let syms = crate::expr::Symbols::default().param("M");
        let e = crate::expr::parse_with("2*M", &syms).unwrap();
        assert_eq!(e.eval(&[], &Params::new()), Err(EvalError::UnboundName("M".into())));
        let p: Params = [("M".to_string(), 1.5)].into();
        assert_eq!(e.eval(&[], &p).unwrap(), 3.0);
    }

    #[test]
    fn duals_match_values() {
        let e = parse("x0^2*sin(x1) + exp(x0*x1)/x2").unwrap();
        let p = [0.3, -0.4, 1.7];
        let v = e.eval(&p, &Params::new()).unwrap();
        let d2 = e.eval_dual2(&p, &Params::new()).unwrap();
        assert!((d2.v - v).abs() < 1e-15);
        let d1 = e.eval_dual1(&p, &Params::new()).unwrap();
        for i in 0..3 {
            assert!((d1.d[i] - d2.d[i]).abs() < 1e-14);
        }
        assert!((d2.dd[0][1] - d2.dd[1][0]).abs() < 1e-14);
    }
}
