//! A small real-valued expression language.
//!
//! Expressions are immutable trees shared through [`Arc`]; cloning is cheap and
//! evaluation is reentrant, so the same tree can be evaluated from many worker
//! threads at once.

mod diff;
pub mod dual;
mod eval;
mod matrix;
mod parse;
mod print;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

pub use dual::{Dual1, Dual2, Scalar};
pub use eval::EvalError;
pub use matrix::{subsets, ExpressionMatrix};
pub use parse::{parse, parse_with, ParseError};

/// Named constants bound at evaluation time.
pub type Params = BTreeMap<String, f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    pub const ALL: [Func; 7] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Num(f64),
    Var(usize),
    Param(Arc<str>),
    Neg(Expr),
    Bin(BinOp, Expr, Expr),
    Call(Func, Expr),
}

/// An expression tree. Equality is structural.
#[derive(Clone, PartialEq)]
pub struct Expr(Arc<Node>);

/// Variable and parameter names known to the parser and printer.
///
/// Variables are referred to by position; the default set is `x0..x3`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Symbols {
    pub vars: Vec<String>,
    pub params: Vec<String>,
}

impl Default for Symbols {
    fn default() -> Self {
        Symbols::coords(4)
    }
}

impl Symbols {
    /// Variables `x0..x{n-1}` and no parameters.
    pub fn coords(n: usize) -> Self {
        Symbols {
            vars: (0..n).map(|i| format!("x{i}")).collect(),
            params: Vec::new(),
        }
    }

    pub fn with_vars<S: AsRef<str>>(vars: &[S]) -> Self {
        Symbols {
            vars: vars.iter().map(|s| s.as_ref().to_string()).collect(),
            params: Vec::new(),
        }
    }

    pub fn param(mut self, name: &str) -> Self {
        if !self.params.iter().any(|p| p == name) {
            self.params.push(name.to_string());
        }
        self
    }

    pub fn params<S: AsRef<str>>(mut self, names: impl IntoIterator<Item = S>) -> Self {
        for n in names {
            self = self.param(n.as_ref());
        }
        self
    }

    pub fn var_name(&self, i: usize) -> String {
        self.vars.get(i).cloned().unwrap_or_else(|| format!("x{i}"))
    }
}

impl Expr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    /// A literal. Negative values are stored as a negated literal so every tree
    /// built here is also producible by the parser.
    pub fn num(c: f64) -> Expr {
        if c < 0.0 || (c == 0.0 && c.is_sign_negative()) {
            Expr(Arc::new(Node::Neg(Expr(Arc::new(Node::Num(-c))))))
        } else {
            Expr(Arc::new(Node::Num(c)))
        }
    }

    pub fn var(i: usize) -> Expr {
        Expr(Arc::new(Node::Var(i)))
    }

    pub fn param(name: &str) -> Expr {
        Expr(Arc::new(Node::Param(Arc::from(name))))
    }

    pub fn zero() -> Expr {
        Expr::num(0.0)
    }

    pub fn one() -> Expr {
        Expr::num(1.0)
    }

    pub(crate) fn raw(node: Node) -> Expr {
        Expr(Arc::new(node))
    }

    /// The constant value if the tree is a (possibly negated) literal.
    pub fn as_const(&self) -> Option<f64> {
        match self.node() {
            Node::Num(c) => Some(*c),
            Node::Neg(e) => e.as_const().map(|c| -c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    // Smart constructors: fold literals and drop neutral elements, nothing more.

    pub fn neg(&self) -> Expr {
        match self.node() {
            Node::Num(c) => Expr::num(-c),
            Node::Neg(e) => e.clone(),
            _ => Expr::raw(Node::Neg(self.clone())),
        }
    }

    pub fn add(&self, rhs: &Expr) -> Expr {
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => Expr::num(a + b),
            (Some(a), _) if a == 0.0 => rhs.clone(),
            (_, Some(b)) if b == 0.0 => self.clone(),
            (_, Some(b)) if b < 0.0 => Expr::raw(Node::Bin(BinOp::Sub, self.clone(), Expr::num(-b))),
            _ => match rhs.node() {
                Node::Neg(r) => Expr::raw(Node::Bin(BinOp::Sub, self.clone(), r.clone())),
                _ => Expr::raw(Node::Bin(BinOp::Add, self.clone(), rhs.clone())),
            },
        }
    }

    pub fn sub(&self, rhs: &Expr) -> Expr {
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => Expr::num(a - b),
            (Some(a), _) if a == 0.0 => rhs.neg(),
            (_, Some(b)) if b == 0.0 => self.clone(),
            _ => match rhs.node() {
                Node::Neg(r) => Expr::raw(Node::Bin(BinOp::Add, self.clone(), r.clone())),
                _ => Expr::raw(Node::Bin(BinOp::Sub, self.clone(), rhs.clone())),
            },
        }
    }

    pub fn mul(&self, rhs: &Expr) -> Expr {
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) => Expr::num(a * b),
            (Some(a), _) if a == 0.0 => Expr::zero(),
            (_, Some(b)) if b == 0.0 => Expr::zero(),
            (Some(a), _) if a == 1.0 => rhs.clone(),
            (_, Some(b)) if b == 1.0 => self.clone(),
            (Some(a), _) if a == -1.0 => rhs.neg(),
            (_, Some(b)) if b == -1.0 => self.neg(),
            _ => Expr::raw(Node::Bin(BinOp::Mul, self.clone(), rhs.clone())),
        }
    }

    pub fn div(&self, rhs: &Expr) -> Expr {
        match (self.as_const(), rhs.as_const()) {
            (Some(a), Some(b)) if b != 0.0 => Expr::num(a / b),
            (Some(a), _) if a == 0.0 => Expr::zero(),
            (_, Some(b)) if b == 1.0 => self.clone(),
            (_, Some(b)) if b == -1.0 => self.neg(),
            _ => Expr::raw(Node::Bin(BinOp::Div, self.clone(), rhs.clone())),
        }
    }

    pub fn pow(&self, rhs: &Expr) -> Expr {
        match (self.as_const(), rhs.as_const()) {
            (_, Some(b)) if b == 0.0 => Expr::one(),
            (_, Some(b)) if b == 1.0 => self.clone(),
            (Some(a), Some(b)) if a >= 0.0 && (a.powf(b)).is_finite() => Expr::num(a.powf(b)),
            _ => Expr::raw(Node::Bin(BinOp::Pow, self.clone(), rhs.clone())),
        }
    }

    pub fn powi(&self, k: i32) -> Expr {
        self.pow(&Expr::num(k as f64))
    }

    pub fn call(f: Func, arg: &Expr) -> Expr {
        Expr::raw(Node::Call(f, arg.clone()))
    }

    pub fn sum<'a>(terms: impl IntoIterator<Item = &'a Expr>) -> Expr {
        terms.into_iter().fold(Expr::zero(), |acc, t| acc.add(t))
    }

    pub fn product<'a>(terms: impl IntoIterator<Item = &'a Expr>) -> Expr {
        terms.into_iter().fold(Expr::one(), |acc, t| acc.mul(t))
    }

    /// Replace every parameter by its value.
    pub fn bind(&self, params: &Params) -> Result<Expr, EvalError> {
        Ok(match self.node() {
            Node::Num(_) | Node::Var(_) => self.clone(),
            Node::Param(name) => match params.get(name.as_ref()) {
                Some(v) => Expr::raw(Node::Num(*v)).fold_sign(),
                None => return Err(EvalError::UnboundName(name.to_string())),
            },
            Node::Neg(e) => Expr::raw(Node::Neg(e.bind(params)?)),
            Node::Bin(op, l, r) => Expr::raw(Node::Bin(*op, l.bind(params)?, r.bind(params)?)),
            Node::Call(f, e) => Expr::raw(Node::Call(*f, e.bind(params)?)),
        })
    }

    fn fold_sign(self) -> Expr {
        match self.node() {
            Node::Num(c) if *c < 0.0 => Expr::num(*c),
            _ => self,
        }
    }

    /// Renumber variables: `Var(i)` becomes `Var(map(i))`.
    pub fn map_vars(&self, map: &impl Fn(usize) -> usize) -> Expr {
        match self.node() {
            Node::Var(i) => Expr::var(map(*i)),
            Node::Num(_) | Node::Param(_) => self.clone(),
            Node::Neg(e) => Expr::raw(Node::Neg(e.map_vars(map))),
            Node::Bin(op, l, r) => Expr::raw(Node::Bin(*op, l.map_vars(map), r.map_vars(map))),
            Node::Call(f, e) => Expr::raw(Node::Call(*f, e.map_vars(map))),
        }
    }

    /// Shift every variable index by `offset` (used when placing a block
    /// inside a product chart).
    pub fn shift_vars(&self, offset: usize) -> Expr {
        self.map_vars(&|i| i + offset)
    }

    /// Substitute an expression for a variable.
    pub fn substitute(&self, var: usize, with: &Expr) -> Expr {
        match self.node() {
            Node::Var(i) if *i == var => with.clone(),
            Node::Num(_) | Node::Var(_) | Node::Param(_) => self.clone(),
            Node::Neg(e) => Expr::raw(Node::Neg(e.substitute(var, with))),
            Node::Bin(op, l, r) => {
                Expr::raw(Node::Bin(*op, l.substitute(var, with), r.substitute(var, with)))
            }
            Node::Call(f, e) => Expr::raw(Node::Call(*f, e.substitute(var, with))),
        }
    }

    /// Sorted list of variable indices occurring in the tree.
    pub fn free_vars(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn collect_vars(&self, out: &mut Vec<usize>) {
        match self.node() {
            Node::Var(i) => out.push(*i),
            Node::Num(_) | Node::Param(_) => {}
            Node::Neg(e) | Node::Call(_, e) => e.collect_vars(out),
            Node::Bin(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
        }
    }

    /// Sorted list of parameter names occurring in the tree.
    pub fn free_params(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_params(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn collect_params(&self, out: &mut Vec<String>) {
        match self.node() {
            Node::Param(p) => out.push(p.to_string()),
            Node::Num(_) | Node::Var(_) => {}
            Node::Neg(e) | Node::Call(_, e) => e.collect_params(out),
            Node::Bin(_, l, r) => {
                l.collect_params(out);
                r.collect_params(out);
            }
        }
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self.node() {
            Node::Num(_) | Node::Var(_) | Node::Param(_) => 1,
            Node::Neg(e) | Node::Call(_, e) => 1 + e.size(),
            Node::Bin(_, l, r) => 1 + l.size() + r.size(),
        }
    }

    /// Render with the given variable names.
    pub fn display<'a>(&'a self, symbols: &'a Symbols) -> print::Display<'a> {
        print::Display { expr: self, symbols }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        print::write_expr(f, self, None)
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}
