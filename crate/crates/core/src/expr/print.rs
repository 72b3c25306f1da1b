//! Printer with minimal parentheses; its output parses back to the same tree.

use std::fmt;

use super::{BinOp, Expr, Node, Symbols};

pub struct Display<'a> {
    pub(super) expr: &'a Expr,
    pub(super) symbols: &'a Symbols,
}

impl fmt::Display for Display<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self.expr, Some(self.symbols))
    }
}

// Binding levels: 0 expression, 1 term, 2 factor, 3 atom.
fn level(e: &Expr) -> u8 {
    match e.node() {
        Node::Bin(BinOp::Add | BinOp::Sub, _, _) => 0,
        Node::Bin(BinOp::Mul | BinOp::Div, _, _) => 1,
        Node::Neg(_) | Node::Bin(BinOp::Pow, _, _) => 2,
        Node::Num(c) if *c < 0.0 || !c.is_finite() => 2,
        Node::Num(_) | Node::Var(_) | Node::Param(_) | Node::Call(_, _) => 3,
    }
}

fn write_at(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8, syms: Option<&Symbols>) -> fmt::Result {
    if level(e) < min {
        f.write_str("(")?;
        write_expr(f, e, syms)?;
        f.write_str(")")
    } else {
        write_expr(f, e, syms)
    }
}

fn write_num(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    if c.fract() == 0.0 && c.abs() < 1e15 {
        write!(f, "{}", c)
    } else {
        write!(f, "{:?}", c)
    }
}

pub(super) fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr, syms: Option<&Symbols>) -> fmt::Result {
    match e.node() {
        Node::Num(c) => write_num(f, *c),
        Node::Var(i) => match syms {
            Some(s) => f.write_str(&s.var_name(*i)),
            None => write!(f, "x{i}"),
        },
        Node::Param(p) => f.write_str(p),
        Node::Neg(inner) => {
            f.write_str("-")?;
            write_at(f, inner, 2, syms)
        }
        Node::Call(func, arg) => {
            write!(f, "{}(", func.name())?;
            write_expr(f, arg, syms)?;
            f.write_str(")")
        }
        Node::Bin(op, l, r) => {
            let (sym, lmin, rmin) = match op {
                BinOp::Add => (" + ", 0, 1),
                BinOp::Sub => (" - ", 0, 1),
                BinOp::Mul => ("*", 1, 2),
                BinOp::Div => ("/", 1, 2),
                BinOp::Pow => ("^", 3, 2),
            };
            write_at(f, l, lmin, syms)?;
            f.write_str(sym)?;
            write_at(f, r, rmin, syms)
        }
    }
}
