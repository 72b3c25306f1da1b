use super::{BinOp, Expr, Func, Node};

impl Expr {
    /// Symbolic partial derivative with respect to variable `var`.
    ///
    /// Only literal folding is applied to the result; no further simplification.
    pub fn differentiate(&self, var: usize) -> Expr {
        match self.node() {
            Node::Num(_) | Node::Param(_) => Expr::zero(),
            Node::Var(i) => {
                if *i == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Neg(a) => a.differentiate(var).neg(),
            Node::Bin(op, a, b) => {
                let da = a.differentiate(var);
                let db = b.differentiate(var);
                match op {
                    BinOp::Add => da.add(&db),
                    BinOp::Sub => da.sub(&db),
                    BinOp::Mul => da.mul(b).add(&a.mul(&db)),
                    BinOp::Div => {
                        if db.is_zero() {
                            da.div(b)
                        } else {
                            da.mul(b).sub(&a.mul(&db)).div(&b.powi(2))
                        }
                    }
                    BinOp::Pow => {
                        if !b.free_vars().contains(&var) {
                            // d(a^c) = c a^(c-1) a'
                            let c1 = b.sub(&Expr::one());
                            b.mul(&a.pow(&c1)).mul(&da)
                        } else {
                            // d(a^b) = a^b (b' log a + b a'/a)
                            let log_a = Expr::call(Func::Log, a);
                            let inner = db.mul(&log_a).add(&b.mul(&da).div(a));
                            self.mul(&inner)
                        }
                    }
                }
            }
            Node::Call(f, a) => {
                let da = a.differentiate(var);
                if da.is_zero() {
                    return Expr::zero();
                }
                let outer = match f {
                    Func::Sin => Expr::call(Func::Cos, a),
                    Func::Cos => Expr::call(Func::Sin, a).neg(),
                    Func::Tan => Expr::one().add(&Expr::call(Func::Tan, a).powi(2)),
                    Func::Exp => self.clone(),
                    Func::Log => return da.div(a),
                    Func::Sqrt => return da.div(&Expr::num(2.0).mul(self)),
                    Func::Abs => a.div(self),
                };
                outer.mul(&da)
            }
        }
    }
}
