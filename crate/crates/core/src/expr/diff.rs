use super::{BinaryOp, Expr, Node, UnaryOp};

pub(super) fn diff(e: &Expr, var: &str) -> Expr {
    match e.node() {
        Node::Const(_) => Expr::zero(),
        Node::Var(name) => {
            if &**name == var {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Unary(op, a) => {
            let da = diff(a, var);
            if da.is_zero() {
                return Expr::zero();
            }
            let a = a.clone();
            let outer = match op {
                UnaryOp::Neg => return -da,
                UnaryOp::Sin => a.cos(),
                UnaryOp::Cos => -a.sin(),
                UnaryOp::Tan => Expr::one() / a.cos().powi(2),
                UnaryOp::Exp => a.exp(),
                UnaryOp::Log => Expr::one() / a,
                UnaryOp::Sqrt => Expr::one() / (2.0 * a.sqrt()),
                UnaryOp::Sinh => a.cosh(),
                UnaryOp::Cosh => a.sinh(),
            };
            outer * da
        }
        Node::Binary(op, a, b) => {
            let da = diff(a, var);
            let db = diff(b, var);
            match op {
                BinaryOp::Add => da + db,
                BinaryOp::Sub => da - db,
                BinaryOp::Mul => da * b + a * db,
                BinaryOp::Div => {
                    if db.is_zero() {
                        da / b
                    } else {
                        (da * b - a * db) / b.clone().powi(2)
                    }
                }
                BinaryOp::Pow => {
                    if db.is_zero() && !b.depends_on(var) {
                        // power rule
                        if da.is_zero() {
                            return Expr::zero();
                        }
                        b * a.clone().pow(b - 1.0) * da
                    } else if da.is_zero() && !a.depends_on(var) {
                        e.clone() * a.clone().log() * db
                    } else {
                        e.clone() * (db * a.clone().log() + b * da / a)
                    }
                }
            }
        }
    }
}
