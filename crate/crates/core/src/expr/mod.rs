//! Closed-form expressions over chart coordinates.
//!
//! Every coordinate function in the engine (metric entries, field
//! components, scalars, embeddings) is an [`Expr`]. Expressions are
//! immutable, cheaply clonable trees that can be parsed from text,
//! evaluated at an [`EvalPoint`] and differentiated symbolically.
//!
//! The arithmetic operators on `Expr` apply a light simplifier (constant
//! folding and the 0/1 identities). The parser builds raw trees so that
//! `parse(print(e)) == e` holds for parsed input.

mod diff;
mod parser;

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use thiserror::Error;

pub use parser::parse;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: expected one of {}, found {found}", expected.join(", "))]
    Syntax {
        offset: usize,
        expected: Vec<&'static str>,
        found: String,
    },
    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("math domain error: {0}")]
    Domain(String),
    #[error("duplicate coordinate `{0}` in evaluation point")]
    DuplicateName(String),
}

pub type Result<T, E = ExprError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Sinh,
    Cosh,
}

impl UnaryOp {
    pub const FUNCTIONS: [UnaryOp; 8] = [
        UnaryOp::Sin,
        UnaryOp::Cos,
        UnaryOp::Tan,
        UnaryOp::Exp,
        UnaryOp::Log,
        UnaryOp::Sqrt,
        UnaryOp::Sinh,
        UnaryOp::Cosh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Tan => "tan",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Sinh => "sinh",
            UnaryOp::Cosh => "cosh",
        }
    }

    pub fn from_name(name: &str) -> Option<UnaryOp> {
        UnaryOp::FUNCTIONS.into_iter().find(|f| f.name() == name)
    }

    fn apply(self, x: f64) -> Result<f64> {
        let y = match self {
            UnaryOp::Neg => -x,
            UnaryOp::Sin => x.sin(),
            UnaryOp::Cos => x.cos(),
            UnaryOp::Tan => {
                if x.cos() == 0.0 {
                    return Err(ExprError::Domain(format!("tan({x}) is undefined")));
                }
                x.tan()
            }
            UnaryOp::Exp => x.exp(),
            UnaryOp::Log => {
                if x <= 0.0 {
                    return Err(ExprError::Domain(format!("log of non-positive value {x}")));
                }
                x.ln()
            }
            UnaryOp::Sqrt => {
                if x < 0.0 {
                    return Err(ExprError::Domain(format!("sqrt of negative value {x}")));
                }
                x.sqrt()
            }
            UnaryOp::Sinh => x.sinh(),
            UnaryOp::Cosh => x.cosh(),
        };
        finite(y, || format!("{}({x}) overflowed", self.name()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }

    fn apply(self, a: f64, b: f64) -> Result<f64> {
        let y = match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => {
                if b == 0.0 {
                    return Err(ExprError::Domain(format!("division by zero ({a} / 0)")));
                }
                a / b
            }
            BinaryOp::Pow => {
                if a < 0.0 && b.fract() != 0.0 {
                    return Err(ExprError::Domain(format!(
                        "negative base {a} raised to non-integer power {b}"
                    )));
                }
                if a == 0.0 && b < 0.0 {
                    return Err(ExprError::Domain(format!("division by zero (0 ^ {b})")));
                }
                a.powf(b)
            }
        };
        finite(y, || format!("{a} {} {b} overflowed", self.symbol()))
    }
}

fn finite(y: f64, msg: impl FnOnce() -> String) -> Result<f64> {
    if y.is_finite() {
        Ok(y)
    } else {
        Err(ExprError::Domain(msg()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(Arc<str>),
    Unary(UnaryOp, Expr),
    Binary(BinaryOp, Expr, Expr),
}

/// An immutable expression tree. Clones share structure.
#[derive(Clone, PartialEq)]
pub struct Expr(Arc<Node>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&*self.0, f)
    }
}

impl Expr {
    pub fn from_node(node: Node) -> Expr {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn constant(c: f64) -> Expr {
        Expr::from_node(Node::Const(c))
    }

    pub fn zero() -> Expr {
        Expr::constant(0.0)
    }

    pub fn one() -> Expr {
        Expr::constant(1.0)
    }

    pub fn var(name: &str) -> Expr {
        Expr::from_node(Node::Var(Arc::from(name)))
    }

    /// Raw constructors: no simplification.
    pub fn raw_unary(op: UnaryOp, a: Expr) -> Expr {
        Expr::from_node(Node::Unary(op, a))
    }

    pub fn raw_binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
        Expr::from_node(Node::Binary(op, a, b))
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    /// Applies a unary function, folding constants when the result is finite.
    pub fn apply(op: UnaryOp, a: Expr) -> Expr {
        if let Some(c) = a.as_const() {
            if let Ok(v) = op.apply(c) {
                return Expr::constant(v);
            }
        }
        if op == UnaryOp::Neg {
            if let Node::Unary(UnaryOp::Neg, inner) = a.node() {
                return inner.clone();
            }
        }
        Expr::raw_unary(op, a)
    }

    /// Applies a binary operator with constant folding and 0/1 identities.
    pub fn combine(op: BinaryOp, a: Expr, b: Expr) -> Expr {
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            if let Ok(v) = op.apply(x, y) {
                return Expr::constant(v);
            }
        }
        match op {
            BinaryOp::Add => {
                if a.is_zero() {
                    return b;
                }
                if b.is_zero() {
                    return a;
                }
                if let Node::Unary(UnaryOp::Neg, nb) = b.node() {
                    return Expr::combine(BinaryOp::Sub, a, nb.clone());
                }
            }
            BinaryOp::Sub => {
                if b.is_zero() {
                    return a;
                }
                if a.is_zero() {
                    return Expr::apply(UnaryOp::Neg, b);
                }
                if let Node::Unary(UnaryOp::Neg, nb) = b.node() {
                    return Expr::combine(BinaryOp::Add, a, nb.clone());
                }
            }
            BinaryOp::Mul => {
                if a.is_zero() || b.is_zero() {
                    return Expr::zero();
                }
                if a.is_one() {
                    return b;
                }
                if b.is_one() {
                    return a;
                }
                if a.as_const() == Some(-1.0) {
                    return Expr::apply(UnaryOp::Neg, b);
                }
                if b.as_const() == Some(-1.0) {
                    return Expr::apply(UnaryOp::Neg, a);
                }
            }
            BinaryOp::Div => {
                if a.is_zero() && !b.is_zero() {
                    return Expr::zero();
                }
                if b.is_one() {
                    return a;
                }
            }
            BinaryOp::Pow => {
                if b.is_zero() {
                    return Expr::one();
                }
                if b.is_one() || a.is_one() {
                    return a;
                }
            }
        }
        Expr::raw_binary(op, a, b)
    }

    pub fn pow(self, exponent: Expr) -> Expr {
        Expr::combine(BinaryOp::Pow, self, exponent)
    }

    pub fn powi(self, n: i32) -> Expr {
        self.pow(Expr::constant(n as f64))
    }

    pub fn sin(self) -> Expr {
        Expr::apply(UnaryOp::Sin, self)
    }
    pub fn cos(self) -> Expr {
        Expr::apply(UnaryOp::Cos, self)
    }
    pub fn tan(self) -> Expr {
        Expr::apply(UnaryOp::Tan, self)
    }
    pub fn exp(self) -> Expr {
        Expr::apply(UnaryOp::Exp, self)
    }
    pub fn log(self) -> Expr {
        Expr::apply(UnaryOp::Log, self)
    }
    pub fn sqrt(self) -> Expr {
        Expr::apply(UnaryOp::Sqrt, self)
    }
    pub fn sinh(self) -> Expr {
        Expr::apply(UnaryOp::Sinh, self)
    }
    pub fn cosh(self) -> Expr {
        Expr::apply(UnaryOp::Cosh, self)
    }

    /// Sum of a sequence of expressions (zero when empty).
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        terms.into_iter().fold(Expr::zero(), |acc, t| acc + t)
    }

    pub fn eval(&self, p: &EvalPoint) -> Result<f64> {
        match self.node() {
            Node::Const(c) => Ok(*c),
            Node::Var(name) => p
                .get(name)
                .ok_or_else(|| ExprError::UnboundVariable(name.to_string())),
            Node::Unary(op, a) => op.apply(a.eval(p)?),
            Node::Binary(op, a, b) => op.apply(a.eval(p)?, b.eval(p)?),
        }
    }

    /// Exact partial derivative with respect to `var`.
    pub fn diff(&self, var: &str) -> Expr {
        diff::diff(self, var)
    }

    pub fn depends_on(&self, var: &str) -> bool {
        match self.node() {
            Node::Const(_) => false,
            Node::Var(name) => &**name == var,
            Node::Unary(_, a) => a.depends_on(var),
            Node::Binary(_, a, b) => a.depends_on(var) || b.depends_on(var),
        }
    }

    pub fn variables(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self.node() {
            Node::Const(_) => {}
            Node::Var(name) => {
                out.insert(name.to_string());
            }
            Node::Unary(_, a) => a.collect_vars(out),
            Node::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Replaces each variable by the expression `map` returns for it (or keeps it).
    pub fn substitute(&self, map: &dyn Fn(&str) -> Option<Expr>) -> Expr {
        match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(name) => map(name).unwrap_or_else(|| self.clone()),
            Node::Unary(op, a) => Expr::apply(*op, a.substitute(map)),
            Node::Binary(op, a, b) => Expr::combine(*op, a.substitute(map), b.substitute(map)),
        }
    }

    pub fn node_count(&self) -> usize {
        match self.node() {
            Node::Const(_) | Node::Var(_) => 1,
            Node::Unary(_, a) => 1 + a.node_count(),
            Node::Binary(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }
}

/// Fully parenthesized printer; `parse` reads it back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => {
                if c.is_sign_negative() {
                    write!(f, "(-{:?})", c.abs())
                } else {
                    write!(f, "{c:?}")
                }
            }
            Node::Var(name) => f.write_str(name),
            Node::Unary(UnaryOp::Neg, a) => write!(f, "(-{a})"),
            Node::Unary(op, a) => write!(f, "{}({a})", op.name()),
            Node::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

impl From<f64> for Expr {
    fn from(c: f64) -> Expr {
        Expr::constant(c)
    }
}

macro_rules! binop_impl {
    ($trait:ident, $method:ident, $op:expr) => {
        impl $trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::combine($op, self, rhs)
            }
        }
        impl $trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::combine($op, self.clone(), rhs.clone())
            }
        }
        impl $trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::combine($op, self, rhs.clone())
            }
        }
        impl $trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::combine($op, self.clone(), rhs)
            }
        }
        impl $trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::combine($op, self, Expr::constant(rhs))
            }
        }
        impl $trait<f64> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::combine($op, self.clone(), Expr::constant(rhs))
            }
        }
        impl $trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::combine($op, Expr::constant(self), rhs)
            }
        }
    };
}

binop_impl!(Add, add, BinaryOp::Add);
binop_impl!(Sub, sub, BinaryOp::Sub);
binop_impl!(Mul, mul, BinaryOp::Mul);
binop_impl!(Div, div, BinaryOp::Div);

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::apply(UnaryOp::Neg, self)
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::apply(UnaryOp::Neg, self.clone())
    }
}

/// A point given as named coordinate values.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPoint {
    entries: Vec<(Arc<str>, f64)>,
}

impl EvalPoint {
    pub fn new<S: AsRef<str>>(entries: impl IntoIterator<Item = (S, f64)>) -> Result<EvalPoint> {
        let mut out: Vec<(Arc<str>, f64)> = Vec::new();
        for (name, value) in entries {
            let name = name.as_ref();
            if out.iter().any(|(n, _)| &**n == name) {
                return Err(ExprError::DuplicateName(name.to_string()));
            }
            out.push((Arc::from(name), value));
        }
        Ok(EvalPoint { entries: out })
    }

    /// Zips coordinate names with values. Names must be distinct.
    pub fn from_coords<S: AsRef<str>>(names: &[S], values: &[f64]) -> Result<EvalPoint> {
        EvalPoint::new(names.iter().map(|n| n.as_ref()).zip(values.iter().copied()))
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|(n, _)| &**n == name)
            .map(|(_, v)| *v)
    }

    pub fn set(&mut self, name: &str, value: f64) {
        match self.entries.iter_mut().find(|(n, _)| &**n == name) {
            Some(entry) => entry.1 = value,
            None => self.entries.push((Arc::from(name), value)),
        }
    }

    pub fn with(&self, name: &str, value: f64) -> EvalPoint {
        let mut p = self.clone();
        p.set(name, value);
        p
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|(_, v)| *v).collect()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| &**n)
    }
}

impl fmt::Display for EvalPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, (n, v)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{n}={v}")?;
        }
        f.write_str(")")
    }
}
