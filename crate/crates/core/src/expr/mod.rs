//! Immutable symbolic scalar expressions over the chart variables `x`, `y`
//! and named parameters.
//!
//! Every other module computes over [`Expr`]: Lie derivatives, area forms and
//! the invariants are all built from `differentiate`, `simplify` and
//! `evaluate`. Constants stay exact rationals until a float enters the tree;
//! from then on the affected coefficients are floats.

mod diff;
mod eval;
mod num;
mod parse;
mod poly;
mod zero;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;

pub use eval::{Bindings, CompiledExpr, Value};
pub use num::Num;
pub use parse::parse;
pub use zero::{is_identically_zero, ZERO_TEST_POINTS, ZERO_TEST_THRESHOLD};

/// Errors raised while parsing or evaluating expressions.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("undeclared identifier `{0}`")]
    Undeclared(String),
    #[error("unbound symbol `{0}`")]
    Unbound(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("{func} is undefined at {value}")]
    Domain { func: &'static str, value: f64 },
}

/// Elementary functions admitted by the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

/// One node of an expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(Num),
    Var(String),
    Param(String),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Quotient(Expr, Expr),
    /// Integer exponent only; fractional powers go through `sqrt`.
    Power(Expr, i32),
    Neg(Expr),
    Func(Func, Expr),
}

/// A shared, structurally immutable expression.
#[derive(Clone, PartialEq)]
pub struct Expr(Arc<Node>);

/// Declared names: the chart variables and the model parameters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Symbols {
    pub variables: Vec<String>,
    pub parameters: Vec<String>,
}

impl Symbols {
    pub fn new<V, P>(variables: V, parameters: P) -> Self
    where
        V: IntoIterator,
        V::Item: Into<String>,
        P: IntoIterator,
        P::Item: Into<String>,
    {
        Symbols {
            variables: variables.into_iter().map(Into::into).collect(),
            parameters: parameters.into_iter().map(Into::into).collect(),
        }
    }

    /// The planar chart `(x, y)` with the given parameters.
    pub fn planar<P>(parameters: P) -> Self
    where
        P: IntoIterator,
        P::Item: Into<String>,
    {
        Self::new(["x", "y"], parameters)
    }

    pub fn is_variable(&self, name: &str) -> bool {
        self.variables.iter().any(|v| v == name)
    }

    pub fn is_parameter(&self, name: &str) -> bool {
        self.parameters.iter().any(|p| p == name)
    }

    pub fn lookup(&self, name: &str) -> Option<Expr> {
        if self.is_variable(name) {
            Some(Expr::var(name))
        } else if self.is_parameter(name) {
            Some(Expr::param(name))
        } else {
            None
        }
    }
}

impl Expr {
    pub fn new(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn int(n: i64) -> Self {
        Expr::new(Node::Const(Num::int(n)))
    }

    pub fn rational(numer: i64, denom: i64) -> Self {
        Expr::new(Node::Const(Num::Exact(BigRational::new(
            BigInt::from(numer),
            BigInt::from(denom),
        ))))
    }

    pub fn float(v: f64) -> Self {
        Expr::new(Node::Const(Num::Approx(v)))
    }

    pub fn constant(n: Num) -> Self {
        Expr::new(Node::Const(n))
    }

    pub fn zero() -> Self {
        Expr::int(0)
    }

    pub fn one() -> Self {
        Expr::int(1)
    }

    pub fn var(name: impl Into<String>) -> Self {
        Expr::new(Node::Var(name.into()))
    }

    pub fn param(name: impl Into<String>) -> Self {
        Expr::new(Node::Param(name.into()))
    }

    pub fn sum(terms: Vec<Expr>) -> Self {
        match terms.len() {
            0 => Expr::zero(),
            1 => terms.into_iter().next().unwrap(),
            _ => Expr::new(Node::Sum(terms)),
        }
    }

    pub fn product(factors: Vec<Expr>) -> Self {
        match factors.len() {
            0 => Expr::one(),
            1 => factors.into_iter().next().unwrap(),
            _ => Expr::new(Node::Product(factors)),
        }
    }

    pub fn quotient(num: Expr, den: Expr) -> Self {
        Expr::new(Node::Quotient(num, den))
    }

    pub fn pow(base: Expr, exp: i32) -> Self {
        Expr::new(Node::Power(base, exp))
    }

    pub fn neg(e: Expr) -> Self {
        Expr::new(Node::Neg(e))
    }

    pub fn func(f: Func, arg: Expr) -> Self {
        Expr::new(Node::Func(f, arg))
    }

    pub fn as_const(&self) -> Option<&Num> {
        match self.node() {
            Node::Const(n) => Some(n),
            _ => None,
        }
    }

    /// True for the literal constant zero (no simplification is attempted).
    pub fn is_zero_literal(&self) -> bool {
        self.as_const().is_some_and(Num::is_zero)
    }

    /// Whether any float constant occurs in the tree.
    pub fn has_float(&self) -> bool {
        match self.node() {
            Node::Const(n) => matches!(n, Num::Approx(_)),
            Node::Var(_) | Node::Param(_) => false,
            Node::Sum(v) | Node::Product(v) => v.iter().any(Expr::has_float),
            Node::Quotient(a, b) => a.has_float() || b.has_float(),
            Node::Power(b, _) | Node::Neg(b) | Node::Func(_, b) => b.has_float(),
        }
    }

    /// Names of the variables and parameters occurring in the tree.
    pub fn free_symbols(&self) -> Vec<String> {
        fn walk(e: &Expr, out: &mut Vec<String>) {
            match e.node() {
                Node::Const(_) => {}
                Node::Var(n) | Node::Param(n) => {
                    if !out.contains(n) {
                        out.push(n.clone());
                    }
                }
                Node::Sum(v) | Node::Product(v) => v.iter().for_each(|c| walk(c, out)),
                Node::Quotient(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                Node::Power(b, _) | Node::Neg(b) | Node::Func(_, b) => walk(b, out),
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    /// Polynomial normal form with light quotient cancellation.
    pub fn simplify(&self) -> Expr {
        poly::simplify(self)
    }

    /// Exact partial derivative with respect to `v`, simplified.
    pub fn differentiate(&self, v: &str) -> Expr {
        diff::derivative(self, v).simplify()
    }

    /// Simultaneous substitution of symbols by expressions, then simplify.
    pub fn substitute(&self, replacements: &BTreeMap<String, Expr>) -> Expr {
        self.substitute_raw(replacements).simplify()
    }

    fn substitute_raw(&self, r: &BTreeMap<String, Expr>) -> Expr {
        match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(n) | Node::Param(n) => r.get(n).cloned().unwrap_or_else(|| self.clone()),
            Node::Sum(v) => Expr::sum(v.iter().map(|c| c.substitute_raw(r)).collect()),
            Node::Product(v) => Expr::product(v.iter().map(|c| c.substitute_raw(r)).collect()),
            Node::Quotient(a, b) => Expr::quotient(a.substitute_raw(r), b.substitute_raw(r)),
            Node::Power(b, k) => Expr::pow(b.substitute_raw(r), *k),
            Node::Neg(b) => Expr::neg(b.substitute_raw(r)),
            Node::Func(f, b) => Expr::func(*f, b.substitute_raw(r)),
        }
    }

    pub fn evaluate(&self, b: &Bindings) -> Result<f64, ExprError> {
        eval::evaluate(self, b).map(|v| v.to_f64())
    }

    pub fn compile(&self, slots: &[&str]) -> Result<CompiledExpr, ExprError> {
        CompiledExpr::new(self, slots)
    }

    /// Structural zero after simplification.
    pub fn is_structurally_zero(&self) -> bool {
        self.simplify().is_zero_literal()
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl From<i64> for Expr {
    fn from(n: i64) -> Self {
        Expr::int(n)
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::sum(vec![self, rhs])
    }
}

impl std::ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sum(vec![self, Expr::neg(rhs)])
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::product(vec![self, rhs])
    }
}

impl std::ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::quotient(self, rhs)
    }
}

impl std::ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

// Binding strength used when printing; higher binds tighter.
fn precedence(e: &Expr) -> u8 {
    match e.node() {
        Node::Sum(_) => 1,
        Node::Product(_) | Node::Quotient(..) => 2,
        Node::Neg(_) => 3,
        Node::Power(..) => 4,
        Node::Const(n) if n.is_negative() => 3,
        Node::Const(n) if !n.is_integer() => 2,
        _ => 5,
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if precedence(e) < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(n) => write!(f, "{n}"),
            Node::Var(n) | Node::Param(n) => f.write_str(n),
            Node::Sum(terms) => {
                for (i, t) in terms.iter().enumerate() {
                    match t.node() {
                        Node::Neg(inner) if i > 0 => {
                            f.write_str(" - ")?;
                            write_wrapped(f, inner, 2)?;
                        }
                        Node::Const(n) if i > 0 && n.is_negative() => {
                            write!(f, " - {}", n.abs())?;
                        }
                        _ => {
                            if i > 0 {
                                f.write_str(" + ")?;
                            }
                            write_wrapped(f, t, 2)?;
                        }
                    }
                }
                Ok(())
            }
            Node::Product(factors) => {
                for (i, t) in factors.iter().enumerate() {
                    if i > 0 {
                        f.write_str("*")?;
                        write_wrapped(f, t, 3)?;
                    } else {
                        write_wrapped(f, t, 2)?;
                    }
                }
                Ok(())
            }
            Node::Quotient(a, b) => {
                write_wrapped(f, a, 2)?;
                f.write_str("/")?;
                write_wrapped(f, b, 4)
            }
            Node::Power(b, k) => {
                write_wrapped(f, b, 5)?;
                if *k < 0 {
                    write!(f, "^({k})")
                } else {
                    write!(f, "^{k}")
                }
            }
            Node::Neg(inner) => {
                f.write_str("-")?;
                write_wrapped(f, inner, 3)
            }
            Node::Func(func, arg) => write!(f, "{}({arg})", func.name()),
        }
    }
}
