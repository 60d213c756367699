use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::num::ratio_to_f64;
use super::{Expr, ExprError, Func, Node, Num};

/// Numeric values for variables and parameters, keyed by name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Bindings(pub BTreeMap<String, f64>);

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn set(&mut self, name: impl Into<String>, v: f64) {
        self.0.insert(name.into(), v);
    }

    pub fn with(mut self, name: impl Into<String>, v: f64) -> Self {
        self.set(name, v);
        self
    }

    /// These bindings plus the chart point `(x, y)`.
    pub fn at(&self, x: f64, y: f64) -> Bindings {
        self.clone().with("x", x).with("y", y)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &f64)> {
        self.0.iter()
    }
}

impl<const N: usize> From<[(&str, f64); N]> for Bindings {
    fn from(pairs: [(&str, f64); N]) -> Self {
        Bindings(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }
}

/// Result of evaluation: exact while no symbol or float has been touched.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Exact(BigRational),
    Float(f64),
}

impl Value {
    pub fn to_f64(&self) -> f64 {
        match self {
            Value::Exact(r) => ratio_to_f64(r),
            Value::Float(v) => *v,
        }
    }
}

fn binary(a: Value, b: Value, exact: impl Fn(&BigRational, &BigRational) -> BigRational, float: impl Fn(f64, f64) -> f64) -> Value {
    match (&a, &b) {
        (Value::Exact(x), Value::Exact(y)) => Value::Exact(exact(x, y)),
        _ => Value::Float(float(a.to_f64(), b.to_f64())),
    }
}

pub(super) fn evaluate(e: &Expr, b: &Bindings) -> Result<Value, ExprError> {
    Ok(match e.node() {
        Node::Const(Num::Exact(r)) => Value::Exact(r.clone()),
        Node::Const(Num::Approx(v)) => Value::Float(*v),
        Node::Var(n) | Node::Param(n) => {
            Value::Float(b.get(n).ok_or_else(|| ExprError::Unbound(n.clone()))?)
        }
        Node::Sum(terms) => {
            let mut acc = Value::Exact(BigRational::zero());
            for t in terms {
                acc = binary(acc, evaluate(t, b)?, |x, y| x + y, |x, y| x + y);
            }
            acc
        }
        Node::Product(factors) => {
            let mut acc = Value::Exact(BigRational::from_integer(1.into()));
            for f in factors {
                acc = binary(acc, evaluate(f, b)?, |x, y| x * y, |x, y| x * y);
            }
            acc
        }
        Node::Quotient(n, d) => {
            let n = evaluate(n, b)?;
            let d = evaluate(d, b)?;
            match (&n, &d) {
                (_, Value::Exact(y)) if y.is_zero() => return Err(ExprError::DivisionByZero),
                (Value::Exact(x), Value::Exact(y)) => Value::Exact(x / y),
                _ => {
                    let dv = d.to_f64();
                    if dv == 0.0 {
                        return Err(ExprError::DivisionByZero);
                    }
                    Value::Float(n.to_f64() / dv)
                }
            }
        }
        Node::Power(base, k) => match evaluate(base, b)? {
            Value::Exact(r) => {
                if *k < 0 && r.is_zero() {
                    return Err(ExprError::DivisionByZero);
                }
                let p = num_traits::pow(r.clone(), k.unsigned_abs() as usize);
                Value::Exact(if *k < 0 { p.recip() } else { p })
            }
            Value::Float(v) => {
                if *k < 0 && v == 0.0 {
                    return Err(ExprError::DivisionByZero);
                }
                Value::Float(v.powi(*k))
            }
        },
        Node::Neg(inner) => match evaluate(inner, b)? {
            Value::Exact(r) => Value::Exact(-r),
            Value::Float(v) => Value::Float(-v),
        },
        Node::Func(f, arg) => {
            let a = evaluate(arg, b)?;
            if let (Func::Sqrt, Value::Exact(r)) = (f, &a) {
                if let Some(Num::Exact(s)) = Num::Exact(r.clone()).exact_sqrt() {
                    return Ok(Value::Exact(s));
                }
            }
            Value::Float(apply(*f, a.to_f64())?)
        }
    })
}

fn apply(f: Func, v: f64) -> Result<f64, ExprError> {
    Ok(match f {
        Func::Sin => v.sin(),
        Func::Cos => v.cos(),
        Func::Exp => v.exp(),
        Func::Log => {
            if v <= 0.0 {
                return Err(ExprError::Domain { func: "log", value: v });
            }
            v.ln()
        }
        Func::Sqrt => {
            if v < 0.0 {
                return Err(ExprError::Domain { func: "sqrt", value: v });
            }
            v.sqrt()
        }
    })
}

#[derive(Debug, Clone)]
enum Op {
    Const(f64),
    Load(usize),
    Add(usize),
    Mul(usize),
    Div,
    Pow(i32),
    Neg,
    Func(Func),
}

/// Stack-machine form of an expression for repeated float evaluation.
///
/// Symbols are resolved to slot indices once; evaluation takes a slice of
/// slot values in the same order as the `slots` passed to [`CompiledExpr::new`].
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    ops: Vec<Op>,
    depth: usize,
}

impl CompiledExpr {
    pub fn new(e: &Expr, slots: &[&str]) -> Result<Self, ExprError> {
        fn emit(e: &Expr, slots: &[&str], ops: &mut Vec<Op>) -> Result<(), ExprError> {
            match e.node() {
                Node::Const(n) => ops.push(Op::Const(n.to_f64())),
                Node::Var(n) | Node::Param(n) => {
                    let i = slots
                        .iter()
                        .position(|s| s == n)
                        .ok_or_else(|| ExprError::Unbound(n.clone()))?;
                    ops.push(Op::Load(i));
                }
                Node::Sum(ts) => {
                    for t in ts {
                        emit(t, slots, ops)?;
                    }
                    ops.push(Op::Add(ts.len()));
                }
                Node::Product(fs) => {
                    for f in fs {
                        emit(f, slots, ops)?;
                    }
                    ops.push(Op::Mul(fs.len()));
                }
                Node::Quotient(a, b) => {
                    emit(a, slots, ops)?;
                    emit(b, slots, ops)?;
                    ops.push(Op::Div);
                }
                Node::Power(b, k) => {
                    emit(b, slots, ops)?;
                    ops.push(Op::Pow(*k));
                }
                Node::Neg(a) => {
                    emit(a, slots, ops)?;
                    ops.push(Op::Neg);
                }
                Node::Func(f, a) => {
                    emit(a, slots, ops)?;
                    ops.push(Op::Func(*f));
                }
            }
            Ok(())
        }
        let mut ops = Vec::new();
        emit(e, slots, &mut ops)?;
        let mut depth = 0usize;
        let mut max = 0usize;
        for op in &ops {
            match op {
                Op::Const(_) | Op::Load(_) => depth += 1,
                Op::Add(n) | Op::Mul(n) => depth = depth + 1 - n,
                Op::Div => depth -= 1,
                _ => {}
            }
            max = max.max(depth);
        }
        Ok(CompiledExpr { ops, depth: max })
    }

    pub fn eval(&self, slots: &[f64]) -> Result<f64, ExprError> {
        let mut stack: Vec<f64> = Vec::with_capacity(self.depth);
        for op in &self.ops {
            match op {
                Op::Const(c) => stack.push(*c),
                Op::Load(i) => stack.push(slots[*i]),
                Op::Add(n) => {
                    let at = stack.len() - n;
                    let s = stack[at..].iter().sum();
                    stack.truncate(at);
                    stack.push(s);
                }
                Op::Mul(n) => {
                    let at = stack.len() - n;
                    let s = stack[at..].iter().product();
                    stack.truncate(at);
                    stack.push(s);
                }
                Op::Div => {
                    let d = stack.pop().unwrap();
                    let n = stack.pop().unwrap();
                    if d == 0.0 {
                        return Err(ExprError::DivisionByZero);
                    }
                    stack.push(n / d);
                }
                Op::Pow(k) => {
                    let v = stack.pop().unwrap();
                    if *k < 0 && v == 0.0 {
                        return Err(ExprError::DivisionByZero);
                    }
                    stack.push(v.powi(*k));
                }
                Op::Neg => {
                    let v = stack.pop().unwrap();
                    stack.push(-v);
                }
                Op::Func(f) => {
                    let v = stack.pop().unwrap();
                    stack.push(apply(*f, v)?);
                }
            }
        }
        Ok(stack.pop().unwrap_or(0.0))
    }
}
