//! The slow-fast triplet `(F, Z, Q)`, assumption checks at candidate points,
//! and numerical location and continuation of contact points.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::expr::{parse, Bindings, CompiledExpr, Expr, ExprError, Num, Symbols};
use crate::geom::{lie_derivative, GeomError, Metric, VectorField};

/// `v` as the exact rational of its shortest decimal form, so `0.3` is `3/10`.
fn decimal(v: f64) -> Expr {
    if !v.is_finite() {
        return Expr::float(v);
    }
    let s = format!("{}", v.abs());
    let (int, frac) = s.split_once('.').unwrap_or((&s, ""));
    let digits: BigInt = format!("{int}{frac}").parse().expect("decimal digits");
    let digits = if v < 0.0 { -digits } else { digits };
    let r = BigRational::new(digits, BigInt::from(10).pow(frac.len() as u32));
    Expr::constant(Num::Exact(r))
}

/// Numerical thresholds shared by point finding and classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Newton stops once a step is shorter than this (relative to `1 + |p|`).
    pub newton_step: f64,
    /// Accepted `|F|` and `|ZF|` at a contact point.
    pub residual: f64,
    /// Dead zone for every sign decision.
    pub degenerate: f64,
    pub max_iterations: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { newton_step: 1e-12, residual: 1e-10, degenerate: 1e-8, max_iterations: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("Newton iteration did not converge after {iterations} iterations (last point ({x}, {y}), residual {residual:e})")]
    NoConvergence { iterations: usize, x: f64, y: f64, residual: f64 },
    #[error("degenerate contact point at ({x}, {y}): |Z^2 F| = {z2f:e} is below the threshold")]
    DegenerateContact { x: f64, y: f64, z2f: f64 },
    #[error("assumption {which} fails at ({x}, {y}): witness value {value:e}")]
    AssumptionViolation { which: &'static str, x: f64, y: f64, value: f64 },
}

/// The triplet presentation `X = F*Z + eps*Q + O(eps^2)` on the chart `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlowFastModel {
    pub name: String,
    pub symbols: Symbols,
    pub f: Expr,
    pub z: VectorField,
    pub q: VectorField,
    pub metric: Metric,
}

const RESERVED: [&str; 3] = ["eps", "epsilon", "t"];

impl SlowFastModel {
    pub fn new(f: Expr, z: VectorField, q: VectorField, parameters: Vec<String>) -> Result<Self, ModelError> {
        let symbols = Symbols::planar(parameters);
        for p in &symbols.parameters {
            if RESERVED.contains(&p.as_str()) || symbols.is_variable(p) {
                return Err(ModelError::Invalid(format!("`{p}` cannot be used as a parameter name")));
            }
        }
        let m = SlowFastModel { name: String::new(), symbols, f, z, q, metric: Metric::identity() };
        m.check_symbols()?;
        Ok(m)
    }

    /// Builds a model from expression strings.
    pub fn parse(f: &str, z: [&str; 2], q: [&str; 2], parameters: &[&str]) -> Result<Self, ModelError> {
        let symbols = Symbols::planar(parameters.iter().copied());
        let e = |s: &str| parse(s, &symbols);
        Self::new(
            e(f)?,
            VectorField::new(e(z[0])?, e(z[1])?),
            VectorField::new(e(q[0])?, e(q[1])?),
            symbols.parameters.clone(),
        )
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_metric(mut self, metric: Metric) -> Result<Self, ModelError> {
        self.metric = metric;
        self.check_symbols()?;
        Ok(self)
    }

    pub fn parameters(&self) -> &[String] {
        &self.symbols.parameters
    }

    fn check_symbols(&self) -> Result<(), ModelError> {
        let all = [
            &self.f,
            &self.z.vx,
            &self.z.vy,
            &self.q.vx,
            &self.q.vy,
            &self.metric.e,
            &self.metric.fm,
            &self.metric.g,
        ];
        for e in all {
            for s in e.free_symbols() {
                if !self.symbols.is_variable(&s) && !self.symbols.is_parameter(&s) {
                    return Err(ModelError::Expr(ExprError::Undeclared(s)));
                }
            }
        }
        Ok(())
    }

    /// The model with the given parameter values substituted as exact decimals.
    /// Parameters without a value are kept symbolic.
    pub fn specialize(&self, params: &Bindings) -> SlowFastModel {
        let r: BTreeMap<String, Expr> = self
            .parameters()
            .iter()
            .filter_map(|n| params.get(n).map(|v| (n.clone(), v)))
            .map(|(n, v)| {
                (n, decimal(v))
            })
            .collect();
        let sub = |e: &Expr| e.substitute(&r);
        let field = |v: &VectorField| VectorField::new(sub(&v.vx), sub(&v.vy));
        SlowFastModel {
            name: self.name.clone(),
            symbols: self.symbols.clone(),
            f: sub(&self.f),
            z: field(&self.z),
            q: field(&self.q),
            metric: Metric::new(sub(&self.metric.e), sub(&self.metric.fm), sub(&self.metric.g)),
        }
    }

    pub fn zf(&self) -> Expr {
        lie_derivative(&self.z, &self.f)
    }

    /// `Z^k(F)` for `k = 0..=order`.
    pub fn z_powers(&self, order: usize) -> Vec<Expr> {
        let mut out = vec![self.f.clone()];
        for _ in 0..order {
            let next = lie_derivative(&self.z, out.last().unwrap());
            out.push(next);
        }
        out
    }

    /// Slot order used when compiling this model's expressions.
    pub fn slots(&self) -> Vec<&str> {
        let mut s = vec!["x", "y"];
        s.extend(self.symbols.parameters.iter().map(String::as_str));
        s
    }

    /// Parameter values in slot order; every parameter must be bound.
    pub fn param_values(&self, params: &Bindings) -> Result<Vec<f64>, ModelError> {
        self.symbols
            .parameters
            .iter()
            .map(|p| params.get(p).ok_or_else(|| ModelError::Expr(ExprError::Unbound(p.clone()))))
            .collect()
    }

    /// Only the model's own parameters, taken from `params`.
    pub fn restrict_params(&self, params: &Bindings) -> Result<Bindings, ModelError> {
        let vals = self.param_values(params)?;
        Ok(Bindings(self.symbols.parameters.iter().cloned().zip(vals).collect()))
    }
}

/// Values at a point that witness the standing assumptions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "ZF")]
    pub zf: f64,
    #[serde(rename = "Z2F")]
    pub z2f: f64,
    #[serde(rename = "Z3F")]
    pub z3f: f64,
    #[serde(rename = "gradF_norm")]
    pub grad_f_norm: f64,
    #[serde(rename = "Z_norm")]
    pub z_norm: f64,
}

/// A generic contact point: `F = ZF = 0`, `Z^2 F != 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactPoint {
    pub x: f64,
    pub y: f64,
    pub params: Bindings,
    pub diagnostics: Diagnostics,
}

impl ContactPoint {
    /// Bindings of the point coordinates together with the parameters.
    pub fn bindings(&self) -> Bindings {
        self.params.at(self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// Regular critical curve: `|grad F| > tol`.
    pub a1_ok: bool,
    /// Non-vanishing fast direction: `|Z| > tol`.
    pub a2_ok: bool,
    /// Generic contact: `|Z^2 F| > tol`.
    pub a3_ok: bool,
    pub grad_f_norm: f64,
    pub z_norm: f64,
    pub z2f: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "ZF")]
    pub zf: f64,
}

/// Compiled `F`, `ZF`, their partial derivatives and `Z^2F`, `Z^3F`.
struct ContactSystem {
    f: CompiledExpr,
    zf: CompiledExpr,
    z2f: CompiledExpr,
    z3f: CompiledExpr,
    fx: CompiledExpr,
    fy: CompiledExpr,
    zfx: CompiledExpr,
    zfy: CompiledExpr,
    zx: CompiledExpr,
    zy: CompiledExpr,
}

impl ContactSystem {
    fn new(m: &SlowFastModel) -> Result<Self, ModelError> {
        let slots = m.slots();
        let c = |e: &Expr| e.compile(&slots);
        let zk = m.z_powers(3);
        Ok(ContactSystem {
            f: c(&zk[0])?,
            zf: c(&zk[1])?,
            z2f: c(&zk[2])?,
            z3f: c(&zk[3])?,
            fx: c(&zk[0].differentiate("x"))?,
            fy: c(&zk[0].differentiate("y"))?,
            zfx: c(&zk[1].differentiate("x"))?,
            zfy: c(&zk[1].differentiate("y"))?,
            zx: c(&m.z.vx)?,
            zy: c(&m.z.vy)?,
        })
    }

    fn diagnostics(&self, s: &[f64]) -> Result<Diagnostics, ModelError> {
        Ok(Diagnostics {
            f: self.f.eval(s)?,
            zf: self.zf.eval(s)?,
            z2f: self.z2f.eval(s)?,
            z3f: self.z3f.eval(s)?,
            grad_f_norm: self.fx.eval(s)?.hypot(self.fy.eval(s)?),
            z_norm: self.zx.eval(s)?.hypot(self.zy.eval(s)?),
        })
    }

    fn newton(&self, guess: (f64, f64), pv: &[f64], tol: &Tolerances) -> Result<(f64, f64), ModelError> {
        let mut s = Vec::with_capacity(2 + pv.len());
        s.extend([guess.0, guess.1]);
        s.extend_from_slice(pv);
        let residual = |s: &[f64]| -> Result<f64, ModelError> { Ok(self.f.eval(s)?.abs().max(self.zf.eval(s)?.abs())) };
        let mut iterations = 0;
        while iterations < tol.max_iterations {
            iterations += 1;
            let r0 = self.f.eval(&s)?;
            let r1 = self.zf.eval(&s)?;
            let (a, b) = (self.fx.eval(&s)?, self.fy.eval(&s)?);
            let (c, d) = (self.zfx.eval(&s)?, self.zfy.eval(&s)?);
            let det = a * d - b * c;
            if det == 0.0 || !det.is_finite() {
                break;
            }
            let dx = -(d * r0 - b * r1) / det;
            let dy = -(-c * r0 + a * r1) / det;
            s[0] += dx;
            s[1] += dy;
            let step = dx.hypot(dy);
            if !step.is_finite() || step > 1e8 {
                return Err(ModelError::NoConvergence { iterations, x: s[0], y: s[1], residual: f64::INFINITY });
            }
            if step <= tol.newton_step * (1.0 + s[0].hypot(s[1])) {
                break;
            }
        }
        let res = residual(&s)?;
        if res <= tol.residual {
            Ok((s[0], s[1]))
        } else {
            Err(ModelError::NoConvergence { iterations, x: s[0], y: s[1], residual: res })
        }
    }
}

fn slot_values(x: f64, y: f64, pv: &[f64]) -> Vec<f64> {
    let mut s = vec![x, y];
    s.extend_from_slice(pv);
    s
}

fn report(d: &Diagnostics, tol: &Tolerances) -> AssumptionReport {
    AssumptionReport {
        a1_ok: d.grad_f_norm > tol.degenerate,
        a2_ok: d.z_norm > tol.degenerate,
        a3_ok: d.z2f.abs() > tol.degenerate,
        grad_f_norm: d.grad_f_norm,
        z_norm: d.z_norm,
        z2f: d.z2f,
        f: d.f,
        zf: d.zf,
    }
}

/// Evaluates the assumption witnesses at `p` and applies the thresholds.
pub fn check_assumptions(
    m: &SlowFastModel,
    p: (f64, f64),
    params: &Bindings,
    tol: &Tolerances,
) -> Result<AssumptionReport, ModelError> {
    let sys = ContactSystem::new(m)?;
    let pv = m.param_values(params)?;
    let d = sys.diagnostics(&slot_values(p.0, p.1, &pv))?;
    Ok(report(&d, tol))
}

/// Diagnostics at an arbitrary point without any Newton refinement.
pub fn point_diagnostics(m: &SlowFastModel, p: (f64, f64), params: &Bindings) -> Result<Diagnostics, ModelError> {
    let sys = ContactSystem::new(m)?;
    let pv = m.param_values(params)?;
    sys.diagnostics(&slot_values(p.0, p.1, &pv))
}

/// Newton iteration on `(x, y) -> (F, ZF)` from `guess`.
pub fn find_contact_point(
    m: &SlowFastModel,
    guess: (f64, f64),
    params: &Bindings,
    tol: &Tolerances,
) -> Result<ContactPoint, ModelError> {
    let sys = ContactSystem::new(m)?;
    solve_with(&sys, m, guess, params, tol)
}

fn solve_with(
    sys: &ContactSystem,
    m: &SlowFastModel,
    guess: (f64, f64),
    params: &Bindings,
    tol: &Tolerances,
) -> Result<ContactPoint, ModelError> {
    if !(guess.0.is_finite() && guess.1.is_finite()) {
        return Err(ModelError::Invalid("guess point must be finite".into()));
    }
    let pv = m.param_values(params)?;
    let (x, y) = sys.newton(guess, &pv, tol)?;
    let d = sys.diagnostics(&slot_values(x, y, &pv))?;
    let r = report(&d, tol);
    if !r.a1_ok {
        return Err(ModelError::AssumptionViolation { which: "A1", x, y, value: d.grad_f_norm });
    }
    if !r.a2_ok {
        return Err(ModelError::AssumptionViolation { which: "A2", x, y, value: d.z_norm });
    }
    if !r.a3_ok {
        return Err(ModelError::DegenerateContact { x, y, z2f: d.z2f });
    }
    Ok(ContactPoint { x, y, params: m.restrict_params(params)?, diagnostics: d })
}

/// Continues `base` to `new_params` by Newton from the base coordinates.
pub fn track_contact_point(
    m: &SlowFastModel,
    base: &ContactPoint,
    new_params: &Bindings,
    tol: &Tolerances,
) -> Result<ContactPoint, ModelError> {
    find_contact_point(m, (base.x, base.y), new_params, tol)
}

/// Reusable solver for repeated continuation on one model.
pub struct ContactTracker<'m> {
    model: &'m SlowFastModel,
    sys: ContactSystem,
    tol: Tolerances,
}

impl<'m> ContactTracker<'m> {
    pub fn new(model: &'m SlowFastModel, tol: Tolerances) -> Result<Self, ModelError> {
        Ok(ContactTracker { model, sys: ContactSystem::new(model)?, tol })
    }

    pub fn track(&self, base: &ContactPoint, new_params: &Bindings) -> Result<ContactPoint, ModelError> {
        solve_with(&self.sys, self.model, (base.x, base.y), new_params, &self.tol)
    }
}
