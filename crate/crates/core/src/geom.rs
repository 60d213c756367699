//! Vector fields, Lie derivatives and brackets, metric gradients and the
//! metric area form on the planar chart `(x, y)`.

use serde::{Deserialize, Serialize};

use crate::expr::{is_identically_zero, Bindings, Expr, ExprError};

/// A planar vector field `vx d/dx + vy d/dy`, identified with its Lie derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub vx: Expr,
    pub vy: Expr,
}

impl VectorField {
    pub fn new(vx: Expr, vy: Expr) -> Self {
        VectorField { vx, vy }
    }

    pub fn zero() -> Self {
        VectorField::new(Expr::zero(), Expr::zero())
    }

    pub fn scale(&self, c: &Expr) -> VectorField {
        VectorField::new((c.clone() * self.vx.clone()).simplify(), (c.clone() * self.vy.clone()).simplify())
    }

    pub fn add(&self, o: &VectorField) -> VectorField {
        VectorField::new((self.vx.clone() + o.vx.clone()).simplify(), (self.vy.clone() + o.vy.clone()).simplify())
    }

    pub fn simplify(&self) -> VectorField {
        VectorField::new(self.vx.simplify(), self.vy.simplify())
    }

    /// `V(f) = vx * df/dx + vy * df/dy`.
    pub fn apply(&self, f: &Expr) -> Expr {
        lie_derivative(self, f)
    }

    pub fn evaluate(&self, b: &Bindings) -> Result<(f64, f64), ExprError> {
        Ok((self.vx.evaluate(b)?, self.vy.evaluate(b)?))
    }
}

/// Coefficients `(E, F, G)` of the first fundamental form.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    pub e: Expr,
    pub fm: Expr,
    pub g: Expr,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeomError {
    #[error("metric determinant E*G - F^2 vanishes identically")]
    DegenerateMetric,
    #[error("metric is not positive definite at ({x}, {y}): E = {e}, det = {det}")]
    Inadmissible { x: f64, y: f64, e: f64, det: f64 },
    #[error(transparent)]
    Expr(#[from] ExprError),
}

impl Default for Metric {
    fn default() -> Self {
        Metric::identity()
    }
}

impl Metric {
    pub fn identity() -> Self {
        Metric { e: Expr::one(), fm: Expr::zero(), g: Expr::one() }
    }

    pub fn new(e: Expr, fm: Expr, g: Expr) -> Self {
        Metric { e, fm, g }
    }

    pub fn is_identity(&self) -> bool {
        self.e.simplify() == Expr::one() && self.fm.simplify().is_zero_literal() && self.g.simplify() == Expr::one()
    }

    /// `E*G - F^2`.
    pub fn determinant(&self) -> Expr {
        (self.e.clone() * self.g.clone() - Expr::pow(self.fm.clone(), 2)).simplify()
    }

    /// Area density `sqrt(E*G - F^2)`.
    pub fn density(&self) -> Expr {
        Expr::func(crate::expr::Func::Sqrt, self.determinant()).simplify()
    }

    /// Positive definiteness at one point: `E > 0` and `E*G - F^2 > 0`.
    pub fn check_admissible(&self, b: &Bindings) -> Result<(), GeomError> {
        let e = self.e.evaluate(b)?;
        let det = self.determinant().evaluate(b)?;
        if e > 0.0 && det > 0.0 && e.is_finite() && det.is_finite() {
            Ok(())
        } else {
            Err(GeomError::Inadmissible {
                x: b.get("x").unwrap_or(f64::NAN),
                y: b.get("y").unwrap_or(f64::NAN),
                e,
                det,
            })
        }
    }
}

/// Metric coefficients as they appear in model files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    #[serde(rename = "E")]
    pub e: String,
    #[serde(rename = "F")]
    pub f: String,
    #[serde(rename = "G")]
    pub g: String,
}

pub fn lie_derivative(v: &VectorField, f: &Expr) -> Expr {
    let fx = f.differentiate("x");
    let fy = f.differentiate("y");
    (v.vx.clone() * fx + v.vy.clone() * fy).simplify()
}

/// `[V, W]`, acting as `f -> V(W(f)) - W(V(f))`.
pub fn lie_bracket(v: &VectorField, w: &VectorField) -> VectorField {
    VectorField::new(
        (lie_derivative(v, &w.vx) - lie_derivative(w, &v.vx)).simplify(),
        (lie_derivative(v, &w.vy) - lie_derivative(w, &v.vy)).simplify(),
    )
}

/// Euclidean gradient `(df/dx, df/dy)`.
pub fn plain_gradient(f: &Expr) -> VectorField {
    VectorField::new(f.differentiate("x"), f.differentiate("y"))
}

/// Metric gradient `M^-1 (df/dx, df/dy)` with `M = [[E, F], [F, G]]`.
pub fn gradient(f: &Expr, m: &Metric) -> Result<VectorField, GeomError> {
    let d = plain_gradient(f);
    if m.is_identity() {
        return Ok(d);
    }
    let det = m.determinant();
    if is_identically_zero(&det, 0x5eed) {
        return Err(GeomError::DegenerateMetric);
    }
    let gx = (m.g.clone() * d.vx.clone() - m.fm.clone() * d.vy.clone()) / det.clone();
    let gy = (m.e.clone() * d.vy - m.fm.clone() * d.vx) / det;
    Ok(VectorField::new(gx.simplify(), gy.simplify()))
}

/// Plain determinant `ax*by - ay*bx`.
pub fn wedge(a: &VectorField, b: &VectorField) -> Expr {
    (a.vx.clone() * b.vy.clone() - a.vy.clone() * b.vx.clone()).simplify()
}

/// Metric area form `sqrt(E*G - F^2) * (ax*by - ay*bx)`.
pub fn area_form(a: &VectorField, b: &VectorField, m: &Metric) -> Expr {
    let w = wedge(a, b);
    if m.is_identity() {
        return w;
    }
    (m.density() * w).simplify()
}
