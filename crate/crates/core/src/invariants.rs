//! The coordinate-free quantities of a contact point: the fast skewness `A`,
//! the function `G`, the normalising field `V`, the derivatives `V(G)` and
//! `V^2(G)`, the criticality quantity `sigma`, and the slow vector field.

use crate::expr::{is_identically_zero, Bindings, Expr, ExprError};
use crate::geom::{area_form, gradient, lie_bracket, lie_derivative, wedge, GeomError, Metric, VectorField};
use crate::model::{ContactPoint, ModelError, SlowFastModel, Tolerances};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InvariantError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("|Z^2 F| = {0:e} at the point; A is undefined for a degenerate contact")]
    DegenerateContact(f64),
    #[error("grad(F)^perp (ZF) vanishes identically; no normalising field V exists")]
    NoNormalisingField,
    #[error("ZF vanishes identically; the slow vector field is undefined")]
    TangentFastField,
}

/// Invariants evaluated at one contact point.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantSet {
    pub a: f64,
    pub g_expr: Expr,
    pub g_at_p: f64,
    pub vg_at_p: f64,
    pub v2g_at_p: f64,
    /// `v2g_at_p / 2 - vg_at_p * a`, stored exactly as computed by that formula.
    pub sigma: f64,
    pub v: VectorField,
    pub qtilde: Option<VectorField>,
}

/// `sigma = V^2(G)/2 - V(G) * A`.
pub fn sigma_from(a: f64, vg: f64, v2g: f64) -> f64 {
    0.5 * v2g - vg * a
}

/// `Z^3(F) / (Z^2(F))^2` at `p`.
pub fn compute_a(m: &SlowFastModel, p: &ContactPoint, tol: &Tolerances) -> Result<f64, InvariantError> {
    let zk = m.z_powers(3);
    a_from(&zk[2], &zk[3], &p.bindings(), tol)
}

fn a_from(z2f: &Expr, z3f: &Expr, b: &Bindings, tol: &Tolerances) -> Result<f64, InvariantError> {
    let z2 = z2f.evaluate(b)?;
    if z2.abs() <= tol.degenerate {
        return Err(InvariantError::DegenerateContact(z2));
    }
    Ok(z3f.evaluate(b)? / (z2 * z2))
}

/// `G = Omega(Q, Z) * Omega(grad F, grad ZF)` as a function on the chart,
/// computed with the model's metric.
pub fn compute_g(m: &SlowFastModel) -> Result<Expr, InvariantError> {
    compute_g_with_metric(m, &m.metric)
}

pub fn compute_g_with_metric(m: &SlowFastModel, metric: &Metric) -> Result<Expr, InvariantError> {
    let zf = m.zf();
    let left = area_form(&m.q, &m.z, metric);
    let right = area_form(&gradient(&m.f, metric)?, &gradient(&zf, metric)?, metric);
    Ok((left * right).simplify())
}

/// `W / W(ZF)` with `W = (-dF/dy, dF/dx)`, so that `V(F) = 0` and `V(ZF) = 1`.
pub fn compute_v(m: &SlowFastModel) -> Result<VectorField, InvariantError> {
    let w = perp_gradient(&m.f);
    let denom = lie_derivative(&w, &m.zf());
    if is_identically_zero(&denom, 0x5eed) {
        return Err(InvariantError::NoNormalisingField);
    }
    Ok(VectorField::new((w.vx / denom.clone()).simplify(), (w.vy / denom).simplify()))
}

fn perp_gradient(f: &Expr) -> VectorField {
    VectorField::new(Expr::neg(f.differentiate("y")).simplify(), f.differentiate("x"))
}

/// `Omega°(grad F, grad ZF)` with the Euclidean metric; equals `W(ZF)`.
pub fn normalisation_density(m: &SlowFastModel) -> Expr {
    wedge(&crate::geom::plain_gradient(&m.f), &crate::geom::plain_gradient(&m.zf()))
}

/// `Q - (Q(F)/Z(F)) Z`, the projection of `Q` along `Z` onto the tangent of S.
pub fn slow_vector_field(m: &SlowFastModel) -> Result<VectorField, InvariantError> {
    let zf = m.zf();
    if is_identically_zero(&zf, 0x5eed) {
        return Err(InvariantError::TangentFastField);
    }
    let qf = lie_derivative(&m.q, &m.f);
    if qf.is_structurally_zero() {
        return Ok(m.q.clone());
    }
    let c = Expr::neg(qf / zf).simplify();
    Ok(m.q.add(&m.z.scale(&c)))
}

/// The symbolic pipeline of a model, built once and evaluated at many points.
#[derive(Debug, Clone)]
pub struct InvariantExprs {
    pub zf: Expr,
    pub z2f: Expr,
    pub z3f: Expr,
    pub g: Expr,
    pub v: VectorField,
    pub vg: Expr,
    pub v2g: Expr,
    /// `Q(F)`, the classical jump criterion.
    pub qf: Expr,
    /// `[Z, Q](F)`, the classical Hopf/saddle criterion.
    pub bracket_f: Expr,
    pub qtilde: Option<VectorField>,
}

/// Numeric values of [`InvariantExprs`] at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantValues {
    pub a: f64,
    pub g: f64,
    pub vg: f64,
    pub v2g: f64,
    pub sigma: f64,
    pub qf: f64,
    pub bracket_f: f64,
}

impl InvariantExprs {
    pub fn build(m: &SlowFastModel) -> Result<Self, InvariantError> {
        let v = compute_v(m)?;
        Self::build_with_v(m, v)
    }

    /// Same pipeline with a caller-supplied normalising field.
    pub fn build_with_v(m: &SlowFastModel, v: VectorField) -> Result<Self, InvariantError> {
        let zk = m.z_powers(3);
        let g = compute_g(m)?;
        let vg = lie_derivative(&v, &g);
        let v2g = lie_derivative(&v, &vg);
        let qf = lie_derivative(&m.q, &m.f);
        let bracket_f = lie_derivative(&lie_bracket(&m.z, &m.q), &m.f);
        let qtilde = slow_vector_field(m).ok();
        Ok(InvariantExprs {
            zf: zk[1].clone(),
            z2f: zk[2].clone(),
            z3f: zk[3].clone(),
            g,
            v,
            vg,
            v2g,
            qf,
            bracket_f,
            qtilde,
        })
    }

    pub fn evaluate(&self, b: &Bindings, tol: &Tolerances) -> Result<InvariantValues, InvariantError> {
        let a = a_from(&self.z2f, &self.z3f, b, tol)?;
        let g = self.g.evaluate(b)?;
        let vg = self.vg.evaluate(b)?;
        let v2g = self.v2g.evaluate(b)?;
        Ok(InvariantValues {
            a,
            g,
            vg,
            v2g,
            sigma: sigma_from(a, vg, v2g),
            qf: self.qf.evaluate(b)?,
            bracket_f: self.bracket_f.evaluate(b)?,
        })
    }

    pub fn invariant_set(&self, p: &ContactPoint, tol: &Tolerances) -> Result<InvariantSet, InvariantError> {
        let vals = self.evaluate(&p.bindings(), tol)?;
        Ok(InvariantSet {
            a: vals.a,
            g_expr: self.g.clone(),
            g_at_p: vals.g,
            vg_at_p: vals.vg,
            v2g_at_p: vals.v2g,
            sigma: vals.sigma,
            v: self.v.clone(),
            qtilde: self.qtilde.clone(),
        })
    }
}

/// `G`, `V(G)`, `V^2(G)`, `A` and `sigma` at `p`.
pub fn compute_derived(m: &SlowFastModel, p: &ContactPoint, tol: &Tolerances) -> Result<InvariantSet, InvariantError> {
    InvariantExprs::build(m)?.invariant_set(p, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Symbols};
    use crate::model::find_contact_point;

    fn vdp() -> SlowFastModel {
        SlowFastModel::parse("y - x^2/2 - x^3/3", ["1", "0"], ["0", "lambda - x"], &["lambda"]).unwrap()
    }

    fn two_stroke() -> SlowFastModel {
        SlowFastModel::parse(
            "delta - y",
            ["y", "-x + alpha*y"],
            ["0", "-(beta - gamma*x)"],
            &["alpha", "beta", "gamma", "delta"],
        )
        .unwrap()
    }

    fn normal_form(q_y: &str) -> SlowFastModel {
        SlowFastModel::parse("y - x^2/2", ["1", "0"], ["0", q_y], &["g1", "g2"]).unwrap()
    }

    fn p(m: &SlowFastModel, s: &str) -> Expr {
        parse(s, &m.symbols).unwrap().simplify()
    }

    fn origin(m: &SlowFastModel, params: Bindings) -> ContactPoint {
        find_contact_point(m, (0.05, 0.05), &params, &Tolerances::default()).unwrap()
    }

    fn ts_point(m: &SlowFastModel) -> ContactPoint {
        let b: Bindings = [("alpha", 1.0), ("beta", 1.0), ("gamma", 1.0), ("delta", 1.0)].into();
        find_contact_point(m, (0.8, 0.9), &b, &Tolerances::default()).unwrap()
    }

    #[test]
    fn skewness_examples() {
        let tol = Tolerances::default();
        let m = vdp();
        assert_eq!(compute_a(&m, &origin(&m, [("lambda", 0.0)].into()), &tol).unwrap(), -2.0);
        let m = two_stroke();
        assert_eq!(compute_a(&m, &ts_point(&m), &tol).unwrap(), 1.0);
        let m = normal_form("g1*x");
        assert_eq!(compute_a(&m, &origin(&m, [("g1", -1.0), ("g2", 0.0)].into()), &tol).unwrap(), 0.0);
    }

    #[test]
    fn g_examples() {
        let m = vdp();
        assert_eq!(compute_g(&m).unwrap(), p(&m, "(1+2*x)*(x-lambda)"));
        let m = two_stroke();
        assert_eq!(compute_g(&m).unwrap(), p(&m, "y*(beta - gamma*x)"));
        let m = normal_form("g1*x + g2*x^2");
        assert_eq!(compute_g(&m).unwrap(), p(&m, "-(g1*x + g2*x^2)"));
    }

    #[test]
    fn v_examples() {
        let m = vdp();
        let v = compute_v(&m).unwrap();
        assert_eq!(v, VectorField::new(p(&m, "-1/(2*x+1)"), p(&m, "-(x^2+x)/(2*x+1)")));
        assert!(lie_derivative(&v, &m.f).is_zero_literal());
        assert_eq!(lie_derivative(&v, &m.zf()), Expr::one());

        let m = two_stroke();
        assert_eq!(compute_v(&m).unwrap(), VectorField::new(Expr::one(), Expr::zero()));
    }

    #[test]
    fn v_needs_a_nondegenerate_normalisation() {
        // ZF = 0 identically: no V with V(ZF) = 1
        let m = SlowFastModel::parse("y", ["1", "0"], ["0", "1"], &[]).unwrap();
        assert_eq!(compute_v(&m), Err(InvariantError::NoNormalisingField));
    }

    #[test]
    fn normalisation_density_matches_denominator() {
        let m = vdp();
        assert_eq!(normalisation_density(&m), p(&m, "1 + 2*x"));
    }

    #[test]
    fn derived_van_der_pol() {
        let m = vdp();
        let pt = origin(&m, [("lambda", 0.0)].into());
        let inv = compute_derived(&m, &pt, &Tolerances::default()).unwrap();
        assert_eq!(inv.g_at_p, 0.0);
        assert_eq!(inv.vg_at_p, -1.0);
        // V(G) = -(1+4x)/(1+2x) and V = -1/(1+2x) d/dx + ..., so V^2(G)(0) = +2
        assert_eq!(inv.v2g_at_p, 2.0);
        assert_eq!(inv.sigma, -1.0);
        assert_eq!(inv.sigma, 0.5 * inv.v2g_at_p - inv.vg_at_p * inv.a);
    }

    #[test]
    fn derived_two_stroke() {
        let m = two_stroke();
        let inv = compute_derived(&m, &ts_point(&m), &Tolerances::default()).unwrap();
        assert_eq!(inv.g_at_p, 0.0);
        assert_eq!(inv.vg_at_p, -1.0);
        assert_eq!(inv.v2g_at_p, 0.0);
        assert_eq!(inv.sigma, 1.0);
    }

    #[test]
    fn derived_normal_form() {
        let m = normal_form("-x + g2*x^2");
        for g2 in [-1.5, 0.25, 2.0] {
            let pt = origin(&m, [("g1", 0.0), ("g2", g2)].into());
            let inv = compute_derived(&m, &pt, &Tolerances::default()).unwrap();
            assert_eq!(inv.a, 0.0);
            assert_eq!(inv.vg_at_p, -1.0);
            assert_eq!(inv.v2g_at_p, -2.0 * g2);
            assert_eq!(inv.sigma, -g2);
        }
    }

    #[test]
    fn slow_field_is_tangent() {
        for m in [vdp(), two_stroke(), normal_form("g1*x + g2*x^2")] {
            let qt = slow_vector_field(&m).unwrap();
            assert!(is_identically_zero(&lie_derivative(&qt, &m.f), 3), "{}", m.name);
        }
    }

    #[test]
    fn slow_field_examples() {
        // tangent Q is returned unchanged
        let m = SlowFastModel::parse("y - x^2/2", ["1", "0"], ["1", "x"], &[]).unwrap();
        assert_eq!(slow_vector_field(&m).unwrap(), m.q);

        let m = vdp();
        let qt = slow_vector_field(&m).unwrap();
        let c = p(&m, "-(lambda - x)/(-x - x^2)");
        assert_eq!(qt, m.q.add(&m.z.scale(&c)));
        assert!(crate::expr::is_identically_zero(&(qt.vx.clone() - p(&m, "(lambda - x)/(x + x^2)")), 5));

        // normal form F = y - f(x), Z = d/dx, Q = g d/dy: Qtilde = (g/f') (d/dx + f' d/dy)
        let m = SlowFastModel::parse("y - x^2/2 - x^3", ["1", "0"], ["0", "1 + x"], &[]).unwrap();
        let qt = slow_vector_field(&m).unwrap();
        assert!(is_identically_zero(&(qt.vx.clone() - p(&m, "(1 + x)/(x + 3*x^2)")), 5));
        assert!(is_identically_zero(&(qt.vy.clone() - p(&m, "1 + x")), 5));

        let m = SlowFastModel::parse("y", ["0", "0"], ["1", "0"], &[]).unwrap();
        assert_eq!(slow_vector_field(&m), Err(InvariantError::TangentFastField));
    }

    #[test]
    fn metric_changes_extension_but_not_restriction() {
        let m = vdp();
        let metric = Metric::new(Expr::int(2), Expr::int(1), Expr::int(3));
        let g_id = compute_g(&m).unwrap();
        let g_m = compute_g_with_metric(&m, &metric).unwrap();
        for x in [-0.3, 0.0, 0.2] {
            let y = x * x / 2.0 + x * x * x / 3.0;
            let b = Bindings::new().with("lambda", 0.1).at(x, y);
            let (u, w) = (g_id.evaluate(&b).unwrap(), g_m.evaluate(&b).unwrap());
            assert!((u - w).abs() < 1e-12, "{u} vs {w}");
        }
        let _ = Symbols::planar(["lambda"]);
    }
}
