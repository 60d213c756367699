//! Decision tree for contact points and the transversality (rank) conditions
//! in the parameters.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::expr::{Bindings, CompiledExpr};
use crate::invariants::{InvariantError, InvariantExprs, InvariantValues};
use crate::model::{point_diagnostics, ContactPoint, ContactTracker, ModelError, SlowFastModel, Tolerances};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClassifyError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Invariant(#[from] InvariantError),
    #[error("point ({x}, {y}) is not on the critical curve: |F| = {f:e}")]
    NotOnCriticalCurve { x: f64, y: f64, f: f64 },
    #[error("unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("continuation failed at {param} = {value}: {source}")]
    Continuation { param: String, value: f64, source: ModelError },
}

impl From<crate::expr::ExprError> for ClassifyError {
    fn from(e: crate::expr::ExprError) -> Self {
        ClassifyError::Model(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stability {
    Attracting,
    Repelling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Criticality {
    Supercritical,
    Subcritical,
    /// `|sigma|` inside the dead zone (Bautin).
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Negative,
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    NormallyHyperbolic(Stability),
    Jump,
    SlowFastHopf(Criticality),
    SingularSaddle,
    /// Carries the sign of `V^2(G)(p)`, which fixes the criticality of the Hopf curve.
    BogdanovTakens(Sign),
    Indeterminate,
}

impl Kind {
    pub fn name(&self) -> &'static str {
        match self {
            Kind::NormallyHyperbolic(_) => "NormallyHyperbolic",
            Kind::Jump => "Jump",
            Kind::SlowFastHopf(_) => "SlowFastHopf",
            Kind::SingularSaddle => "SingularSaddle",
            Kind::BogdanovTakens(_) => "BogdanovTakens",
            Kind::Indeterminate => "Indeterminate",
        }
    }

    pub fn subkind(&self) -> Option<&'static str> {
        Some(match self {
            Kind::NormallyHyperbolic(Stability::Attracting) => "attracting",
            Kind::NormallyHyperbolic(Stability::Repelling) => "repelling",
            Kind::SlowFastHopf(Criticality::Supercritical) => "supercritical",
            Kind::SlowFastHopf(Criticality::Subcritical) => "subcritical",
            Kind::SlowFastHopf(Criticality::Degenerate) => "degenerate",
            Kind::BogdanovTakens(Sign::Negative) => "negative",
            Kind::BogdanovTakens(Sign::Positive) => "positive",
            _ => return None,
        })
    }

    pub fn from_parts(name: &str, subkind: Option<&str>) -> Option<Kind> {
        let k = match (name, subkind) {
            ("NormallyHyperbolic", Some("attracting")) => Kind::NormallyHyperbolic(Stability::Attracting),
            ("NormallyHyperbolic", Some("repelling")) => Kind::NormallyHyperbolic(Stability::Repelling),
            ("Jump", None) => Kind::Jump,
            ("SlowFastHopf", Some("supercritical")) => Kind::SlowFastHopf(Criticality::Supercritical),
            ("SlowFastHopf", Some("subcritical")) => Kind::SlowFastHopf(Criticality::Subcritical),
            ("SlowFastHopf", Some("degenerate")) => Kind::SlowFastHopf(Criticality::Degenerate),
            ("SingularSaddle", None) => Kind::SingularSaddle,
            ("BogdanovTakens", Some("negative")) => Kind::BogdanovTakens(Sign::Negative),
            ("BogdanovTakens", Some("positive")) => Kind::BogdanovTakens(Sign::Positive),
            ("Indeterminate", None) => Kind::Indeterminate,
            _ => return None,
        };
        Some(k)
    }

    /// True for contact points where `G(p) = 0`.
    pub fn is_singular_contact(&self) -> bool {
        matches!(
            self,
            Kind::SlowFastHopf(_) | Kind::SingularSaddle | Kind::BogdanovTakens(_) | Kind::Indeterminate
        )
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.subkind() {
            Some(s) => write!(f, "{}({})", self.name(), s),
            None => f.write_str(self.name()),
        }
    }
}

/// The numbers the decision was made from. Values past the deciding step are
/// still recorded when they could be computed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Evidence {
    #[serde(rename = "ZF")]
    pub zf: f64,
    #[serde(rename = "Z2F")]
    pub z2f: Option<f64>,
    #[serde(rename = "QF")]
    pub qf: Option<f64>,
    #[serde(rename = "bracket_ZQ_F")]
    pub bracket_f: Option<f64>,
    #[serde(rename = "G")]
    pub g: Option<f64>,
    #[serde(rename = "VG")]
    pub vg: Option<f64>,
    #[serde(rename = "V2G")]
    pub v2g: Option<f64>,
    #[serde(rename = "A")]
    pub a: Option<f64>,
    pub sigma: Option<f64>,
    /// Whether `|Q(F)(p)| > tau` and `|G(p)| > tau` give the same jump verdict.
    pub jump_criteria_agree: Option<bool>,
}

/// `-1`, `0` or `1`, with `|v| <= tau` mapped to `0`.
pub fn sign_with_dead_zone(v: f64, tau: f64) -> i8 {
    if v > tau {
        1
    } else if v < -tau {
        -1
    } else {
        0
    }
}

impl Evidence {
    fn from_values(zf: f64, z2f: f64, v: &InvariantValues, tau: f64) -> Self {
        Evidence {
            zf,
            z2f: Some(z2f),
            qf: Some(v.qf),
            bracket_f: Some(v.bracket_f),
            g: Some(v.g),
            vg: Some(v.vg),
            v2g: Some(v.v2g),
            a: Some(v.a),
            sigma: Some(v.sigma),
            jump_criteria_agree: Some((v.g.abs() > tau) == (v.qf.abs() > tau)),
        }
    }

    /// The decision tree. Missing values route to `Indeterminate`.
    pub fn decide(&self, tau: f64) -> Kind {
        if self.zf > tau {
            return Kind::NormallyHyperbolic(Stability::Repelling);
        }
        if self.zf < -tau {
            return Kind::NormallyHyperbolic(Stability::Attracting);
        }
        let (Some(z2f), Some(g), Some(vg), Some(v2g), Some(sigma)) = (self.z2f, self.g, self.vg, self.v2g, self.sigma)
        else {
            return Kind::Indeterminate;
        };
        if z2f.abs() <= tau {
            return Kind::Indeterminate;
        }
        if g.abs() > tau {
            return Kind::Jump;
        }
        match sign_with_dead_zone(vg, tau) {
            -1 => Kind::SlowFastHopf(match sign_with_dead_zone(sigma, tau) {
                -1 => Criticality::Supercritical,
                1 => Criticality::Subcritical,
                _ => Criticality::Degenerate,
            }),
            1 => Kind::SingularSaddle,
            _ => match sign_with_dead_zone(v2g, tau) {
                -1 => Kind::BogdanovTakens(Sign::Negative),
                1 => Kind::BogdanovTakens(Sign::Positive),
                _ => Kind::Indeterminate,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// One row: `d/dlambda G(p_lambda)`.
    Hopf,
    /// Two rows: `d/dlambda (G(p_lambda), V(G)(p_lambda))`.
    Bt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransversalityReport {
    pub mode: Mode,
    pub params: Vec<String>,
    /// Row-major, one row per condition and one column per parameter.
    pub jacobian: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
}

impl TransversalityReport {
    /// Rank the theorem asks for: 1 in Hopf mode, 2 in BT mode.
    pub fn required_rank(&self) -> usize {
        match self.mode {
            Mode::Hopf => 1,
            Mode::Bt => 2,
        }
    }

    pub fn is_transversal(&self) -> bool {
        self.rank >= self.required_rank()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ClassificationRepr", try_from = "ClassificationRepr")]
pub struct Classification {
    pub kind: Kind,
    pub evidence: Evidence,
    pub transversality: Option<TransversalityReport>,
}

#[derive(Serialize, Deserialize)]
struct ClassificationRepr {
    kind: String,
    subkind: Option<String>,
    evidence: Evidence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    transversality: Option<TransversalityReport>,
}

impl From<Classification> for ClassificationRepr {
    fn from(c: Classification) -> Self {
        ClassificationRepr {
            kind: c.kind.name().to_string(),
            subkind: c.kind.subkind().map(str::to_string),
            evidence: c.evidence,
            transversality: c.transversality,
        }
    }
}

impl TryFrom<ClassificationRepr> for Classification {
    type Error = String;

    fn try_from(r: ClassificationRepr) -> Result<Self, String> {
        let kind = Kind::from_parts(&r.kind, r.subkind.as_deref())
            .ok_or_else(|| format!("unknown classification {}({:?})", r.kind, r.subkind))?;
        Ok(Classification { kind, evidence: r.evidence, transversality: r.transversality })
    }
}

/// Symbolic pipeline of one model, reused across points and parameter values.
pub struct Classifier<'m> {
    model: &'m SlowFastModel,
    exprs: InvariantExprs,
    g: CompiledExpr,
    vg: CompiledExpr,
    tol: Tolerances,
}

impl<'m> Classifier<'m> {
    pub fn new(model: &'m SlowFastModel, tol: Tolerances) -> Result<Self, ClassifyError> {
        let exprs = InvariantExprs::build(model)?;
        let slots = model.slots();
        let g = exprs.g.compile(&slots)?;
        let vg = exprs.vg.compile(&slots)?;
        Ok(Classifier { model, exprs, g, vg, tol })
    }

    pub fn exprs(&self) -> &InvariantExprs {
        &self.exprs
    }

    pub fn model(&self) -> &SlowFastModel {
        self.model
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    /// Runs the decision tree at `q`, which must lie on the critical curve.
    pub fn classify(&self, q: (f64, f64), params: &Bindings) -> Result<Classification, ClassifyError> {
        let (x, y) = q;
        let tau = self.tol.degenerate;
        let d = point_diagnostics(self.model, q, params)?;
        if !(d.f.abs() <= self.tol.residual) {
            return Err(ClassifyError::NotOnCriticalCurve { x, y, f: d.f });
        }
        if d.grad_f_norm <= tau {
            return Err(ModelError::AssumptionViolation { which: "A1", x, y, value: d.grad_f_norm }.into());
        }
        if d.z_norm <= tau {
            return Err(ModelError::AssumptionViolation { which: "A2", x, y, value: d.z_norm }.into());
        }
        if d.zf.abs() > tau {
            let evidence = Evidence { zf: d.zf, z2f: Some(d.z2f), ..Evidence::default() };
            return Ok(Classification { kind: evidence.decide(tau), evidence, transversality: None });
        }
        if d.z2f.abs() <= tau {
            return Err(ModelError::DegenerateContact { x, y, z2f: d.z2f }.into());
        }
        let b = self.model.restrict_params(params)?.at(x, y);
        let vals = self.exprs.evaluate(&b, &self.tol)?;
        let evidence = Evidence::from_values(d.zf, d.z2f, &vals, tau);
        Ok(Classification { kind: evidence.decide(tau), evidence, transversality: None })
    }

    pub fn classify_contact(&self, p: &ContactPoint) -> Result<Classification, ClassifyError> {
        self.classify((p.x, p.y), &p.params)
    }

    /// Classification plus the transversality report matching its kind.
    pub fn classify_with_transversality(&self, p: &ContactPoint) -> Result<Classification, ClassifyError> {
        let mut c = self.classify_contact(p)?;
        let mode = match c.kind {
            Kind::SlowFastHopf(_) => Some(Mode::Hopf),
            Kind::BogdanovTakens(_) => Some(Mode::Bt),
            _ => None,
        };
        if let Some(mode) = mode {
            c.transversality = Some(self.transversality(p, mode)?);
        }
        Ok(c)
    }

    pub fn transversality(&self, p: &ContactPoint, mode: Mode) -> Result<TransversalityReport, ClassifyError> {
        let names: Vec<&str> = self.model.parameters().iter().map(String::as_str).collect();
        self.transversality_in(p, mode, &names)
    }

    /// Transversality restricted to the parameters in `names`.
    pub fn transversality_in(
        &self,
        p: &ContactPoint,
        mode: Mode,
        names: &[&str],
    ) -> Result<TransversalityReport, ClassifyError> {
        for n in names {
            if !self.model.parameters().iter().any(|q| q == n) {
                return Err(ClassifyError::UnknownParameter(n.to_string()));
            }
        }
        let tracker = ContactTracker::new(self.model, self.tol)?;
        let rows = match mode {
            Mode::Hopf => 1,
            Mode::Bt => 2,
        };
        let mut jacobian = vec![Vec::with_capacity(names.len()); rows];
        for name in names {
            let lam = p.params.get(name).unwrap_or(0.0);
            let h = 1e-6 * lam.abs().max(1.0);
            let plus = self.stencil_values(&tracker, p, name, lam + h)?;
            let minus = self.stencil_values(&tracker, p, name, lam - h)?;
            for (r, row) in jacobian.iter_mut().enumerate() {
                row.push((plus[r] - minus[r]) / (2.0 * h));
            }
        }
        let singular_values = singular_values(&jacobian);
        let rank = numeric_rank(&singular_values, self.tol.degenerate);
        Ok(TransversalityReport {
            mode,
            params: names.iter().map(|s| s.to_string()).collect(),
            jacobian,
            singular_values,
            rank,
        })
    }

    fn stencil_values(
        &self,
        tracker: &ContactTracker<'_>,
        p: &ContactPoint,
        name: &str,
        value: f64,
    ) -> Result<[f64; 2], ClassifyError> {
        let params = p.params.clone().with(name, value);
        let moved = tracker.track(p, &params).map_err(|source| ClassifyError::Continuation {
            param: name.to_string(),
            value,
            source,
        })?;
        let s = slot_values(self.model, &moved)?;
        Ok([self.g.eval(&s)?, self.vg.eval(&s)?])
    }

    /// Sign of `[Z, Q](F)(p)` against sign of `V(G)(p)`: both name the same
    /// Hopf (negative) or saddle (positive) verdict.
    pub fn crosscheck(&self, p: &ContactPoint) -> Result<bool, ClassifyError> {
        let b = p.bindings();
        let bracket = self.exprs.bracket_f.evaluate(&b)?;
        let vg = self.exprs.vg.evaluate(&b)?;
        let tau = self.tol.degenerate;
        Ok(sign_with_dead_zone(bracket, tau) == sign_with_dead_zone(vg, tau))
    }
}

fn slot_values(m: &SlowFastModel, p: &ContactPoint) -> Result<Vec<f64>, ClassifyError> {
    let mut s = vec![p.x, p.y];
    s.extend(m.param_values(&p.params)?);
    Ok(s)
}

/// Singular values of a 1xn or 2xn matrix, descending, via its Gram matrix.
pub fn singular_values(j: &[Vec<f64>]) -> Vec<f64> {
    let n = j.first().map_or(0, Vec::len);
    if n == 0 {
        return Vec::new();
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>();
    match j.len() {
        1 => vec![dot(&j[0], &j[0]).sqrt()],
        2 => {
            let (a, b, d) = (dot(&j[0], &j[0]), dot(&j[0], &j[1]), dot(&j[1], &j[1]));
            let mean = 0.5 * (a + d);
            let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
            let l1 = mean + r;
            // smaller eigenvalue through the determinant to avoid cancellation
            let l2 = if l1 > 0.0 { (a * d - b * b) / l1 } else { 0.0 };
            let mut sv = vec![l1.max(0.0).sqrt(), l2.max(0.0).sqrt()];
            sv.truncate(n.min(2));
            sv
        }
        k => panic!("singular_values: {k} rows are not supported"),
    }
}

/// Count of singular values above `max(1e-6 * largest, floor)`.
pub fn numeric_rank(sv: &[f64], floor: f64) -> usize {
    let largest = sv.iter().cloned().fold(0.0, f64::max);
    let threshold = (1e-6 * largest).max(floor);
    sv.iter().filter(|s| **s > threshold).count()
}

pub fn classify_point(
    m: &SlowFastModel,
    q: (f64, f64),
    params: &Bindings,
    tol: &Tolerances,
) -> Result<Classification, ClassifyError> {
    Classifier::new(m, *tol)?.classify(q, params)
}

pub fn transversality(
    m: &SlowFastModel,
    p: &ContactPoint,
    mode: Mode,
    tol: &Tolerances,
) -> Result<TransversalityReport, ClassifyError> {
    Classifier::new(m, *tol)?.transversality(p, mode)
}

pub fn classify_crosscheck(m: &SlowFastModel, p: &ContactPoint, tol: &Tolerances) -> Result<bool, ClassifyError> {
    Classifier::new(m, *tol)?.crosscheck(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::VectorField;
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

    fn ts_params() -> Bindings {
        [("alpha", 1.0), ("beta", 1.0), ("gamma", 1.0), ("delta", 1.0)].into()
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn van_der_pol_hopf() {
        let c = classify_point(&vdp(), (0.0, 0.0), &[("lambda", 0.0)].into(), &tol()).unwrap();
        assert_eq!(c.kind, Kind::SlowFastHopf(Criticality::Supercritical));
        assert_eq!(c.evidence.sigma, Some(-1.0));
        assert_eq!(c.evidence.bracket_f, Some(-1.0));
        assert_eq!(c.evidence.jump_criteria_agree, Some(true));
    }

    #[test]
    fn two_stroke_hopf() {
        let c = classify_point(&two_stroke(), (1.0, 1.0), &ts_params(), &tol()).unwrap();
        assert_eq!(c.kind, Kind::SlowFastHopf(Criticality::Subcritical));
        assert_eq!(c.evidence.sigma, Some(1.0));
    }

    #[test]
    fn jumps() {
        for lambda in [0.5, 0.3, -0.2] {
            let c = classify_point(&vdp(), (0.0, 0.0), &[("lambda", lambda)].into(), &tol()).unwrap();
            assert_eq!(c.kind, Kind::Jump);
            assert_eq!(c.evidence.g, Some(-lambda));
            assert_eq!(c.evidence.jump_criteria_agree, Some(true));
        }
    }

    #[test]
    fn normally_hyperbolic_branches() {
        let m = vdp();
        let p = [("lambda", 0.0)].into();
        let c = classify_point(&m, (1.0, 1.0 / 2.0 + 1.0 / 3.0), &p, &tol()).unwrap();
        assert_eq!(c.kind, Kind::NormallyHyperbolic(Stability::Attracting));
        let c = classify_point(&m, (-0.5, 0.125 - 1.0 / 24.0), &p, &tol()).unwrap();
        assert_eq!(c.kind, Kind::NormallyHyperbolic(Stability::Repelling));
    }

    #[test]
    fn off_curve_and_degenerate_points_are_errors() {
        let m = vdp();
        let p: Bindings = [("lambda", 0.0)].into();
        assert!(matches!(
            classify_point(&m, (0.0, 0.5), &p, &tol()),
            Err(ClassifyError::NotOnCriticalCurve { .. })
        ));
        let cubic = SlowFastModel::parse("y - x^3", ["1", "0"], ["0", "-x"], &[]).unwrap();
        assert!(matches!(
            classify_point(&cubic, (0.0, 0.0), &Bindings::new(), &tol()),
            Err(ClassifyError::Model(ModelError::DegenerateContact { .. }))
        ));
    }

    #[test]
    fn bogdanov_takens() {
        let m = SlowFastModel::parse("y - x^2/2", ["1", "0"], ["0", "x^2"], &[]).unwrap();
        let c = classify_point(&m, (0.0, 0.0), &Bindings::new(), &tol()).unwrap();
        assert_eq!(c.kind, Kind::BogdanovTakens(Sign::Negative));
        assert_eq!(c.evidence.vg, Some(0.0));
        assert_eq!(c.evidence.v2g, Some(-2.0));
    }

    #[test]
    fn saddle_and_crosscheck_under_sign_flip() {
        let mut m = vdp();
        m.q = VectorField::new(m.q.vx.clone(), (-m.q.vy.clone()).simplify());
        let p = find_contact_point(&m, (0.1, 0.1), &[("lambda", 0.0)].into(), &tol()).unwrap();
        let cl = Classifier::new(&m, tol()).unwrap();
        assert_eq!(cl.classify_contact(&p).unwrap().kind, Kind::SingularSaddle);
        assert!(cl.crosscheck(&p).unwrap());
    }

    #[test]
    fn crosscheck_examples() {
        let m = vdp();
        let p = find_contact_point(&m, (0.1, 0.1), &[("lambda", 0.0)].into(), &tol()).unwrap();
        assert!(classify_crosscheck(&m, &p, &tol()).unwrap());
        let m = two_stroke();
        let p = find_contact_point(&m, (0.9, 0.9), &ts_params(), &tol()).unwrap();
        assert!(classify_crosscheck(&m, &p, &tol()).unwrap());
    }

    #[test]
    fn transversality_examples() {
        let m = vdp();
        let p = find_contact_point(&m, (0.1, 0.1), &[("lambda", 0.0)].into(), &tol()).unwrap();
        let r = transversality(&m, &p, Mode::Hopf, &tol()).unwrap();
        assert!((r.jacobian[0][0] + 1.0).abs() < 1e-6);
        assert_eq!(r.rank, 1);

        let m = two_stroke();
        let params: Bindings = [("alpha", 1.0), ("beta", 2.0), ("gamma", 1.0), ("delta", 2.0)].into();
        let p = find_contact_point(&m, (0.9, 1.9), &params, &tol()).unwrap();
        let cl = Classifier::new(&m, tol()).unwrap();
        let r = cl.transversality_in(&p, Mode::Hopf, &["beta"]).unwrap();
        assert!((r.jacobian[0][0] - 2.0).abs() < 1e-6, "{:?}", r.jacobian);
        assert_eq!(r.rank, 1);
        assert!(matches!(cl.transversality_in(&p, Mode::Hopf, &["mu"]), Err(ClassifyError::UnknownParameter(_))));

        let m = SlowFastModel::parse("y - x^2/2", ["1", "0"], ["0", "-x"], &[]).unwrap();
        let p = find_contact_point(&m, (0.1, 0.1), &Bindings::new(), &tol()).unwrap();
        let r = transversality(&m, &p, Mode::Hopf, &tol()).unwrap();
        assert_eq!(r.rank, 0);
        assert!(r.jacobian[0].is_empty());
    }

    #[test]
    fn bt_transversality_in_normal_form() {
        let m = SlowFastModel::parse("y - x^2/2", ["1", "0"], ["0", "a + g1*x + g2*x^2"], &["a", "g1", "g2"]).unwrap();
        let p = find_contact_point(&m, (0.1, 0.1), &[("a", 0.0), ("g1", 0.0), ("g2", 0.5)].into(), &tol()).unwrap();
        let cl = Classifier::new(&m, tol()).unwrap();
        let c = cl.classify_with_transversality(&p).unwrap();
        assert_eq!(c.kind, Kind::BogdanovTakens(Sign::Negative));
        let r = c.transversality.unwrap();
        assert_eq!(r.mode, Mode::Bt);
        assert_eq!(r.rank, 2);
        // with only g2 varying, G and V(G) do not move
        assert_eq!(cl.transversality_in(&p, Mode::Bt, &["g2"]).unwrap().rank, 0);
        assert_eq!(cl.transversality_in(&p, Mode::Bt, &["a"]).unwrap().rank, 1);
    }

    #[test]
    fn rank_helpers() {
        assert_eq!(singular_values(&[vec![3.0, 4.0]]), vec![5.0]);
        let sv = singular_values(&[vec![1.0, 0.0, 0.0], vec![0.0, 2.0, 0.0]]);
        assert!((sv[0] - 2.0).abs() < 1e-15 && (sv[1] - 1.0).abs() < 1e-15);
        assert_eq!(numeric_rank(&singular_values(&[vec![1.0, 2.0], vec![2.0, 4.0]]), 1e-8), 1);
        assert_eq!(numeric_rank(&[1.0, 1e-7], 1e-8), 1);
        assert_eq!(numeric_rank(&[1e-9], 1e-8), 0);
        assert_eq!(numeric_rank(&[], 1e-8), 0);
    }

    #[test]
    fn kind_names_round_trip() {
        let all = [
            Kind::NormallyHyperbolic(Stability::Attracting),
            Kind::NormallyHyperbolic(Stability::Repelling),
            Kind::Jump,
            Kind::SlowFastHopf(Criticality::Supercritical),
            Kind::SlowFastHopf(Criticality::Subcritical),
            Kind::SlowFastHopf(Criticality::Degenerate),
            Kind::SingularSaddle,
            Kind::BogdanovTakens(Sign::Negative),
            Kind::BogdanovTakens(Sign::Positive),
            Kind::Indeterminate,
        ];
        for k in all {
            assert_eq!(Kind::from_parts(k.name(), k.subkind()), Some(k));
        }
        assert_eq!(Kind::SlowFastHopf(Criticality::Supercritical).to_string(), "SlowFastHopf(supercritical)");
    }

    #[test]
    fn dead_zones() {
        let tau = 1e-8;
        let base = Evidence {
            zf: 0.0,
            z2f: Some(-1.0),
            g: Some(0.0),
            vg: Some(-1.0),
            v2g: Some(0.0),
            sigma: Some(5e-9),
            ..Evidence::default()
        };
        assert_eq!(base.decide(tau), Kind::SlowFastHopf(Criticality::Degenerate));
        assert_eq!(Evidence { vg: Some(1e-9), ..base }.decide(tau), Kind::Indeterminate);
        assert_eq!(Evidence { vg: Some(1e-9), v2g: Some(0.5), ..base }.decide(tau), Kind::BogdanovTakens(Sign::Positive));
        assert_eq!(Evidence { g: Some(2e-8), ..base }.decide(tau), Kind::Jump);
        assert_eq!(Evidence { zf: 5e-9, ..base }.decide(tau), base.decide(tau));
    }

    #[test]
    fn classification_json_round_trip() {
        let m = vdp();
        let c = Classifier::new(&m, tol()).unwrap();
        let p = find_contact_point(&vdp(), (0.1, 0.1), &[("lambda", 0.0)].into(), &tol()).unwrap();
        let cl = c.classify_with_transversality(&p).unwrap();
        let s = serde_json::to_string(&cl).unwrap();
        assert!(s.contains("\"kind\":\"SlowFastHopf\"") && s.contains("\"subkind\":\"supercritical\""));
        let back: Classification = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cl);
    }
}
