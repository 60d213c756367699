//! Numerical certification of the invariance properties of `A`, `G`, `V(G)`
//! and `V^2(G)`, and the normal-form coefficient oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classify::{ClassifyError, Classifier, Criticality, Kind};
use crate::expr::{Bindings, CompiledExpr, Expr, ExprError};
use crate::geom::{GeomError, Metric, VectorField};
use crate::invariants::{compute_g_with_metric, InvariantError, InvariantExprs, InvariantValues};
use crate::model::{find_contact_point, ContactPoint, ModelError, SlowFastModel, Tolerances};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Invariant(#[from] InvariantError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("factor c vanishes at ({x}, {y})")]
    VanishingFactor { x: f64, y: f64 },
    #[error("found only {found} of {wanted} points on the critical curve near the contact point")]
    Sampling { found: usize, wanted: usize },
}

impl From<ExprError> for VerifyError {
    fn from(e: ExprError) -> Self {
        VerifyError::Model(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Points of S per comparison.
    pub samples: usize,
    pub tolerance: f64,
    /// Half-width of the box around the contact point that seeds are drawn from.
    pub radius: f64,
    pub tol: Tolerances,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { seed: 42, samples: 8, tolerance: 1e-8, radius: 0.3, tol: Tolerances::default() }
    }
}

/// Result of one check. `passed` is `max_deviation <= tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub name: String,
    pub samples: Vec<[f64; 2]>,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl VerificationReport {
    fn new(name: impl Into<String>, tolerance: f64) -> Self {
        VerificationReport {
            name: name.into(),
            samples: Vec::new(),
            max_deviation: 0.0,
            tolerance,
            passed: true,
            notes: Vec::new(),
        }
    }

    fn record(&mut self, a: f64, b: f64) {
        let d = relative_deviation(a, b);
        // NaN counts as a failure
        if !(d <= self.max_deviation) {
            self.max_deviation = d;
        }
    }

    /// A discrete mismatch counts as deviation 1.
    fn mismatch(&mut self, note: String) {
        self.record(0.0, 1.0);
        self.notes.push(note);
    }

    fn finish(mut self) -> Self {
        self.passed = self.max_deviation <= self.tolerance;
        self
    }
}

/// `|a - b| / max(|a|, |b|, 1)`.
pub fn relative_deviation(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Points of `S = {F = 0}` near `p`: random seeds in a box around `p`, each
/// refined by 1-D Newton in the coordinate along which `F` varies fastest.
pub fn sample_critical_curve(
    m: &SlowFastModel,
    p: &ContactPoint,
    n: usize,
    radius: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(f64, f64)>, VerifyError> {
    let slots = m.slots();
    let f = m.f.compile(&slots)?;
    let fx = m.f.differentiate("x").compile(&slots)?;
    let fy = m.f.differentiate("y").compile(&slots)?;
    let mut s = vec![p.x, p.y];
    s.extend(m.param_values(&p.params)?);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n * 50 {
        if out.len() == n {
            break;
        }
        s[0] = p.x + rng.gen_range(-radius..=radius);
        s[1] = p.y + rng.gen_range(-radius..=radius);
        let along_y = fy.eval(&s)?.abs() > fx.eval(&s)?.abs();
        let k = if along_y { 1 } else { 0 };
        let deriv = if along_y { &fy } else { &fx };
        if newton_1d(&f, deriv, &mut s, k).is_none() {
            continue;
        }
        let r = f.eval(&s)?;
        let near = (s[0] - p.x).hypot(s[1] - p.y) <= 2.0 * radius;
        if r.abs() <= 1e-10 && near {
            out.push((s[0], s[1]));
        }
    }
    if out.len() < n {
        return Err(VerifyError::Sampling { found: out.len(), wanted: n });
    }
    Ok(out)
}

fn newton_1d(f: &CompiledExpr, df: &CompiledExpr, s: &mut [f64], k: usize) -> Option<()> {
    for _ in 0..50 {
        let v = f.eval(s).ok()?;
        if v.abs() <= 1e-14 {
            return Some(());
        }
        let d = df.eval(s).ok()?;
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let step = v / d;
        s[k] -= step;
        if !s[k].is_finite() {
            return None;
        }
        if step.abs() <= 1e-15 * (1.0 + s[k].abs()) {
            return Some(());
        }
    }
    Some(())
}

fn at(p: &ContactPoint, q: (f64, f64)) -> Bindings {
    p.params.at(q.0, q.1)
}

fn compare_values(r: &mut VerificationReport, a: &InvariantValues, b: &InvariantValues) {
    r.record(a.a, b.a);
    r.record(a.vg, b.vg);
    r.record(a.v2g, b.v2g);
}

/// `(F, Z, Q)` against `(cF, Z/c, Q)`: `A`, `V(G)`, `V^2(G)` at `p` and `G` on S.
pub fn verify_factorization_invariance(
    m: &SlowFastModel,
    p: &ContactPoint,
    c: &Expr,
    cfg: &VerifyConfig,
) -> Result<VerificationReport, VerifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pts = sample_critical_curve(m, p, cfg.samples, cfg.radius, &mut rng)?;
    for &(x, y) in pts.iter().chain([(p.x, p.y)].iter()) {
        let v = c.evaluate(&at(p, (x, y)))?;
        if !(v.abs() > cfg.tol.degenerate) {
            return Err(VerifyError::VanishingFactor { x, y });
        }
    }
    let m = &m.specialize(&p.params);
    let mut scaled = m.clone();
    scaled.f = (c.clone() * m.f.clone()).simplify();
    scaled.z = VectorField::new((m.z.vx.clone() / c.clone()).simplify(), (m.z.vy.clone() / c.clone()).simplify());

    let mut r = VerificationReport::new(format!("factorization c = {c}"), cfg.tolerance);
    let e0 = InvariantExprs::build(m)?;
    let e1 = InvariantExprs::build(&scaled)?;
    let b = p.bindings();
    compare_values(&mut r, &e0.evaluate(&b, &cfg.tol)?, &e1.evaluate(&b, &cfg.tol)?);
    for &q in &pts {
        let b = at(p, q);
        r.record(e0.g.evaluate(&b)?, e1.g.evaluate(&b)?);
    }
    r.samples = pts.iter().map(|&(x, y)| [x, y]).collect();
    Ok(r.finish())
}

/// `Q` against `Q + cZ`: `G` on S and the classification at `p`.
pub fn verify_q_shift_invariance(
    m: &SlowFastModel,
    p: &ContactPoint,
    c: &Expr,
    cfg: &VerifyConfig,
) -> Result<VerificationReport, VerifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pts = sample_critical_curve(m, p, cfg.samples, cfg.radius, &mut rng)?;
    let mut shifted = m.clone();
    shifted.q = m.q.add(&m.z.scale(c));

    let mut r = VerificationReport::new(format!("Q-shift c = {c}"), cfg.tolerance);
    let c0 = Classifier::new(m, cfg.tol)?;
    let c1 = Classifier::new(&shifted, cfg.tol)?;
    for &q in &pts {
        let b = at(p, q);
        r.record(c0.exprs().g.evaluate(&b)?, c1.exprs().g.evaluate(&b)?);
    }
    let k0 = c0.classify_contact(p)?;
    let k1 = c1.classify_contact(p)?;
    let (e0, e1) = (k0.evidence, k1.evidence);
    for (a, b) in [(e0.g, e1.g), (e0.vg, e1.vg), (e0.v2g, e1.v2g), (e0.sigma, e1.sigma)] {
        if let (Some(a), Some(b)) = (a, b) {
            r.record(a, b);
        }
    }
    if k0.kind != k1.kind {
        r.mismatch(format!("classification changed: {} vs {}", k0.kind, k1.kind));
    }
    r.samples = pts.iter().map(|&(x, y)| [x, y]).collect();
    Ok(r.finish())
}

/// `G` on S computed with `metric` against the identity metric.
pub fn verify_metric_independence(
    m: &SlowFastModel,
    p: &ContactPoint,
    metric: &Metric,
    cfg: &VerifyConfig,
) -> Result<VerificationReport, VerifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pts = sample_critical_curve(m, p, cfg.samples, cfg.radius, &mut rng)?;
    for &q in &pts {
        metric.check_admissible(&at(p, q))?;
    }
    let g0 = compute_g_with_metric(m, &Metric::identity())?;
    let g1 = compute_g_with_metric(m, metric)?;
    let name = format!("metric E = {}, F = {}, G = {}", metric.e, metric.fm, metric.g);
    let mut r = VerificationReport::new(name, cfg.tolerance);
    for &q in &pts {
        let b = at(p, q);
        r.record(g0.evaluate(&b)?, g1.evaluate(&b)?);
    }
    r.samples = pts.iter().map(|&(x, y)| [x, y]).collect();
    Ok(r.finish())
}

/// `V(G)(p)` and `V^2(G)(p)` with `V` against `V + F*U`.
pub fn verify_v_extension_invariance(
    m: &SlowFastModel,
    p: &ContactPoint,
    u: &VectorField,
    cfg: &VerifyConfig,
) -> Result<VerificationReport, VerifyError> {
    let m = &m.specialize(&p.params);
    let e0 = InvariantExprs::build(m)?;
    let v1 = e0.v.add(&u.scale(&m.f));
    let e1 = InvariantExprs::build_with_v(m, v1)?;
    let b = p.bindings();
    let (a, c) = (e0.evaluate(&b, &cfg.tol)?, e1.evaluate(&b, &cfg.tol)?);
    let mut r = VerificationReport::new(format!("V-extension U = ({}, {})", u.vx, u.vy), cfg.tolerance);
    r.record(a.vg, c.vg);
    r.record(a.v2g, c.v2g);
    r.samples = vec![[p.x, p.y]];
    Ok(r.finish())
}

/// `F = y - x^2/2`, `Z = d/dx`, `Q = (g1 x + g2 x^2) d/dy`, whose coefficients
/// are known in closed form.
pub fn normal_form_model(g1: f64, g2: f64) -> SlowFastModel {
    let x = Expr::var("x");
    let f = Expr::var("y") - Expr::rational(1, 2) * Expr::pow(x.clone(), 2);
    let qy = Expr::float(g1) * x.clone() + Expr::float(g2) * Expr::pow(x, 2);
    SlowFastModel::new(
        f.simplify(),
        VectorField::new(Expr::one(), Expr::zero()),
        VectorField::new(Expr::zero(), qy.simplify()),
        Vec::new(),
    )
    .expect("normal form model is well formed")
    .with_name("normal-form")
}

/// Expected decision for the normal form at the origin.
pub fn normal_form_kind(g1: f64, g2: f64, tau: f64) -> Kind {
    use crate::classify::Sign;
    if g1 < -tau {
        Kind::SlowFastHopf(if g2 > tau {
            Criticality::Supercritical
        } else if g2 < -tau {
            Criticality::Subcritical
        } else {
            Criticality::Degenerate
        })
    } else if g1 > tau {
        Kind::SingularSaddle
    } else if -2.0 * g2 < -tau {
        Kind::BogdanovTakens(Sign::Negative)
    } else if -2.0 * g2 > tau {
        Kind::BogdanovTakens(Sign::Positive)
    } else {
        Kind::Indeterminate
    }
}

/// `G(0) = 0`, `V(G)(0) = g1`, `V^2(G)(0) = -2 g2`, `sigma = -g2` and the matching kind.
pub fn verify_normalform_oracle(g1: f64, g2: f64, cfg: &VerifyConfig) -> Result<VerificationReport, VerifyError> {
    let m = normal_form_model(g1, g2);
    let p = find_contact_point(&m, (0.05, 0.05), &Bindings::new(), &cfg.tol)?;
    let cl = Classifier::new(&m, cfg.tol)?;
    let c = cl.classify_contact(&p)?;
    let ev = c.evidence;
    let mut r = VerificationReport::new(format!("normal form g1 = {g1}, g2 = {g2}"), cfg.tolerance);
    r.record(p.x, 0.0);
    r.record(p.y, 0.0);
    for (got, want) in [(ev.g, 0.0), (ev.vg, g1), (ev.v2g, -2.0 * g2), (ev.sigma, -g2), (ev.a, 0.0)] {
        r.record(got.unwrap_or(f64::NAN), want);
    }
    let expected = normal_form_kind(g1, g2, cfg.tol.degenerate);
    if c.kind != expected {
        r.mismatch(format!("classified {} but expected {}", c.kind, expected));
    }
    r.samples = vec![[p.x, p.y]];
    Ok(r.finish())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub model: String,
    pub seed: u64,
    pub reports: Vec<VerificationReport>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }

    pub fn max_deviation(&self) -> f64 {
        self.reports.iter().map(|r| r.max_deviation).fold(0.0, f64::max)
    }
}

fn small_rational(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> Expr {
    Expr::rational(rng.gen_range(lo..=hi), 8)
}

/// Positive `k0 + k1 x^2 + k2 y^2 + k3 (x - y)^2`.
fn random_factor(rng: &mut ChaCha8Rng) -> Expr {
    let (x, y) = (Expr::var("x"), Expr::var("y"));
    let k0 = small_rational(rng, 4, 16);
    let k1 = small_rational(rng, 0, 8);
    let k2 = small_rational(rng, 0, 8);
    let k3 = small_rational(rng, 0, 8);
    (k0 + k1 * Expr::pow(x.clone(), 2) + k2 * Expr::pow(y.clone(), 2) + k3 * Expr::pow(x - y, 2)).simplify()
}

/// `a + b x + c y + d x y`.
fn random_shift(rng: &mut ChaCha8Rng) -> Expr {
    let (x, y) = (Expr::var("x"), Expr::var("y"));
    let k: Vec<Expr> = (0..4).map(|_| small_rational(rng, -16, 16)).collect();
    (k[0].clone() + k[1].clone() * x.clone() + k[2].clone() * y.clone() + k[3].clone() * x * y).simplify()
}

/// Constant symmetric positive definite metric.
fn random_metric(rng: &mut ChaCha8Rng) -> Metric {
    let e = rng.gen_range(4..=24);
    let g = rng.gen_range(4..=24);
    let f = rng.gen_range(-3..=3);
    Metric::new(Expr::rational(e, 8), Expr::rational(f, 8), Expr::rational(g, 8))
}

/// `(a + b x + c y, d + e x + f y)`.
fn random_extension(rng: &mut ChaCha8Rng) -> VectorField {
    let (x, y) = (Expr::var("x"), Expr::var("y"));
    let mut lin = || {
        let k: Vec<Expr> = (0..3).map(|_| small_rational(rng, -16, 16)).collect();
        (k[0].clone() + k[1].clone() * x.clone() + k[2].clone() * y.clone()).simplify()
    };
    let vx = lin();
    VectorField::new(vx, lin())
}

/// The non-constant metric `E = 1 + x^2`, `F = x y / 4`, `G = 1 + y^2`.
pub fn varying_metric() -> Metric {
    let (x, y) = (Expr::var("x"), Expr::var("y"));
    Metric::new(
        (Expr::one() + Expr::pow(x.clone(), 2)).simplify(),
        (Expr::rational(1, 4) * x * y.clone()).simplify(),
        (Expr::one() + Expr::pow(y, 2)).simplify(),
    )
}

/// Every check on `m` at `p` with `perturbations` seeded random instances each,
/// plus the normal-form oracle at random coefficients.
pub fn run_suite(
    m: &SlowFastModel,
    p: &ContactPoint,
    perturbations: usize,
    cfg: &VerifyConfig,
) -> Result<SuiteReport, VerifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut reports = Vec::new();
    for i in 0..perturbations {
        let sub = VerifyConfig { seed: cfg.seed.wrapping_add(i as u64), ..*cfg };
        reports.push(verify_factorization_invariance(m, p, &random_factor(&mut rng), &sub)?);
        reports.push(verify_q_shift_invariance(m, p, &random_shift(&mut rng), &sub)?);
        let metric = if i == 0 { varying_metric() } else { random_metric(&mut rng) };
        reports.push(verify_metric_independence(m, p, &metric, &sub)?);
        reports.push(verify_v_extension_invariance(m, p, &random_extension(&mut rng), &sub)?);
        let g1 = rng.gen_range(-2.0..-0.1);
        let g2 = rng.gen_range(-2.0..2.0);
        reports.push(verify_normalform_oracle(g1, g2, &sub)?);
    }
    Ok(SuiteReport { model: m.name.clone(), seed: cfg.seed, reports })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::Sign;
    use crate::expr::{parse, Symbols};

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

    fn vdp_point(m: &SlowFastModel) -> ContactPoint {
        find_contact_point(m, (0.1, 0.1), &[("lambda", 0.0)].into(), &Tolerances::default()).unwrap()
    }

    fn ts_point(m: &SlowFastModel) -> ContactPoint {
        let b: Bindings = [("alpha", 1.0), ("beta", 1.0), ("gamma", 1.0), ("delta", 1.0)].into();
        find_contact_point(m, (0.9, 0.9), &b, &Tolerances::default()).unwrap()
    }

    fn e(s: &str) -> Expr {
        parse(s, &Symbols::planar(Vec::<String>::new())).unwrap().simplify()
    }

    #[test]
    fn deviation_definition() {
        assert_eq!(relative_deviation(2.0, 2.0), 0.0);
        assert_eq!(relative_deviation(0.5, 0.25), 0.25);
        assert_eq!(relative_deviation(-4.0, 4.0), 2.0);
        assert!(relative_deviation(f64::NAN, 1.0).is_nan());
    }

    #[test]
    fn sampled_points_lie_on_s() {
        let m = vdp();
        let p = vdp_point(&m);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let pts = sample_critical_curve(&m, &p, 8, 0.3, &mut rng).unwrap();
        assert_eq!(pts.len(), 8);
        for (x, y) in pts {
            assert!(m.f.evaluate(&at(&p, (x, y))).unwrap().abs() <= 1e-10);
        }
    }

    #[test]
    fn factorization_examples() {
        let cfg = VerifyConfig::default();
        let m = vdp();
        let p = vdp_point(&m);
        let r = verify_factorization_invariance(&m, &p, &Expr::one(), &cfg).unwrap();
        assert_eq!(r.max_deviation, 0.0);
        let r = verify_factorization_invariance(&m, &p, &e("2 + x^2"), &cfg).unwrap();
        assert!(r.passed, "{r:?}");
        let m = two_stroke();
        let r = verify_factorization_invariance(&m, &ts_point(&m), &e("1 + (x - 1)^2/4"), &cfg).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn vanishing_factor_is_rejected() {
        let m = vdp();
        let r = verify_factorization_invariance(&m, &vdp_point(&m), &e("x"), &VerifyConfig::default());
        assert!(matches!(r, Err(VerifyError::VanishingFactor { .. })));
    }

    #[test]
    fn q_shift_examples() {
        let cfg = VerifyConfig::default();
        let m = vdp();
        let p = vdp_point(&m);
        for c in ["0", "x - y", "3"] {
            let r = verify_q_shift_invariance(&m, &p, &e(c), &cfg).unwrap();
            assert!(r.passed, "{r:?}");
        }
        assert_eq!(verify_q_shift_invariance(&m, &p, &Expr::zero(), &cfg).unwrap().max_deviation, 0.0);
    }

    #[test]
    fn metric_examples() {
        let cfg = VerifyConfig::default();
        let m = vdp();
        let p = vdp_point(&m);
        let r = verify_metric_independence(&m, &p, &Metric::identity(), &cfg).unwrap();
        assert_eq!(r.max_deviation, 0.0);
        let constant = Metric::new(Expr::int(2), Expr::int(1), Expr::int(3));
        assert!(verify_metric_independence(&m, &p, &constant, &cfg).unwrap().passed);
        let m = two_stroke();
        let r = verify_metric_independence(&m, &ts_point(&m), &varying_metric(), &cfg).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn inadmissible_metric_is_rejected() {
        let m = vdp();
        let bad = Metric::new(e("x"), Expr::zero(), Expr::one());
        let r = verify_metric_independence(&m, &vdp_point(&m), &bad, &VerifyConfig::default());
        assert!(matches!(r, Err(VerifyError::Geom(GeomError::Inadmissible { .. }))));
    }

    #[test]
    fn v_extension_examples() {
        let cfg = VerifyConfig::default();
        let m = vdp();
        let p = vdp_point(&m);
        for (a, b) in [("0", "0"), ("1", "x"), ("y", "-x")] {
            let r = verify_v_extension_invariance(&m, &p, &VectorField::new(e(a), e(b)), &cfg).unwrap();
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn normal_form_examples() {
        let cfg = VerifyConfig::default();
        for (g1, g2) in [(-1.0, 1.0), (-1.0, -1.0), (0.0, 1.0), (0.7, 0.3)] {
            let r = verify_normalform_oracle(g1, g2, &cfg).unwrap();
            assert!(r.passed, "{r:?}");
        }
        assert_eq!(normal_form_kind(-1.0, 1.0, 1e-8), Kind::SlowFastHopf(Criticality::Supercritical));
        assert_eq!(normal_form_kind(-1.0, -1.0, 1e-8), Kind::SlowFastHopf(Criticality::Subcritical));
        assert_eq!(normal_form_kind(0.0, 1.0, 1e-8), Kind::BogdanovTakens(Sign::Negative));
    }

    #[test]
    fn suite_is_seeded() {
        let m = vdp();
        let p = vdp_point(&m);
        let a = run_suite(&m, &p, 3, &VerifyConfig::default()).unwrap();
        let b = run_suite(&m, &p, 3, &VerifyConfig::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.reports.len(), 15);
        assert!(a.passed(), "{a:#?}");
    }
}
