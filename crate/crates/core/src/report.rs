//! The analysis pipeline behind `canard-kit analyze` and its JSON/text reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::classify::{ClassifyError, Classification, Classifier, TransversalityReport};
use crate::config::{ConfigError, LoadedModel};
use crate::geom::MetricSpec;
use crate::invariants::InvariantError;
use crate::model::{check_assumptions, find_contact_point, AssumptionReport, ContactPoint, ModelError, Tolerances};
use crate::sim::SimError;
use crate::verify::{SuiteReport, VerifyError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyzeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Invariant(#[from] InvariantError),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("no guess point: set [point] guess = [x, y] or pass --guess x,y")]
    NoGuess,
}

/// Process exit status for an error: 2 when the input is well formed but the
/// point or the computation is degenerate, 1 otherwise.
pub fn exit_code(e: &AnalyzeError) -> i32 {
    fn model(e: &ModelError) -> i32 {
        match e {
            ModelError::NoConvergence { .. }
            | ModelError::DegenerateContact { .. }
            | ModelError::AssumptionViolation { .. } => 2,
            ModelError::Geom(crate::geom::GeomError::Inadmissible { .. }) => 2,
            _ => 1,
        }
    }
    fn invariant(e: &InvariantError) -> i32 {
        match e {
            InvariantError::Model(m) => model(m),
            InvariantError::DegenerateContact(_)
            | InvariantError::NoNormalisingField
            | InvariantError::TangentFastField => 2,
            InvariantError::Geom(crate::geom::GeomError::DegenerateMetric) => 2,
            _ => 1,
        }
    }
    fn classify(e: &ClassifyError) -> i32 {
        match e {
            ClassifyError::Model(m) => model(m),
            ClassifyError::Invariant(i) => invariant(i),
            ClassifyError::NotOnCriticalCurve { .. } | ClassifyError::Continuation { .. } => 2,
            ClassifyError::UnknownParameter(_) => 1,
        }
    }
    match e {
        AnalyzeError::Config(ConfigError::Model(m)) => model(m),
        AnalyzeError::Config(_) | AnalyzeError::NoGuess => 1,
        AnalyzeError::Model(m) => model(m),
        AnalyzeError::Invariant(i) => invariant(i),
        AnalyzeError::Classify(c) => classify(c),
        AnalyzeError::Verify(v) => match v {
            VerifyError::Model(m) => model(m),
            VerifyError::Invariant(i) => invariant(i),
            VerifyError::Classify(c) => classify(c),
            _ => 2,
        },
        AnalyzeError::Sim(s) => match s {
            SimError::Model(m) => model(m),
            SimError::Config(_) => 1,
            _ => 2,
        },
    }
}

/// Echo of the analysed model and the settings used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEcho {
    pub name: String,
    pub params: Vec<String>,
    #[serde(rename = "F")]
    pub f: String,
    #[serde(rename = "Z")]
    pub z: [String; 2],
    #[serde(rename = "Q")]
    pub q: [String; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricSpec>,
    pub guess: [f64; 2],
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantsReport {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "G_at_p")]
    pub g_at_p: f64,
    #[serde(rename = "VG_at_p")]
    pub vg_at_p: f64,
    #[serde(rename = "V2G_at_p")]
    pub v2g_at_p: f64,
    pub sigma: f64,
    /// `G` as an expression when it prints compactly.
    #[serde(rename = "G_symbolic")]
    pub g_symbolic: Option<String>,
    #[serde(rename = "V")]
    pub v: [String; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub model: ModelEcho,
    pub assumptions: AssumptionReport,
    pub contact_point: ContactPoint,
    pub invariants: InvariantsReport,
    pub classification: Classification,
    pub transversality: Option<TransversalityReport>,
    /// `classify_crosscheck` at the point; absent away from singular contacts.
    pub crosscheck: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verification: Option<SuiteReport>,
}

const COMPACT: usize = 160;

/// Shortest round-trip form, as in the JSON output.
fn n(v: f64) -> String {
    format!("{v:?}")
}

fn compact(s: String) -> Option<String> {
    (s.len() <= COMPACT).then_some(s)
}

/// Contact point, invariants, classification and transversality at the
/// contact point found from `guess` (or the file's guess).
pub fn analyze(loaded: &LoadedModel, guess: Option<(f64, f64)>) -> Result<AnalysisReport, AnalyzeError> {
    let guess = guess.or(loaded.guess).ok_or(AnalyzeError::NoGuess)?;
    let m = &loaded.model;
    let tol = loaded.tol;
    let p = find_contact_point(m, guess, &loaded.params, &tol)?;
    analyze_point(loaded, &p, guess)
}

pub fn analyze_point(loaded: &LoadedModel, p: &ContactPoint, guess: (f64, f64)) -> Result<AnalysisReport, AnalyzeError> {
    let m = &loaded.model;
    let tol = loaded.tol;
    let assumptions = check_assumptions(m, (p.x, p.y), &p.params, &tol)?;
    let classifier = Classifier::new(m, tol)?;
    let inv = classifier.exprs().invariant_set(p, &tol)?;
    let mut classification = classifier.classify_with_transversality(p)?;
    let transversality = classification.transversality.take();
    let crosscheck = if classification.kind.is_singular_contact() { Some(classifier.crosscheck(p)?) } else { None };
    let sec = &loaded.file.model;
    Ok(AnalysisReport {
        model: ModelEcho {
            name: m.name.clone(),
            params: m.parameters().to_vec(),
            f: sec.f.clone(),
            z: sec.z.clone(),
            q: sec.q.clone(),
            metric: sec.metric.clone(),
            guess: [guess.0, guess.1],
            tolerances: tol,
        },
        assumptions,
        contact_point: p.clone(),
        invariants: InvariantsReport {
            a: inv.a,
            g_at_p: inv.g_at_p,
            vg_at_p: inv.vg_at_p,
            v2g_at_p: inv.v2g_at_p,
            sigma: inv.sigma,
            g_symbolic: compact(inv.g_expr.to_string()),
            v: [inv.v.vx.to_string(), inv.v.vy.to_string()],
        },
        classification,
        transversality,
        crosscheck,
        verification: None,
    })
}

impl AnalysisReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize to JSON")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// Human-readable view. Numbers print in the same shortest round-trip
    /// form as in the JSON output.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let name = if self.model.name.is_empty() { "(unnamed)" } else { &self.model.name };
        let _ = writeln!(s, "model       {name}");
        let _ = writeln!(s, "  F = {}", self.model.f);
        let _ = writeln!(s, "  Z = ({}, {})", self.model.z[0], self.model.z[1]);
        let _ = writeln!(s, "  Q = ({}, {})", self.model.q[0], self.model.q[1]);
        if let Some(m) = &self.model.metric {
            let _ = writeln!(s, "  metric E = {}, F = {}, G = {}", m.e, m.f, m.g);
        }
        let p = &self.contact_point;
        let params: Vec<String> = p.params.iter().map(|(k, v)| format!("{k} = {}", n(*v))).collect();
        let _ = writeln!(s, "parameters  {}", if params.is_empty() { "-".to_string() } else { params.join(", ") });
        let _ = writeln!(s, "point       ({}, {})", n(p.x), n(p.y));
        let d = &p.diagnostics;
        let _ = writeln!(s, "  F = {}, ZF = {}, Z2F = {}, Z3F = {}", n(d.f), n(d.zf), n(d.z2f), n(d.z3f));
        let a = &self.assumptions;
        let flag = |b: bool| if b { "ok" } else { "FAILED" };
        let _ = writeln!(
            s,
            "assumptions A1 {} (|grad F| = {}), A2 {} (|Z| = {}), A3 {} (Z2F = {})",
            flag(a.a1_ok),
            n(a.grad_f_norm),
            flag(a.a2_ok),
            n(a.z_norm),
            flag(a.a3_ok),
            n(a.z2f)
        );
        let i = &self.invariants;
        let _ = writeln!(s, "invariants");
        let _ = writeln!(s, "  A       = {}", n(i.a));
        if let Some(g) = &i.g_symbolic {
            let _ = writeln!(s, "  G       = {g}");
        }
        let _ = writeln!(s, "  V       = ({}, {})", i.v[0], i.v[1]);
        let _ = writeln!(s, "  G(p)    = {}", n(i.g_at_p));
        let _ = writeln!(s, "  VG(p)   = {}", n(i.vg_at_p));
        let _ = writeln!(s, "  V2G(p)  = {}", n(i.v2g_at_p));
        let _ = writeln!(s, "  sigma   = {}", n(i.sigma));
        let c = &self.classification;
        let _ = writeln!(s, "classification {}", c.kind);
        let e = &c.evidence;
        let opt = |v: Option<f64>| v.map_or("-".to_string(), n);
        let _ = writeln!(s, "  ZF = {}, Q(F) = {}, [Z,Q](F) = {}", n(e.zf), opt(e.qf), opt(e.bracket_f));
        if let Some(agree) = e.jump_criteria_agree {
            let _ = writeln!(s, "  jump criteria G(p) and Q(F)(p) {}", if agree { "agree" } else { "DISAGREE" });
        }
        if let Some(x) = self.crosscheck {
            let _ = writeln!(s, "  [Z,Q](F) and VG verdicts {}", if x { "agree" } else { "DISAGREE" });
        }
        if let Some(t) = &self.transversality {
            let rows: Vec<String> = t
                .jacobian
                .iter()
                .map(|r| format!("[{}]", r.iter().map(|v| n(*v)).collect::<Vec<_>>().join(", ")))
                .collect();
            let _ = writeln!(
                s,
                "transversality ({:?}) in ({}): rank {} of {} required",
                t.mode,
                t.params.join(", "),
                t.rank,
                t.required_rank()
            );
            let _ = writeln!(s, "  jacobian {}", rows.join(" "));
        }
        if let Some(v) = &self.verification {
            let _ = write!(s, "{}", suite_text(v));
        }
        s
    }
}

pub fn suite_text(v: &SuiteReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "verification (seed {})", v.seed);
    for r in &v.reports {
        let _ = writeln!(
            s,
            "  {} {:<60} max deviation {:e} over {} points",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.max_deviation,
            r.samples.len()
        );
        for n in &r.notes {
            let _ = writeln!(s, "       {n}");
        }
    }
    let _ = writeln!(s, "  {}", if v.passed() { "all checks passed" } else { "SOME CHECKS FAILED" });
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{Criticality, Kind};
    use crate::config::bundled;

    #[test]
    fn van_der_pol_report() {
        let l = LoadedModel::from_toml(bundled::VAN_DER_POL, &[]).unwrap();
        let r = analyze(&l, None).unwrap();
        assert_eq!(r.classification.kind, Kind::SlowFastHopf(Criticality::Supercritical));
        assert_eq!(r.invariants.a, -2.0);
        assert_eq!(r.invariants.sigma, -1.0);
        assert_eq!(r.crosscheck, Some(true));
        assert_eq!(r.transversality.as_ref().unwrap().rank, 1);
        let back = AnalysisReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
        let text = r.to_text();
        assert!(text.contains("classification SlowFastHopf(supercritical)"), "{text}");
        assert!(text.contains("sigma   = -1.0\n"));
    }

    #[test]
    fn json_has_stable_keys() {
        let l = LoadedModel::from_toml(bundled::TWO_STROKE, &[]).unwrap();
        let r = analyze(&l, None).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for k in ["model", "contact_point", "invariants", "classification", "transversality"] {
            assert!(v.get(k).is_some(), "{k}");
        }
        for k in ["x", "y", "params", "diagnostics"] {
            assert!(v["contact_point"].get(k).is_some(), "{k}");
        }
        for k in ["A", "G_at_p", "VG_at_p", "V2G_at_p", "sigma", "G_symbolic"] {
            assert!(v["invariants"].get(k).is_some(), "{k}");
        }
        for k in ["kind", "subkind", "evidence"] {
            assert!(v["classification"].get(k).is_some(), "{k}");
        }
        for k in ["jacobian", "rank"] {
            assert!(v["transversality"].get(k).is_some(), "{k}");
        }
        assert_eq!(v["classification"]["subkind"], "subcritical");
    }

    #[test]
    fn jump_and_exit_codes() {
        let l = LoadedModel::from_toml(bundled::VAN_DER_POL, &[("lambda".into(), 0.3)]).unwrap();
        let r = analyze(&l, None).unwrap();
        assert_eq!(r.classification.kind, Kind::Jump);
        assert!(r.transversality.is_none() && r.crosscheck.is_none());

        let cubic = "[model]\nF = \"y - x^3\"\nZ = [\"1\", \"0\"]\nQ = [\"0\", \"-x\"]\n[point]\nguess = [0.1, 0.05]\n";
        let e = analyze(&LoadedModel::from_toml(cubic, &[]).unwrap(), None).unwrap_err();
        assert_eq!(exit_code(&e), 2, "{e}");
        let e = analyze(&LoadedModel::from_toml(cubic, &[]).unwrap(), Some((f64::NAN, 0.0))).unwrap_err();
        assert_eq!(exit_code(&e), 1, "{e}");
        let none = "[model]\nF = \"y\"\nZ = [\"1\", \"0\"]\nQ = [\"0\", \"-x\"]\n";
        let e = analyze(&LoadedModel::from_toml(none, &[]).unwrap(), None).unwrap_err();
        assert_eq!(e, AnalyzeError::NoGuess);
        assert_eq!(exit_code(&e), 1);
    }
}
