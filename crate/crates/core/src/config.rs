//! TOML model files.
//!
//! ```toml
//! [model]
//! name = "vdp"
//! vars = ["x", "y"]
//! params = ["lambda"]
//! F = "y - x^2/2 - x^3/3"
//! Z = ["1", "0"]
//! Q = ["0", "lambda - x"]
//!
//! [point]
//! guess = [0.1, 0.1]
//! params = { lambda = 0.0 }
//!
//! [analysis]
//! tol_degenerate = 1e-8
//! breaking = "lambda"
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::expr::{parse, Bindings, Expr, ExprError, Symbols};
use crate::geom::{Metric, MetricSpec, VectorField};
use crate::model::{ModelError, SlowFastModel, Tolerances};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("malformed model file: {0}")]
    Toml(String),
    #[error("variables must be exactly [\"x\", \"y\"], got {0:?}")]
    Variables(Vec<String>),
    #[error("{field}: {source}")]
    Expr { field: String, source: ExprError },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no value for parameter `{0}` (set it under [point.params] or pass --param {0}=...)")]
    MissingParam(String),
    #[error("`{0}` is not a declared parameter")]
    UnknownParam(String),
    #[error("invalid parameter assignment `{0}`, expected name=value")]
    Assignment(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub model: ModelSection,
    #[serde(default)]
    pub point: PointSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_vars")]
    pub vars: Vec<String>,
    #[serde(default)]
    pub params: Vec<String>,
    #[serde(rename = "F")]
    pub f: String,
    #[serde(rename = "Z")]
    pub z: [String; 2],
    #[serde(rename = "Q")]
    pub q: [String; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricSpec>,
}

fn default_vars() -> Vec<String> {
    vec!["x".into(), "y".into()]
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guess: Option<[f64; 2]>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_degenerate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub newton_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    /// Unfolding parameter used by the criticality probe.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breaking: Option<String>,
}

impl ModelFile {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Toml(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model files serialize to TOML")
    }

    pub fn tolerances(&self) -> Tolerances {
        let d = Tolerances::default();
        let a = &self.analysis;
        Tolerances {
            newton_step: a.newton_step.unwrap_or(d.newton_step),
            residual: a.tol_residual.unwrap_or(d.residual),
            degenerate: a.tol_degenerate.unwrap_or(d.degenerate),
            max_iterations: a.max_iterations.unwrap_or(d.max_iterations),
        }
    }

    pub fn build_model(&self) -> Result<SlowFastModel, ConfigError> {
        let sec = &self.model;
        if sec.vars != ["x", "y"] {
            return Err(ConfigError::Variables(sec.vars.clone()));
        }
        let symbols = Symbols::planar(sec.params.iter().cloned());
        let e = |field: &str, text: &str| -> Result<Expr, ConfigError> {
            parse(text, &symbols).map_err(|source| ConfigError::Expr { field: field.to_string(), source })
        };
        let f = e("model.F", &sec.f)?;
        let z = VectorField::new(e("model.Z[0]", &sec.z[0])?, e("model.Z[1]", &sec.z[1])?);
        let q = VectorField::new(e("model.Q[0]", &sec.q[0])?, e("model.Q[1]", &sec.q[1])?);
        let mut m = SlowFastModel::new(f, z, q, sec.params.clone())?.with_name(sec.name.clone());
        if let Some(spec) = &sec.metric {
            let metric = Metric::new(e("model.metric.E", &spec.e)?, e("model.metric.F", &spec.f)?, e("model.metric.G", &spec.g)?);
            m = m.with_metric(metric)?;
        }
        Ok(m)
    }
}

/// A model file resolved into a model, parameter values and settings.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedModel {
    pub file: ModelFile,
    pub model: SlowFastModel,
    pub params: Bindings,
    pub guess: Option<(f64, f64)>,
    pub tol: Tolerances,
    /// The declared breaking parameter, else the first parameter.
    pub breaking: Option<String>,
}

/// Parses `name=value`.
pub fn parse_assignment(s: &str) -> Result<(String, f64), ConfigError> {
    let (k, v) = s.split_once('=').ok_or_else(|| ConfigError::Assignment(s.to_string()))?;
    let k = k.trim();
    let v: f64 = v.trim().parse().map_err(|_| ConfigError::Assignment(s.to_string()))?;
    if k.is_empty() || !v.is_finite() {
        return Err(ConfigError::Assignment(s.to_string()));
    }
    Ok((k.to_string(), v))
}

impl LoadedModel {
    pub fn from_toml(text: &str, overrides: &[(String, f64)]) -> Result<Self, ConfigError> {
        Self::from_file(ModelFile::from_toml(text)?, overrides)
    }

    pub fn from_file(file: ModelFile, overrides: &[(String, f64)]) -> Result<Self, ConfigError> {
        let model = file.build_model()?;
        let mut params = Bindings::new();
        for (k, v) in &file.point.params {
            if !model.symbols.is_parameter(k) {
                return Err(ConfigError::UnknownParam(k.clone()));
            }
            params.set(k.clone(), *v);
        }
        for (k, v) in overrides {
            if !model.symbols.is_parameter(k) {
                return Err(ConfigError::UnknownParam(k.clone()));
            }
            params.set(k.clone(), *v);
        }
        if let Some(missing) = model.parameters().iter().find(|p| params.get(p).is_none()) {
            return Err(ConfigError::MissingParam(missing.clone()));
        }
        let breaking = match &file.analysis.breaking {
            Some(b) if !model.symbols.is_parameter(b) => return Err(ConfigError::UnknownParam(b.clone())),
            Some(b) => Some(b.clone()),
            None => model.parameters().first().cloned(),
        };
        Ok(LoadedModel {
            guess: file.point.guess.map(|[x, y]| (x, y)),
            tol: file.tolerances(),
            model,
            params,
            breaking,
            file,
        })
    }
}

/// The model files shipped with the crate.
pub mod bundled {
    pub const VAN_DER_POL: &str = include_str!("../models/vdp.toml");
    pub const TWO_STROKE: &str = include_str!("../models/twostroke.toml");
    pub const KRUPA_SZMOLYAN: &str = include_str!("../models/krupa_szmolyan.toml");

    /// `(file name, contents)` of every bundled model.
    pub const ALL: [(&str, &str); 3] =
        [("vdp.toml", VAN_DER_POL), ("twostroke.toml", TWO_STROKE), ("krupa_szmolyan.toml", KRUPA_SZMOLYAN)];
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_models_load() {
        for (name, text) in bundled::ALL {
            let m = LoadedModel::from_toml(text, &[]).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(m.guess.is_some(), "{name}");
            assert!(!m.model.name.is_empty());
        }
        let vdp = LoadedModel::from_toml(bundled::VAN_DER_POL, &[]).unwrap();
        assert_eq!(vdp.breaking.as_deref(), Some("lambda"));
        let ts = LoadedModel::from_toml(bundled::TWO_STROKE, &[]).unwrap();
        assert_eq!(ts.breaking.as_deref(), Some("beta"));
    }

    #[test]
    fn overrides_and_missing_values() {
        let m = LoadedModel::from_toml(bundled::VAN_DER_POL, &[("lambda".into(), 0.3)]).unwrap();
        assert_eq!(m.params.get("lambda"), Some(0.3));
        assert_eq!(
            LoadedModel::from_toml(bundled::VAN_DER_POL, &[("mu".into(), 1.0)]),
            Err(ConfigError::UnknownParam("mu".into()))
        );
        let text = "[model]\nparams = [\"a\"]\nF = \"y - a*x^2\"\nZ = [\"1\", \"0\"]\nQ = [\"0\", \"-x\"]\n";
        assert_eq!(LoadedModel::from_toml(text, &[]), Err(ConfigError::MissingParam("a".into())));
        assert!(LoadedModel::from_toml(text, &[("a".into(), 0.5)]).unwrap().guess.is_none());
    }

    #[test]
    fn errors_name_the_field() {
        let text = "[model]\nF = \"y - x^^2\"\nZ = [\"1\", \"0\"]\nQ = [\"0\", \"-x\"]\n";
        let e = LoadedModel::from_toml(text, &[]).unwrap_err();
        assert!(e.to_string().starts_with("model.F: syntax error"), "{e}");
        let text = "[model]\nvars = [\"u\", \"v\"]\nF = \"y\"\nZ = [\"1\", \"0\"]\nQ = [\"0\", \"-x\"]\n";
        assert!(matches!(LoadedModel::from_toml(text, &[]), Err(ConfigError::Variables(_))));
        let text = "[model]\nF = \"y\"\nZ = [\"1\", \"0\"]\n";
        assert!(matches!(LoadedModel::from_toml(text, &[]), Err(ConfigError::Toml(_))));
        let text = "[model]\nF = \"y\"\nZ = [\"1\", \"0\"]\nQ = [\"0\", \"mu\"]\n";
        assert!(matches!(LoadedModel::from_toml(text, &[]), Err(ConfigError::Expr { .. })));
    }

    #[test]
    fn metric_and_tolerances() {
        let text = r#"
[model]
F = "y - x^2/2"
Z = ["1", "0"]
Q = ["0", "-x"]
metric = { E = "1 + x^2", F = "0", G = "1" }

[analysis]
tol_degenerate = 1e-6
"#;
        let m = LoadedModel::from_toml(text, &[]).unwrap();
        assert_eq!(m.tol.degenerate, 1e-6);
        assert_eq!(m.tol.residual, Tolerances::default().residual);
        assert!(!m.model.metric.is_identity());
        assert_eq!(ModelFile::from_toml(&m.file.to_toml()).unwrap(), m.file);
    }

    #[test]
    fn assignments() {
        assert_eq!(parse_assignment("lambda=0.3").unwrap(), ("lambda".to_string(), 0.3));
        assert_eq!(parse_assignment(" a = -1e-2 ").unwrap(), ("a".to_string(), -0.01));
        assert!(parse_assignment("lambda").is_err());
        assert!(parse_assignment("=1").is_err());
        assert!(parse_assignment("a=x").is_err());
    }
}
