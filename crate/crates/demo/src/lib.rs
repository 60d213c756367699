//! Browser bindings for canard-kit: analyze a model, integrate a trajectory,
//! sweep a parameter. The plain functions carry the logic; the `#[wasm_bindgen]`
//! wrappers only convert errors.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use canard_kit::config::{bundled, LoadedModel};
use canard_kit::report::analyze;
use canard_kit::sim::{integrate_partial, SimConfig};

fn load(toml: &str, overrides: &[(String, f64)]) -> Result<LoadedModel, String> {
    LoadedModel::from_toml(toml, overrides).map_err(|e| e.to_string())
}

/// Full analysis report as pretty JSON.
pub fn analyze_model(toml: &str) -> Result<String, String> {
    let l = load(toml, &[])?;
    let r = analyze(&l, None).map_err(|e| e.to_string())?;
    Ok(r.to_json())
}

/// Flat `[t0, x0, y0, t1, x1, y1, ...]`. Integration stops early on escape;
/// the points up to there are still returned.
pub fn simulate_model(toml: &str, eps: f64, t_end: f64, x0: f64, y0: f64) -> Result<Vec<f64>, String> {
    let l = load(toml, &[])?;
    let mut cfg = SimConfig::new(eps, l.params.clone(), (x0, y0));
    cfg.t_end = t_end;
    cfg.dt = 0.01;
    cfg.record_every = ((t_end / cfg.dt) as usize / 4000).max(1);
    let (traj, _) = integrate_partial(&l.model, &cfg).map_err(|e| e.to_string())?;
    Ok(traj.points.iter().flatten().copied().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    /// `Kind(subkind)`, or `error: ...` when no contact point was found.
    pub kind: String,
    pub x: Option<f64>,
    pub y: Option<f64>,
}

/// Classification at `steps + 1` evenly spaced values of `param`, each search
/// starting from the previous contact point.
pub fn sweep_model(toml: &str, param: &str, from: f64, to: f64, steps: usize) -> Result<Vec<SweepPoint>, String> {
    let base = load(toml, &[])?;
    if !base.model.parameters().iter().any(|p| p == param) {
        return Err(format!("`{param}` is not a parameter of this model"));
    }
    let mut guess = base.guess;
    let steps = steps.max(1);
    let mut out = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let value = from + (to - from) * i as f64 / steps as f64;
        let l = load(toml, &[(param.to_string(), value)])?;
        match analyze(&l, guess) {
            Ok(r) => {
                let (x, y) = (r.contact_point.x, r.contact_point.y);
                guess = Some((x, y));
                out.push(SweepPoint { value, kind: r.classification.kind.to_string(), x: Some(x), y: Some(y) });
            }
            Err(e) => out.push(SweepPoint { value, kind: format!("error: {e}"), x: None, y: None }),
        }
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn analyze_json(toml: &str) -> Result<String, JsValue> {
    analyze_model(toml).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn simulate(toml: &str, eps: f64, t_end: f64, x0: f64, y0: f64) -> Result<Vec<f64>, JsValue> {
    simulate_model(toml, eps, t_end, x0, y0).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn sweep_json(toml: &str, param: &str, from: f64, to: f64, steps: usize) -> Result<String, JsValue> {
    let pts = sweep_model(toml, param, from, to, steps).map_err(|e| JsValue::from_str(&e))?;
    Ok(serde_json::to_string(&pts).expect("sweep points serialize"))
}

/// Bundled model files as `[[name, toml], ...]`.
#[wasm_bindgen]
pub fn bundled_models() -> String {
    serde_json::to_string(&bundled::ALL).expect("strings serialize")
}
