//! Fixed-step RK4 integration of `X = F*Z + eps*Q` and a Poincaré-return
//! probe of the stability of small cycles near a slow-fast Hopf point.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::expr::{Bindings, CompiledExpr, Expr, ExprError};
use crate::model::{ContactPoint, ModelError, SlowFastModel};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid simulation settings: {0}")]
    Config(String),
    #[error("trajectory left the disc of radius {radius} at t = {t} ({x}, {y})")]
    Escaped { t: f64, x: f64, y: f64, radius: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("no equilibrium of the full field near ({x}, {y})")]
    NoEquilibrium { x: f64, y: f64 },
    #[error("could not locate the Hopf value of `{param}`: {reason}")]
    NoHopfValue { param: String, reason: String },
}

impl From<ExprError> for SimError {
    fn from(e: ExprError) -> Self {
        SimError::Model(e.into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub eps: f64,
    pub t_end: f64,
    pub dt: f64,
    pub params: Bindings,
    pub start: (f64, f64),
    pub escape_radius: f64,
    /// Keep every n-th step in the output (the final state is always kept).
    pub record_every: usize,
}

impl SimConfig {
    pub fn new(eps: f64, params: Bindings, start: (f64, f64)) -> Self {
        SimConfig { eps, t_end: 100.0, dt: 0.01, params, start, escape_radius: 10.0, record_every: 1 }
    }

    /// `eps` in `[0, 0.2]`, positive finite `dt` and `t_end`, finite start.
    pub fn validate(&self) -> Result<(), SimError> {
        if !(0.0..=0.2).contains(&self.eps) {
            return Err(SimError::Config(format!("eps = {} is outside [0, 0.2]", self.eps)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::Config(format!("dt = {} must be positive", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(SimError::Config(format!("t_end = {} must be positive", self.t_end)));
        }
        if !(self.escape_radius > 0.0) {
            return Err(SimError::Config("escape radius must be positive".into()));
        }
        if !(self.start.0.is_finite() && self.start.1.is_finite()) {
            return Err(SimError::Config("start point must be finite".into()));
        }
        Ok(())
    }
}

/// Samples `(t, x, y)` with strictly increasing `t`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<[f64; 3]>,
}

impl Trajectory {
    pub fn last(&self) -> Option<[f64; 3]> {
        self.points.last().copied()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,x,y")?;
        for [t, x, y] in &self.points {
            writeln!(w, "{},{},{}", format_g(*t, 12), format_g(*x, 12), format_g(*y, 12))?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV output is ASCII")
    }
}

/// C-style `%.{prec}g`.
pub fn format_g(v: f64, prec: usize) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let prec = prec.max(1);
    let sci = format!("{:.*e}", prec - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= prec as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (prec as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// The full field `F*Z + eps*Q` compiled for one parameter set.
pub struct FullField {
    fast: [CompiledExpr; 2],
    slow: [CompiledExpr; 2],
    /// `d/dx`, `d/dy` of the fast and slow components.
    fast_jac: [CompiledExpr; 4],
    slow_jac: [CompiledExpr; 4],
    slots: Vec<f64>,
    pub eps: f64,
}

impl FullField {
    pub fn new(m: &SlowFastModel, params: &Bindings, eps: f64) -> Result<Self, SimError> {
        let names = m.slots();
        let c = |e: &Expr| e.compile(&names);
        let fz = [(m.f.clone() * m.z.vx.clone()).simplify(), (m.f.clone() * m.z.vy.clone()).simplify()];
        let q = [m.q.vx.clone(), m.q.vy.clone()];
        let jac = |v: &[Expr; 2]| -> Result<[CompiledExpr; 4], ExprError> {
            Ok([
                c(&v[0].differentiate("x"))?,
                c(&v[0].differentiate("y"))?,
                c(&v[1].differentiate("x"))?,
                c(&v[1].differentiate("y"))?,
            ])
        };
        let mut slots = vec![0.0, 0.0];
        slots.extend(m.param_values(params)?);
        Ok(FullField {
            fast: [c(&fz[0])?, c(&fz[1])?],
            slow: [c(&q[0])?, c(&q[1])?],
            fast_jac: jac(&fz)?,
            slow_jac: jac(&q)?,
            slots,
            eps,
        })
    }

    pub fn set_param_values(&mut self, values: &[f64]) {
        self.slots.truncate(2);
        self.slots.extend_from_slice(values);
    }

    fn at(&self, x: f64, y: f64) -> Vec<f64> {
        let mut s = self.slots.clone();
        s[0] = x;
        s[1] = y;
        s
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<(f64, f64), SimError> {
        let s = self.at(x, y);
        let ex = self.fast[0].eval(&s)?;
        let ey = self.fast[1].eval(&s)?;
        if self.eps == 0.0 {
            return Ok((ex, ey));
        }
        Ok((ex + self.eps * self.slow[0].eval(&s)?, ey + self.eps * self.slow[1].eval(&s)?))
    }

    /// `[[dXx/dx, dXx/dy], [dXy/dx, dXy/dy]]`.
    pub fn jacobian(&self, x: f64, y: f64) -> Result<[[f64; 2]; 2], SimError> {
        let s = self.at(x, y);
        let mut j = [0.0; 4];
        for (i, v) in j.iter_mut().enumerate() {
            *v = self.fast_jac[i].eval(&s)? + self.eps * self.slow_jac[i].eval(&s)?;
        }
        Ok([[j[0], j[1]], [j[2], j[3]]])
    }

    fn rk4_step(&self, x: f64, y: f64, h: f64) -> Result<(f64, f64), SimError> {
        let (k1x, k1y) = self.eval(x, y)?;
        let (k2x, k2y) = self.eval(x + 0.5 * h * k1x, y + 0.5 * h * k1y)?;
        let (k3x, k3y) = self.eval(x + 0.5 * h * k2x, y + 0.5 * h * k2y)?;
        let (k4x, k4y) = self.eval(x + h * k3x, y + h * k3y)?;
        Ok((x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x), y + h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)))
    }

    /// Newton on `X = 0` from `guess`.
    pub fn equilibrium(&self, guess: (f64, f64)) -> Result<(f64, f64), SimError> {
        let (mut x, mut y) = guess;
        for _ in 0..60 {
            let (fx, fy) = self.eval(x, y)?;
            if fx.abs().max(fy.abs()) <= 1e-15 {
                break;
            }
            let [[a, b], [c, d]] = self.jacobian(x, y)?;
            let det = a * d - b * c;
            if det == 0.0 || !det.is_finite() {
                return Err(SimError::NoEquilibrium { x: guess.0, y: guess.1 });
            }
            let dx = (d * fx - b * fy) / det;
            let dy = (a * fy - c * fx) / det;
            x -= dx;
            y -= dy;
            if dx.hypot(dy) <= 1e-15 * (1.0 + x.hypot(y)) {
                break;
            }
        }
        let (fx, fy) = self.eval(x, y)?;
        if !(fx.abs().max(fy.abs()) <= 1e-12) || (x - guess.0).hypot(y - guess.1) > 1.0 {
            return Err(SimError::NoEquilibrium { x: guess.0, y: guess.1 });
        }
        Ok((x, y))
    }
}

/// RK4 with fixed step `cfg.dt` up to `cfg.t_end`.
pub fn integrate(m: &SlowFastModel, cfg: &SimConfig) -> Result<Trajectory, SimError> {
    match integrate_partial(m, cfg)? {
        (tr, None) => Ok(tr),
        (_, Some(e)) => Err(e),
    }
}

/// Like [`integrate`], but an escape or overflow still returns the samples up
/// to the last valid state alongside the error.
pub fn integrate_partial(m: &SlowFastModel, cfg: &SimConfig) -> Result<(Trajectory, Option<SimError>), SimError> {
    cfg.validate()?;
    let field = FullField::new(m, &cfg.params, cfg.eps)?;
    Ok(integrate_field(&field, cfg.start, cfg.dt, cfg.t_end, cfg.escape_radius, cfg.record_every.max(1)))
}

fn integrate_field(
    field: &FullField,
    start: (f64, f64),
    dt: f64,
    t_end: f64,
    radius: f64,
    every: usize,
) -> (Trajectory, Option<SimError>) {
    let steps = (t_end / dt).round().max(1.0) as usize;
    let h = t_end / steps as f64;
    let (mut x, mut y) = start;
    let mut out = Trajectory { points: vec![[0.0, x, y]] };
    let mut recorded = 0;
    for k in 1..=steps {
        let t = k as f64 * h;
        let (nx, ny) = match field.rk4_step(x, y, h) {
            Ok(s) => s,
            Err(e) => return (out, Some(e)),
        };
        let failure = if !(nx.is_finite() && ny.is_finite()) {
            Some(SimError::NonFinite { t })
        } else if nx.hypot(ny) > radius {
            Some(SimError::Escaped { t, x: nx, y: ny, radius })
        } else {
            None
        };
        if let Some(e) = failure {
            if recorded != k - 1 {
                out.points.push([(k - 1) as f64 * h, x, y]);
            }
            return (out, Some(e));
        }
        (x, y) = (nx, ny);
        if k % every == 0 || k == steps {
            out.points.push([t, x, y]);
            recorded = k;
        }
    }
    (out, None)
}

/// `|e(dt) - e(dt/2)| / |e(dt/2) - e(dt/4)|` for the endpoint `e` of a run;
/// close to 16 for a fourth-order method.
pub fn convergence_ratio(m: &SlowFastModel, cfg: &SimConfig) -> Result<f64, SimError> {
    let end = |dt: f64| -> Result<[f64; 3], SimError> {
        let c = SimConfig { dt, record_every: usize::MAX, ..cfg.clone() };
        Ok(integrate(m, &c)?.last().expect("trajectory has a final state"))
    };
    let (a, b, c) = (end(cfg.dt)?, end(cfg.dt / 2.0)?, end(cfg.dt / 4.0)?);
    let d1 = (a[1] - b[1]).hypot(a[2] - b[2]);
    let d2 = (b[1] - c[1]).hypot(b[2] - c[2]);
    Ok(d1 / d2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub eps: f64,
    pub breaking: String,
    pub dt: f64,
    pub t_end: f64,
    pub escape_radius: f64,
    pub min_returns: usize,
    /// Successive return differences must shrink by at least this factor...
    pub contraction: f64,
    /// ...or already be below this floor.
    pub floor: f64,
}

impl ProbeConfig {
    pub fn new(eps: f64, breaking: impl Into<String>) -> Self {
        ProbeConfig {
            eps,
            breaking: breaking.into(),
            dt: 0.05,
            t_end: 3000.0,
            escape_radius: 10.0,
            min_returns: 5,
            contraction: 0.9,
            floor: 1e-9,
        }
    }
}

/// One integration of the probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRun {
    pub param_value: f64,
    pub backward: bool,
    pub equilibrium: (f64, f64),
    /// Signed distances from the equilibrium of successive returns to the section.
    pub returns: Vec<f64>,
    pub escaped: bool,
    pub small_cycle: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub breaking: String,
    pub hopf_value: f64,
    pub trace_slope: f64,
    pub forward: ProbeRun,
    pub backward: ProbeRun,
    /// `+1` supercritical, `-1` subcritical, `None` inconclusive.
    pub verdict: Option<i8>,
}

/// Locates the Hopf value of the breaking parameter, then looks for a stable
/// small cycle on the unstable-focus side (forward time) and for an unstable
/// one on the stable-focus side (backward time).
pub fn criticality_probe(m: &SlowFastModel, p: &ContactPoint, cfg: &ProbeConfig) -> Result<ProbeReport, SimError> {
    let names = m.parameters();
    let idx = names
        .iter()
        .position(|n| *n == cfg.breaking)
        .ok_or_else(|| SimError::Config(format!("unknown breaking parameter `{}`", cfg.breaking)))?;
    if !(cfg.eps > 0.0 && cfg.eps <= 0.2) {
        return Err(SimError::Config(format!("eps = {} is outside (0, 0.2]", cfg.eps)));
    }
    let mut field = FullField::new(m, &p.params, cfg.eps)?;
    let base = m.param_values(&p.params)?;
    let with = |b: f64| {
        let mut v = base.clone();
        v[idx] = b;
        v
    };
    let mut guess = (p.x, p.y);
    let trace = |field: &mut FullField, b: f64, guess: &mut (f64, f64)| -> Result<f64, SimError> {
        field.set_param_values(&with(b));
        let e = field.equilibrium(*guess)?;
        *guess = e;
        let [[a, _], [_, d]] = field.jacobian(e.0, e.1)?;
        Ok(a + d)
    };

    // secant on the trace
    let b0 = base[idx];
    let h = 1e-3 * b0.abs().max(1.0);
    let (mut b_prev, mut t_prev) = (b0, trace(&mut field, b0, &mut guess)?);
    let (mut b, mut t) = (b0 + h, trace(&mut field, b0 + h, &mut guess)?);
    for _ in 0..50 {
        if t.abs() <= 1e-13 {
            break;
        }
        if t == t_prev {
            return Err(SimError::NoHopfValue { param: cfg.breaking.clone(), reason: "trace does not vary".into() });
        }
        let next = b - t * (b - b_prev) / (t - t_prev);
        (b_prev, t_prev) = (b, t);
        b = next;
        t = trace(&mut field, b, &mut guess)?;
        if (b - b_prev).abs() <= 1e-14 * (1.0 + b.abs()) {
            break;
        }
    }
    if !(t.abs() <= 1e-9) {
        return Err(SimError::NoHopfValue { param: cfg.breaking.clone(), reason: format!("trace {t:e} at {b}") });
    }
    let b_h = b;
    let dh = 1e-6 * b_h.abs().max(1.0);
    let slope = (trace(&mut field, b_h + dh, &mut guess)? - trace(&mut field, b_h - dh, &mut guess)?) / (2.0 * dh);
    if slope.abs() < 1e-12 {
        return Err(SimError::NoHopfValue { param: cfg.breaking.clone(), reason: "trace is stationary".into() });
    }
    let offset = 0.1 * cfg.eps / slope.abs() * slope.signum();

    let mut run = |b: f64, backward: bool| -> Result<ProbeRun, SimError> {
        trace(&mut field, b, &mut guess)?;
        let e = guess;
        let r = poincare_returns(&field, e, backward, cfg)?;
        let small_cycle = !r.escaped && is_stable_cycle(&r.returns, cfg);
        Ok(ProbeRun { param_value: b, backward, equilibrium: e, returns: r.returns, escaped: r.escaped, small_cycle })
    };
    let forward = run(b_h + offset, false)?;
    let backward = run(b_h - offset, true)?;
    let verdict = match (forward.small_cycle, backward.small_cycle) {
        (true, false) => Some(1),
        (false, true) => Some(-1),
        _ => None,
    };
    Ok(ProbeReport { breaking: cfg.breaking.clone(), hopf_value: b_h, trace_slope: slope, forward, backward, verdict })
}

struct Returns {
    returns: Vec<f64>,
    escaped: bool,
}

/// Returns to the half-line `{e + s (1, 0), s > 0}` from `e + (0.01, 0)`.
fn poincare_returns(field: &FullField, e: (f64, f64), backward: bool, cfg: &ProbeConfig) -> Result<Returns, SimError> {
    let h = if backward { -cfg.dt } else { cfg.dt };
    let steps = (cfg.t_end / cfg.dt).round() as usize;
    let (mut x, mut y) = (e.0 + 0.01, e.1);
    let mut returns = Vec::new();
    for _ in 0..steps {
        let (nx, ny) = field.rk4_step(x, y, h)?;
        if !(nx.is_finite() && ny.is_finite()) || nx.hypot(ny) > cfg.escape_radius {
            return Ok(Returns { returns, escaped: true });
        }
        let (s0, s1) = (y - e.1, ny - e.1);
        if s0 != 0.0 && s0.signum() != s1.signum() {
            // bisect on the sub-step length
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                let (_, my) = field.rk4_step(x, y, mid * h)?;
                if (my - e.1).signum() == s0.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let (cx, _) = field.rk4_step(x, y, hi * h)?;
            if cx > e.0 {
                returns.push(cx - e.0);
            }
        }
        (x, y) = (nx, ny);
    }
    Ok(Returns { returns, escaped: false })
}

/// Enough returns, the last ones contracting towards a fixed amplitude of
/// order at most `2 sqrt(eps)`.
fn is_stable_cycle(returns: &[f64], cfg: &ProbeConfig) -> bool {
    let n = cfg.min_returns.max(3);
    if returns.len() < n {
        return false;
    }
    let tail = &returns[returns.len() - n..];
    let diffs: Vec<f64> = tail.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let contracting = diffs.windows(2).all(|d| d[1] <= cfg.contraction * d[0] || d[1] <= cfg.floor);
    let amplitude = tail[n - 1];
    contracting && amplitude > 1e-6 && amplitude <= 2.0 * cfg.eps.sqrt()
}
