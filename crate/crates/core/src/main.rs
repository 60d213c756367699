use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use canard_kit::classify::Classifier;
use canard_kit::config::{parse_assignment, LoadedModel};
use canard_kit::model::find_contact_point;
use canard_kit::report::{analyze, exit_code, suite_text, AnalyzeError};
use canard_kit::sim::{criticality_probe, integrate_partial, ProbeConfig, SimConfig};
use canard_kit::verify::{run_suite, VerifyConfig};

/// Classify contact points of planar slow-fast systems given as (F, Z, Q).
#[derive(Parser)]
#[command(name = "canard-kit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Locate the contact point and report invariants and classification.
    Analyze(AnalyzeArgs),
    /// Run the seeded invariance checks at the contact point.
    Verify(VerifyArgs),
    /// Integrate X = F*Z + eps*Q and write the trajectory as CSV.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct Common {
    /// Model file (TOML).
    model: PathBuf,
    /// Parameter value, overriding the file.
    #[arg(long = "param", value_name = "NAME=VALUE", value_parser = assignment)]
    params: Vec<(String, f64)>,
    /// Starting point for the contact point search.
    #[arg(long, value_name = "X,Y", value_parser = pair)]
    guess: Option<(f64, f64)>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Dead zone for every sign decision.
    #[arg(long, value_name = "TAU")]
    tol_degenerate: Option<f64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,
    /// Also run the invariance checks.
    #[arg(long)]
    verify: bool,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Random perturbations per check.
    #[arg(long, default_value_t = 3)]
    perturbations: usize,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 100.0)]
    t_end: f64,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    /// Initial point (defaults to the guess point).
    #[arg(long, value_name = "X,Y", value_parser = pair)]
    start: Option<(f64, f64)>,
    /// Keep every n-th step.
    #[arg(long, default_value_t = 1)]
    every: usize,
    /// Also run the criticality probe near the contact point.
    #[arg(long)]
    probe: bool,
    /// Write the CSV here instead of standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn assignment(s: &str) -> Result<(String, f64), String> {
    parse_assignment(s).map_err(|e| e.to_string())
}

fn pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected X,Y")?;
    let a: f64 = a.trim().parse().map_err(|_| format!("invalid number `{a}`"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("invalid number `{b}`"))?;
    Ok((a, b))
}

enum Failure {
    Io(PathBuf, io::Error),
    Analyze(AnalyzeError),
    ChecksFailed,
}

impl From<AnalyzeError> for Failure {
    fn from(e: AnalyzeError) -> Self {
        Failure::Analyze(e)
    }
}

fn load(c: &Common) -> Result<LoadedModel, Failure> {
    let text = fs::read_to_string(&c.model).map_err(|e| Failure::Io(c.model.clone(), e))?;
    let mut l = LoadedModel::from_toml(&text, &c.params).map_err(AnalyzeError::from)?;
    if let Some(t) = c.tol_degenerate {
        l.tol.degenerate = t;
    }
    Ok(l)
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Io(p.to_path_buf(), e)),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(|e| Failure::Io("<stdout>".into(), e))
        }
    }
}

fn cmd_analyze(a: &AnalyzeArgs) -> Result<(), Failure> {
    let l = load(&a.common)?;
    let mut report = analyze(&l, a.common.guess)?;
    if a.verify {
        let cfg = VerifyConfig { seed: a.seed, tol: l.tol, ..VerifyConfig::default() };
        report.verification = Some(run_suite(&l.model, &report.contact_point, 3, &cfg).map_err(AnalyzeError::from)?);
    }
    let text = match a.common.format {
        Format::Json => report.to_json() + "\n",
        Format::Text => report.to_text(),
    };
    emit(None, &text)
}

fn cmd_verify(a: &VerifyArgs) -> Result<(), Failure> {
    let l = load(&a.common)?;
    let guess = a.common.guess.or(l.guess).ok_or(AnalyzeError::NoGuess)?;
    let p = find_contact_point(&l.model, guess, &l.params, &l.tol).map_err(AnalyzeError::from)?;
    let cfg = VerifyConfig { seed: a.seed, tol: l.tol, ..VerifyConfig::default() };
    let suite = run_suite(&l.model, &p, a.perturbations, &cfg).map_err(AnalyzeError::from)?;
    let text = match a.common.format {
        Format::Json => serde_json::to_string_pretty(&suite).expect("reports serialize to JSON") + "\n",
        Format::Text => suite_text(&suite),
    };
    emit(None, &text)?;
    if suite.passed() {
        Ok(())
    } else {
        Err(Failure::ChecksFailed)
    }
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let l = load(&a.common)?;
    let start = a.start.or(a.common.guess).or(l.guess).ok_or(AnalyzeError::NoGuess)?;
    let cfg = SimConfig {
        eps: a.eps,
        t_end: a.t_end,
        dt: a.dt,
        params: l.params.clone(),
        start,
        escape_radius: 10.0,
        record_every: a.every.max(1),
    };
    let (trajectory, failure) = integrate_partial(&l.model, &cfg).map_err(AnalyzeError::from)?;
    emit(a.output.as_deref(), &trajectory.to_csv())?;
    if let Some(e) = failure {
        if let Some([t, x, y]) = trajectory.last() {
            eprintln!("last valid state: t = {t:?}, x = {x:?}, y = {y:?}");
        }
        return Err(AnalyzeError::from(e).into());
    }
    if a.probe {
        let guess = a.common.guess.or(l.guess).ok_or(AnalyzeError::NoGuess)?;
        let p = find_contact_point(&l.model, guess, &l.params, &l.tol).map_err(AnalyzeError::from)?;
        let sigma = Classifier::new(&l.model, l.tol)
            .and_then(|c| c.classify_contact(&p))
            .map_err(AnalyzeError::from)?
            .evidence
            .sigma;
        let breaking = l.breaking.clone().ok_or_else(|| {
            AnalyzeError::Sim(canard_kit::sim::SimError::Config("the probe needs a breaking parameter".into()))
        })?;
        let r = criticality_probe(&l.model, &p, &ProbeConfig::new(a.eps, breaking)).map_err(AnalyzeError::from)?;
        let verdict = match r.verdict {
            Some(1) => "supercritical (+1)",
            Some(_) => "subcritical (-1)",
            None => "inconclusive",
        };
        let sigma = sigma.map_or("-".to_string(), |s| format!("{s:?}"));
        eprintln!("probe: {verdict}; Hopf value {} = {:?}; sigma = {sigma}", r.breaking, r.hopf_value);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match &cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Io(path, e)) => {
            eprintln!("error: {}: {e}", path.display());
            ExitCode::from(1)
        }
        Err(Failure::Analyze(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
        Err(Failure::ChecksFailed) => {
            eprintln!("error: verification failed");
            ExitCode::from(3)
        }
    }
}
