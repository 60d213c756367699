use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_canard-kit");

fn model(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("models").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn analyze_text() {
    let vdp = model("vdp.toml");
    let o = run(&["analyze", vdp.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("SlowFastHopf(supercritical)"), "{out}");
    assert!(out.contains("A       = -2.0"), "{out}");
}

#[test]
fn analyze_json() {
    let vdp = model("vdp.toml");
    let o = run(&["analyze", vdp.to_str().unwrap(), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["classification"]["kind"], "SlowFastHopf");
    assert_eq!(v["classification"]["subkind"], "supercritical");
    assert_eq!(v["invariants"]["A"], -2.0);
    assert_eq!(v["crosscheck"], true);
    assert_eq!(v["transversality"]["rank"], 1);
}

#[test]
fn analyze_with_parameter_override_finds_a_jump() {
    let vdp = model("vdp.toml");
    let o = run(&["analyze", vdp.to_str().unwrap(), "--param", "lambda=0.3", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["classification"]["kind"], "Jump");
}

#[test]
fn bundled_models_analyze() {
    for (name, kind) in [("twostroke.toml", "SlowFastHopf(subcritical)"), ("krupa_szmolyan.toml", "SlowFastHopf(subcritical)")]
    {
        let o = run(&["analyze", model(name).to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", stderr(&o));
        assert!(stdout(&o).contains(kind), "{name}: {}", stdout(&o));
    }
}

#[test]
fn degenerate_contact_exits_2() {
    let dir = TempDir::new().unwrap();
    let p = write(
        &dir,
        "cubic.toml",
        "[model]\nF = \"y - x^3\"\nZ = [\"1\", \"0\"]\nQ = [\"0\", \"-x\"]\n[point]\nguess = [0.1, 0.05]\n",
    );
    let o = run(&["analyze", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("error: "));
}

#[test]
fn bad_input_exits_1() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.toml");
    assert_eq!(run(&["analyze", missing.to_str().unwrap()]).status.code(), Some(1));

    let p = write(&dir, "bad.toml", "[model]\nF = \"y - x^^2\"\nZ = [\"1\", \"0\"]\nQ = [\"0\", \"-x\"]\n");
    let o = run(&["analyze", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("model.F"), "{}", stderr(&o));

    let vdp = model("vdp.toml");
    let o = run(&["analyze", vdp.to_str().unwrap(), "--param", "mu=1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_requires_eps() {
    let vdp = model("vdp.toml");
    let o = run(&["simulate", vdp.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--eps"), "{}", stderr(&o));
}

#[test]
fn simulate_writes_csv() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("traj.csv");
    let vdp = model("vdp.toml");
    let o = run(&[
        "simulate",
        vdp.to_str().unwrap(),
        "--eps",
        "0.05",
        "--t-end",
        "1",
        "--dt",
        "0.1",
        "--start",
        "1,0.5",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,x,y"));
    assert_eq!(lines.next(), Some("0,1,0.5"));
    assert_eq!(csv.lines().count(), 12);
}

#[test]
fn simulate_probe_reports_criticality() {
    let vdp = model("vdp.toml");
    let o = run(&["simulate", vdp.to_str().unwrap(), "--eps", "0.05", "--t-end", "1", "--probe"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("probe: supercritical (+1)"), "{err}");
    assert!(err.contains("sigma = -1.0"), "{err}");
}

#[test]
fn verify_passes() {
    let vdp = model("vdp.toml");
    let o = run(&["verify", vdp.to_str().unwrap(), "--perturbations", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("all checks passed"));
}
