use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const DEFAULT: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/default.toml");

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_colombeau"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn with_config(dir: &TempDir, text: &str) -> String {
    let path = dir.path().join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr_json(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(text.lines().last().expect("stderr line")).expect("json on stderr")
}

const PAIR: &str = r#"
[[net]]
label = "u"
exprs = ["eps*x"]

[[net]]
label = "v"
exprs = ["eps^2*x^2"]

[[net]]
label = "g"
exprs = ["eps^-3 * sin(x)"]

[[classify]]
net = "g"

[[equiv]]
u = "u"
v = "v"
"#;

#[test]
fn classify_reports_cubic_growth() {
    let dir = TempDir::new().unwrap();
    let cfg = with_config(&dir, PAIR);
    let out = dir.path().join("out");
    let o = run(&["classify", "--config", &cfg], &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("g on K: Moderate(3)"));
    let records = fs::read_to_string(out.join("records.csv")).unwrap();
    assert!(records.lines().nth(1).unwrap().contains(",Moderate(3),true,"));
    assert!(out.join("fits/g_d0.csv").exists());
}

#[test]
fn linear_and_quadratic_nets_are_associated_but_not_equivalent() {
    let dir = TempDir::new().unwrap();
    let cfg = with_config(&dir, PAIR);
    let o = run(&["equiv", "--config", &cfg], &dir.path().join("out"));
    assert!(o.status.success());
    assert!(stdout(&o).contains("not equivalent; 0-associated: true"));
}

#[test]
fn failed_expectation_exits_nonzero_with_reason() {
    let dir = TempDir::new().unwrap();
    let cfg = with_config(&dir, &format!("{PAIR}\n[[pointvals]]\nu = \"u\"\nv = \"v\"\nexpect = true\n"));
    let o = run(&["pointvals", "--config", &cfg], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(1));
    let err = stderr_json(&o);
    assert_eq!(err["error"], "check-failure");
    assert_eq!(err["failed"].as_array().unwrap().len(), 1);
}

#[test]
fn unknown_net_is_reported() {
    let dir = TempDir::new().unwrap();
    let cfg = with_config(&dir, "[[classify]]\nnet = \"missing\"\n");
    let o = run(&["classify", "--config", &cfg], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stderr_json(&o)["error"], "unknown-net");
}

#[test]
fn malformed_config_is_reported() {
    let dir = TempDir::new().unwrap();
    for text in ["[grid\n", "[tolerances]\nfit_tolerance = -1.0\n", "[[net]]\nlabel = \"a\"\n"] {
        let cfg = with_config(&dir, text);
        let o = run(&["classify", "--config", &cfg], &dir.path().join("out"));
        assert_eq!(o.status.code(), Some(2), "{text}");
        assert_eq!(stderr_json(&o)["error"], "config-parse-error");
    }
    let o = run(&["classify", "--grid-points", "2"], &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn reruns_are_bit_identical() {
    let dir = TempDir::new().unwrap();
    for cmd in ["classify", "equiv", "pointvals", "associate"] {
        let a = dir.path().join(format!("{cmd}-a"));
        let b = dir.path().join(format!("{cmd}-b"));
        assert!(run(&[cmd, "--config", DEFAULT], &a).status.success(), "{cmd}");
        assert!(run(&[cmd, "--config", DEFAULT, "--jobs", "3"], &b).status.success(), "{cmd}");
        let (ta, tb) = (tree(&a), tree(&b));
        assert!(!ta.is_empty());
        assert_eq!(ta, tb, "{cmd}");
    }
}

#[test]
fn seed_changes_the_sampled_points() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run(&["pointvals", "--seed", "1"], &a).status.success());
    assert!(run(&["pointvals", "--seed", "2"], &b).status.success());
    let ra = fs::read_to_string(a.join("records.csv")).unwrap();
    let rb = fs::read_to_string(b.join("records.csv")).unwrap();
    assert!(ra.contains("seed=1e0") && rb.contains("seed=2e0"));
}

#[test]
fn each_command_passes_on_the_shipped_config() {
    let dir = TempDir::new().unwrap();
    for cmd in ["vb-equiv", "hybrid-equiv", "ppwave"] {
        let out = dir.path().join(cmd);
        let o = run(&[cmd], &out);
        assert!(o.status.success(), "{cmd}: {}", stdout(&o));
    }
    assert!(dir.path().join("ppwave/trajectories.csv").exists());
    let report = fs::read_to_string(dir.path().join("ppwave/kink_report.txt")).unwrap();
    assert!(report.contains("zero_associated = true"));
}

#[test]
fn suite_passes_on_the_shipped_config() {
    let dir = TempDir::new().unwrap();
    let o = run(&["suite", "--config", DEFAULT], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    let passes = stdout(&o).lines().filter(|l| l.starts_with("PASS")).count();
    assert_eq!(passes, 10);
}
