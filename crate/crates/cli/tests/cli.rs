use std::path::{Path, PathBuf};
use std::process::Command as Proc;

use mixsvm_cli::commands::Command;
use mixsvm_cli::output::{self, SWEEP_HEADER};
use mixsvm_cli::{parse_str, plot, run};
use mixsvm_core::harness::ExperimentResult;
use mixsvm_core::Execution;

const SMALL: &str = r#"
[process]
kind = "markov_chain"
trans = [[0.9, 0.1], [0.1, 0.9]]
init = [1.0, 0.0]
feature_map = [[-1.0], [1.0]]
label = { kind = "classification", eta = { per_state = [0.8, 0.2] } }

[loss]
kind = "hinge"

[schedule]
c = 1.0
gamma = "1/4"

[experiment]
n_grid = [20, 40]
seeds = [1, 2, 3]
test_m = 1000
future_window = 50
"#;

const AR1: &str = r#"
[process]
kind = "ar1"
rho = 0.5
noise_sd = 1.0
label = { kind = "regression", mean = { sine = { amplitude = 1.0, frequency = 1.0 } }, noise = { gaussian = { sd = 0.5 } }, moment_order = 4.0 }

[loss]
kind = "least_squares"

[schedule]
c = 0.1
gamma = "1/4"

[train]
n = 200
"#;

fn scratch(name: &str) -> PathBuf {
    let d = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&d);
    d
}

#[test]
fn sweep_csv_round_trips() {
    let res = parse_str(SMALL, &[]).unwrap();
    let out = scratch("round_trip");
    let o = run(Command::Sweep, &res, &out, Execution::Sequential).unwrap();
    assert!(o.success(), "{:?}", o.violations);
    let (header, rows) = output::read_csv(&out.join("sweep.csv")).unwrap();
    assert_eq!(header, SWEEP_HEADER);
    assert_eq!(rows.len(), 6);
    let parsed = output::parse_sweep_rows(&rows).unwrap();
    // writing the parsed rows again reproduces the text exactly
    assert_eq!(output::sweep_rows(&parsed), rows);
    let meta = std::fs::read_to_string(out.join("sweep.meta.toml")).unwrap();
    assert!(meta.starts_with("# resolved by mixsvm"));
}

#[test]
fn plot_is_valid_svg() {
    let res = parse_str(SMALL, &[]).unwrap();
    let out = scratch("svg");
    run(Command::Sweep, &res, &out, Execution::Sequential).unwrap();
    let text = std::fs::read_to_string(out.join("sweep.svg")).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    assert_eq!(doc.root_element().tag_name().name(), "svg");
    let seeds = doc.descendants().filter(|n| n.attribute("class") == Some("seed")).count();
    assert_eq!(seeds, 6);
    assert!(doc.descendants().any(|n| n.attribute("class") == Some("median")));
}

#[test]
fn empty_results_are_errors() {
    let empty = ExperimentResult {
        rows: Vec::new(),
        violations: Vec::new(),
    };
    assert!(plot::sweep_svg(&empty, "x").is_err());
    let out = scratch("empty");
    std::fs::create_dir_all(&out).unwrap();
    assert!(output::write_csv(&out.join("e.csv"), SWEEP_HEADER, &[]).is_err());
}

#[test]
fn mixing_schedule_and_lln_tables() {
    let res = parse_str(SMALL, &["mixing.lags=[1,2,3]".into(), "lln.test_functions=[\"state:0\"]".into()]).unwrap();
    let out = scratch("tables");
    run(Command::Mixing, &res, &out, Execution::Sequential).unwrap();
    let (header, rows) = output::read_csv(&out.join("mixing.csv")).unwrap();
    assert_eq!(header, output::MIXING_HEADER);
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][0], "1");

    let o = run(Command::Schedule, &res, &out, Execution::Sequential).unwrap();
    assert_eq!(o.summary["verdict"]["valid"], true);
    assert_eq!(o.summary["verdict"]["limiting_exponent"], "1/2");

    run(Command::Lln, &res, &out, Execution::Sequential).unwrap();
    let (_, rows) = output::read_csv(&out.join("lln.csv")).unwrap();
    assert_eq!(rows.len(), 6);

    let o = run(Command::Simulate, &res, &out, Execution::Sequential).unwrap();
    assert!(o.success());
    let (header, rows) = output::read_csv(&out.join("path.csv")).unwrap();
    assert_eq!(header, ["t", "x1", "y", "state"]);
    assert_eq!(rows.len(), 1000);
}

#[test]
fn mixing_needs_a_chain() {
    let cfg = r#"
[process]
kind = "ar1"
rho = 0.5
noise_sd = 1.0
label = { kind = "regression", mean = { linear = { weights = [1.0], bias = 0.0 } }, noise = { gaussian = { sd = 1.0 } }, moment_order = 2.0 }
"#;
    let res = parse_str(cfg, &[]).unwrap();
    let e = run(Command::Mixing, &res, &scratch("nochain"), Execution::Sequential).unwrap_err();
    assert!(format!("{e:#}").contains("markov_chain"));
    let res = parse_str(AR1, &[]).unwrap();
    let e = run(Command::Mixing, &res, &scratch("nochain"), Execution::Sequential).unwrap_err();
    assert!(format!("{e:#}").contains("markov_chain"));
}

fn mixsvm(args: &[&str]) -> std::process::Output {
    Proc::new(env!("CARGO_BIN_EXE_mixsvm")).args(args).output().unwrap()
}

#[test]
fn binary_exit_codes_and_determinism() {
    let dir = scratch("bin");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let cfg = cfg.to_str().unwrap();
    let out = dir.join("out");
    let out = out.to_str().unwrap();

    let first = mixsvm(&["sweep", "--config", cfg, "--out", out, "--jobs", "1"]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&first.stdout).unwrap();
    assert_eq!(summary["ok"], true);
    let a = std::fs::read(dir.join("out/sweep.csv")).unwrap();
    let again = mixsvm(&["sweep", "--config", cfg, "--out", out, "--jobs", "2"]);
    assert!(again.status.success());
    assert_eq!(a, std::fs::read(dir.join("out/sweep.csv")).unwrap());

    // one epoch on continuous inputs cannot certify the tolerance: exit 2
    let ar = dir.join("ar.toml");
    std::fs::write(&ar, AR1).unwrap();
    let v = mixsvm(&["train", "--config", ar.to_str().unwrap(), "--out", out, "--set", "experiment.max_epochs=1"]);
    assert_eq!(v.status.code(), Some(2), "{}", String::from_utf8_lossy(&v.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&v.stdout).unwrap();
    assert_eq!(summary["violations"][0]["check"], "solver_not_converged");

    let bad = mixsvm(&["sweep", "--config", cfg, "--out", out, "--set", "experiment.bogus=1"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("bogus"));
    let missing = mixsvm(&["sweep", "--config", "/nonexistent.toml"]);
    assert_eq!(missing.status.code(), Some(1));
}
