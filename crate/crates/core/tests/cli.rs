use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tnbp::graph::Graph;

fn tnbp(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tnbp"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str], out: &Path) {
    let o = tnbp(args, out);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

fn column(path: &Path, name: &str) -> Vec<String> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let idx = rdr.headers().unwrap().iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rdr.records().map(|r| r.unwrap()[idx].to_string()).collect()
}

#[test]
fn graph_gen_writes_graph_and_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["graph-gen", "--n", "40", "--r", "3", "--seed", "7", "--out", "g.json"], dir.path());
    let g = Graph::load(dir.path().join("g.json")).unwrap();
    assert_eq!(g.n_edges(), 60);
    assert_eq!(g, Graph::random_regular(40, 3, 7).unwrap());
    assert!(dir.path().join("config.json").exists());
    let diag = rows(&dir.path().join("graph_diagnostics.csv"));
    assert!(diag.iter().any(|r| &r[0] == "n_edges" && &r[1] == "60"));
}

#[test]
fn graph_gen_tree_is_acyclic() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["graph-gen", "--tree", "--n", "15", "--branching", "2"], dir.path());
    let diag = rows(&dir.path().join("graph_diagnostics.csv"));
    assert!(diag.iter().any(|r| &r[0] == "is_tree" && &r[1] == "true"));
    for r in diag.iter().filter(|r| r[0].starts_with("cycles_")) {
        assert_eq!(&r[1], "0");
    }
}

#[test]
fn infeasible_graph_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = tnbp(&["graph-gen", "--n", "5", "--r", "3"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("n*r must be even"));
}

#[test]
fn unknown_flag_and_bad_config_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(tnbp(&["graph-gen", "--colour", "red"], dir.path()).status.code(), Some(2));
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{\"seed\": 1}").unwrap();
    let o = tnbp(&["--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(tnbp(&[], dir.path()).status.code(), Some(2));
}

#[test]
fn graphstate_check_reaches_fixed_point() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["graphstate-check", "--n", "50", "--steps", "6", "--seed", "3"], dir.path());
    let path = dir.path().join("graphstate_check.csv");
    let entropy = column(&path, "edge_entropy");
    let x = column(&path, "mean_x");
    let step5: f64 = entropy[5].parse().unwrap();
    assert!((step5 - 2.0 * 2f64.ln()).abs() < 1e-8);
    assert!(x[5].parse::<f64>().unwrap().abs() < 1e-8);
}

#[test]
fn graphstate_check_on_tree() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["graphstate-check", "--tree", "15", "--steps", "8"], dir.path());
    let x = column(&dir.path().join("graphstate_check.csv"), "mean_x");
    // diameter of the 15-vertex binary tree is 6
    for v in &x[6..] {
        assert!(v.parse::<f64>().unwrap().abs() < 1e-12);
    }
}

#[test]
fn bp_run_writes_messages_and_observables() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["bp-run", "--n", "12", "--kind", "sqrt", "--beta", "0.1"], dir.path());
    for f in ["bp_diagnostics.csv", "messages.json", "observables.json", "graph.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let obs: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("observables.json")).unwrap()).unwrap();
    assert_eq!(obs["converged"], true);
    // tree-level estimate sech(β)^3 ≈ 0.985
    assert!(obs["observables"]["mean_x"].as_f64().unwrap() > 0.95);
}

#[test]
fn sqrt_sweep_small_graph_reports_exact_deviation() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &[
            "sqrt-sweep", "--n", "12", "--beta-min", "0", "--beta-max", "0.2", "--beta-step", "0.1",
            "--sweeps", "3000", "--burn-in", "500", "--bp-init", "identity",
        ],
        dir.path(),
    );
    let path = dir.path().join("sqrt_sweep.csv");
    let x = column(&path, "bp_mean_x");
    assert_eq!(x.len(), 3);
    assert!((x[0].parse::<f64>().unwrap() - 1.0).abs() < 1e-8);
    assert!(column(&path, "exact_max_dev_x").iter().all(|v| !v.is_empty()));
    assert!(dir.path().join("exact_deviation.json").exists());
}

#[test]
fn var_prep_with_oracle_and_zero_hamiltonian() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["var-prep", "--n", "8", "--t-var", "3", "--oracle", "--save-state"], dir.path());
    let path = dir.path().join("var_trace.csv");
    assert_eq!(rows(&path).len(), 3);
    assert!(column(&path, "fidelity").iter().all(|v| !v.is_empty()));
    assert!(dir.path().join("final_state.json").exists());

    let dir = tempfile::tempdir().unwrap();
    ok(
        &["var-prep", "--n", "6", "--t-var", "3", "--jzz", "0", "--hx", "0", "--hz", "0"],
        dir.path(),
    );
    for e in column(&dir.path().join("var_trace.csv"), "energy") {
        assert_eq!(e.parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn oracle_refuses_large_graphs() {
    let dir = tempfile::tempdir().unwrap();
    let o = tnbp(&["var-prep", "--n", "16", "--t-var", "1", "--oracle"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn resolved_config_reproduces_outputs() {
    let a = tempfile::tempdir().unwrap();
    ok(
        &[
            "--threads", "1", "--seed", "5", "tfim-sweep", "--n", "8", "--hx-values", "0.5,3", "--restarts",
            "2", "--t-var", "4", "--oracle",
        ],
        a.path(),
    );
    let cfg = a.path().join("config.json");
    let b = tempfile::tempdir().unwrap();
    ok(&["--threads", "1", "--config", cfg.to_str().unwrap()], b.path());
    for f in ["tfim_sweep.csv", "tfim_summary.csv", "config.json"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f} differs"
        );
    }
    let summary = rows(&a.path().join("tfim_summary.csv"));
    assert_eq!(summary.len(), 2);
    assert_eq!(rows(&a.path().join("tfim_sweep.csv")).len(), 2 * 2 * 4);
    assert!(column(&a.path().join("tfim_summary.csv"), "ed_mean_x").iter().all(|v| !v.is_empty()));
}
