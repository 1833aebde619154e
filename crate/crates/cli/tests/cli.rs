use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ising-lab")).args(args).output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Data rows of a CSV with `#` metadata lines, header excluded.
fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("missing column {name}"))
}

#[test]
fn phase_diagram_labels_regimes() {
    let text = run_ok(&["phase-diagram", "--beta", "0.4,1.0", "--field", "0.01,0.7"]);
    let (header, rows) = csv_rows(&text);
    let regime = column(&header, "regime");
    let bc = column(&header, "b_hat_c");
    let lambda = column(&header, "lambda");
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][regime], "subcritical");
    assert!(rows[0][bc].is_empty());
    // beta = 1 has B_hat_c ~ 0.3257, so 0.7 is more than twice the critical field
    assert_eq!(rows[2][regime], "metastable");
    assert!(rows[2][lambda].parse::<f64>().unwrap() > 0.0);
    assert_eq!(rows[3][regime], "supercritical-fast");
}

#[test]
fn critical_fields_tree_and_annealed_agree() {
    let text = run_ok(&["critical-fields", "--d", "3,4", "--beta", "1.5"]);
    let (header, rows) = csv_rows(&text);
    let (a, t) = (column(&header, "b_hat_c"), column(&header, "b_c_tree"));
    for row in rows {
        let diff: f64 = row[a].parse::<f64>().unwrap() - row[t].parse::<f64>().unwrap();
        assert!(diff.abs() < 1e-6);
    }
}

#[test]
fn config_file_with_flag_override_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# landscape run\nbeta = 2.0\npoints = 5\nfield = 0.1\n").unwrap();
    let out = dir.path().join("out");
    run_ok(&["landscape", "--config", cfg.to_str().unwrap(), "--points", "3", "--out", out.to_str().unwrap()]);
    let text = std::fs::read_to_string(out.join("landscape.csv")).unwrap();
    let config_line = text.lines().find(|l| l.starts_with("# config=")).unwrap();
    let config: Value = serde_json::from_str(config_line.trim_start_matches("# config=")).unwrap();
    assert_eq!(config["beta"], 2.0);
    assert_eq!(config["points"], 3);
    assert_eq!(config["field"], 0.1);
    assert_eq!(csv_rows(&text).1.len(), 3);
    assert!(text.contains("# input_hash="));
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "betta = 2.0\n").unwrap();
    let out = run(&["landscape", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulation_outputs_are_byte_identical_across_runs() {
    let args = ["hitting-sim", "--n", "16", "--beta", "0.6", "--steps", "20000", "--replicas", "3", "--seed", "9"];
    let a = run_ok(&args);
    let b = Command::new(env!("CARGO_BIN_EXE_ising-lab")).args(args).env("ISING_LAB_THREADS", "1").output().unwrap();
    assert_eq!(a.as_bytes(), b.stdout.as_slice());
    let c = run_ok(&["hitting-sim", "--n", "16", "--beta", "0.6", "--steps", "20000", "--replicas", "3", "--seed", "10"]);
    assert_ne!(a, c);
}

#[test]
fn invalid_thread_count_is_an_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_ising-lab")).args(["landscape"]).env("ISING_LAB_THREADS", "zero").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn budget_refusal_exits_with_two() {
    assert_eq!(run(&["mix-exact", "--n", "4000", "--start", "all"]).status.code(), Some(2));
    assert_eq!(run(&["mix-bounds", "--n", "100", "--max-states", "50"]).status.code(), Some(2));
    assert_eq!(run(&["glauber-sim", "--steps", "1000", "--replicas", "2", "--max-work", "100"]).status.code(), Some(2));
}

#[test]
fn acceptance_negative_control_and_empty_grid() {
    let out = run(&["acceptance", "--only", "A1", "--bc-perturbation", "1e-2"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stdout).contains("A1   FAIL"));
    let out = run(&["acceptance", "--only", ""]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
}

#[test]
fn acceptance_report_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        run_ok(&["acceptance", "--only", "A1,A9,A12", "--out", d.to_str().unwrap()]);
    }
    let ra = std::fs::read(a.join("acceptance.json")).unwrap();
    assert_eq!(ra, std::fs::read(b.join("acceptance.json")).unwrap());
    let report = read_json(&a.join("acceptance.json"));
    assert_eq!(report["result"]["verdicts"].as_array().unwrap().len(), 3);
    assert!(report["result"]["failed"].as_array().unwrap().is_empty());
}

#[test]
fn graph_gen_writes_parseable_edge_list() {
    let text = run_ok(&["graph-gen", "--n", "10", "--d", "3", "--seed", "4"]);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "# 10 3 4");
    let mut degree = [0usize; 10];
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let (u, v) = line.split_once(' ').unwrap();
        degree[u.parse::<usize>().unwrap()] += 1;
        degree[v.parse::<usize>().unwrap()] += 1;
    }
    assert!(degree.iter().all(|&k| k == 3));
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["graph-gen", "--n", "10", "--simple", "--out", dir.path().to_str().unwrap()]);
    let meta = read_json(&dir.path().join("graph.edges.meta.json"));
    assert_eq!(meta["meta"]["config"]["simple"], true);
    assert_eq!(meta["content_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn cutoff_profile_collapses_and_brackets() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["cutoff-profile", "--n", "64,128,256", "--out", dir.path().to_str().unwrap()]);
    let result = read_json(&dir.path().join("cutoff_profile.json"))["result"].clone();
    assert!(result["crossing_half_spread"].as_f64().unwrap() <= 8.0);
    for entry in result["per_n"].as_array().unwrap() {
        let minus: Vec<f64> = entry["d_at_minus_gamma"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        let plus: Vec<f64> = entry["d_at_plus_gamma"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        assert!(minus.windows(2).all(|w| w[1] >= w[0]));
        assert!(plus.windows(2).all(|w| w[1] <= w[0]));
        assert!(entry["t_mix"]["0.25"].as_u64().is_some());
    }
}

#[test]
fn metastability_columns() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["metastability", "--n", "100,200,400", "--out", dir.path().to_str().unwrap()]);
    let (header, rows) = csv_rows(&std::fs::read_to_string(dir.path().join("metastability.csv")).unwrap());
    let (h, l) = (column(&header, "log_hitting_over_n"), column(&header, "lambda_target"));
    let lambda: f64 = rows[0][l].parse().unwrap();
    let errs: Vec<f64> = rows.iter().map(|r| (r[h].parse::<f64>().unwrap() - lambda).abs()).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]));
    let (_, sweep) = csv_rows(&std::fs::read_to_string(dir.path().join("lambda_by_beta.csv")).unwrap());
    let at = |b: &str| sweep.iter().find(|r| r[0] == b).unwrap()[1].parse::<f64>().unwrap();
    assert!(at("16") / at("4") <= 1.5);
}

#[test]
fn mix_exact_and_quenched_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    run_ok(&["mix-exact", "--n", "40", "--out", d]);
    let mix = read_json(&dir.path().join("mix_exact.json"))["result"].clone();
    let gap = mix["gap"].as_f64().unwrap();
    assert!(mix["chen_lower"].as_f64().unwrap() <= gap && gap <= mix["chen_upper"].as_f64().unwrap());
    assert!(mix["t_mix_quarter"].as_u64().is_some());
    run_ok(&["quenched-exact", "--n", "8", "--samples", "3", "--out", d]);
    let q = read_json(&dir.path().join("quenched_exact.json"))["result"].clone();
    assert_eq!(q["annealed_gap_by_k"].as_array().unwrap().len(), 9);
    assert_eq!(q["annealed_dominates"], true);
    let (header, rows) = csv_rows(&std::fs::read_to_string(dir.path().join("quenched_exact.csv")).unwrap());
    assert_eq!(header, ["sample", "graph_id", "k", "logZ"]);
    assert_eq!(rows.len(), 27);
}

#[test]
fn tree_decay_refuses_non_uniqueness() {
    let text = run_ok(&["tree-decay", "--field-offset", "0.2", "--depth-max", "10"]);
    let (header, rows) = csv_rows(&text);
    assert_eq!(header, ["depth", "influence", "fitted_rate", "kappa_bound"]);
    assert_eq!(rows.len(), 10);
    let out = run(&["tree-decay", "--beta", "1.5", "--field", "0.0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn coupling_and_glauber_traces() {
    let text = run_ok(&["coupling", "--n", "12", "--beta", "0.3", "--steps", "50000", "--replicas", "3"]);
    let (header, rows) = csv_rows(text.split("\n{").next().unwrap());
    assert_eq!(header, ["replica", "time", "censored"]);
    assert!(rows.iter().all(|r| r[2] == "false"));
    let text = run_ok(&["glauber-sim", "--n", "12", "--steps", "100", "--record-stride", "10", "--replicas", "2"]);
    let (_, rows) = csv_rows(text.split("\n{").next().unwrap());
    assert_eq!(rows.len(), 2 * 11);
}
