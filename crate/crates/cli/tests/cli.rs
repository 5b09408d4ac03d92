//! End-to-end runs of the `dichotomy` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dichotomy"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    all.extend(["--out", dir.to_str().unwrap()]);
    run(&all)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn f(v: &Value) -> f64 {
    match v {
        Value::String(s) if s == "inf" => f64::INFINITY,
        Value::String(s) if s == "-inf" => f64::NEG_INFINITY,
        other => other.as_f64().expect("number"),
    }
}

fn intervals(doc: &Value) -> Vec<(f64, f64)> {
    doc["result"]["intervals"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| (f(&i["lo"]), f(&i["hi"])))
        .collect()
}

/// Data rows of a CSV written by the CLI, skipping the config line and header.
fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# schema_version=1 config={"));
    lines.next().unwrap();
    lines.map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn ex731_nonuniform_spectrum() {
    let dir = TempDir::new().unwrap();
    let o = run_in(
        dir.path(),
        &["spectrum", "--corpus", "ex731", "--params", "ω=2,a=1", "--rate", "exponential", "--class", "nonuniform"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json(dir.path(), "spectrum.json");
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["command"], "spectrum");
    assert_eq!(doc["config"]["window"], serde_json::json!([-400, 400]));
    assert_eq!(doc["config"]["system"]["corpus"]["params"]["omega"].as_f64(), Some(2.0));
    assert_eq!(doc["config"]["fit"]["log_k_cap"].as_f64(), Some(10.0));
    let iv = intervals(&doc);
    assert_eq!(iv.len(), 1);
    assert!((iv[0].0 + 5.0).abs() < 0.1 && (iv[0].1 - 1.0).abs() < 0.1, "{iv:?}");
    assert_eq!(doc["result"]["gap_ranks"], serde_json::json!([0, 1]));
    assert_eq!(doc["result"]["reference"]["provenance"], "published");
    let rows = csv_rows(&dir.path().join("grid.csv"));
    assert_eq!(rows.len() as u64, doc["result"]["grid_points"].as_u64().unwrap());
    // Every float is written with 12 significant digits.
    assert_eq!(rows[0][0].trim_start_matches('-').replace('.', "").trim_start_matches('0').len(), 12);
}

#[test]
fn autonomous_uniform_spectrum_is_a_point() {
    let dir = TempDir::new().unwrap();
    let args = ["spectrum", "--corpus", "autonomous", "--params", "c=0", "--class", "uniform"];
    assert_eq!(code(&run_in(dir.path(), &args)), 0);
    let iv = intervals(&json(dir.path(), "spectrum.json"));
    // The log K cap biases a windowed edge by about cap/(2N).
    assert_eq!(iv.len(), 1);
    assert!(iv[0].0.abs() < 0.03 && iv[0].1.abs() < 0.03, "{iv:?}");
    let mut exact = args.to_vec();
    exact.extend(["--log-k-cap", "0", "--refinement-tol", "1e-4"]);
    assert_eq!(code(&run_in(dir.path(), &exact)), 0);
    let iv = intervals(&json(dir.path(), "spectrum.json"));
    assert!(iv[0].0.abs() < 2e-3 && iv[0].1.abs() < 2e-3, "{iv:?}");
}

#[test]
fn ex707_quadratic_uniform_spectrum() {
    let dir = TempDir::new().unwrap();
    let o = run_in(dir.path(), &["spectrum", "--corpus", "ex707", "--rate", "quadratic", "--class", "uniform"]);
    assert_eq!(code(&o), 0);
    let doc = json(dir.path(), "spectrum.json");
    // The windowed uniform test finds resolvent points outside [−1, 1].
    let iv = intervals(&doc);
    assert_eq!(iv.len(), 1);
    assert!((iv[0].0 + 1.0).abs() < 0.1 && (iv[0].1 - 1.0).abs() < 0.1, "{iv:?}");
    assert_eq!(doc["config"]["rate"], "quadratic");
}

#[test]
fn ratio_columns_follow_closed_forms() {
    let dir = TempDir::new().unwrap();
    let base = ["ratios", "--corpus", "ex731", "--params", "ω=2,a=1"];
    let mut right = base.to_vec();
    right.extend(["--gap", "1", "--gammas", "1.5,2,3,5"]);
    assert_eq!(code(&run_in(dir.path(), &right)), 0);
    for row in csv_rows(&dir.path().join("ratios_gap1.csv")) {
        let (g, st): (f64, f64) = (row[0].parse().unwrap(), row[1].parse().unwrap());
        assert!((st - (1.0 - g)).abs() < 0.1, "st({g}) = {st}");
        assert_eq!(row[2], "");
    }
    let mut left = base.to_vec();
    left.extend(["--gap", "0", "--gammas", "-6,-8"]);
    assert_eq!(code(&run_in(dir.path(), &left)), 0);
    for row in csv_rows(&dir.path().join("ratios_gap0.csv")) {
        let (g, un): (f64, f64) = (row[0].parse().unwrap(), row[2].parse().unwrap());
        assert!((un - (-5.0 - g)).abs() < 0.1, "un({g}) = {un}");
    }
    let manifest = json(dir.path(), "ratios.json");
    assert_eq!(manifest["result"]["files"][0]["monotone"], true);

    let mut bad = base.to_vec();
    bad.extend(["--gap", "7"]);
    let o = run_in(dir.path(), &bad);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("gap index 7"));
}

#[test]
fn autonomous_ratios_are_exact_lines() {
    let dir = TempDir::new().unwrap();
    let o = run_in(
        dir.path(),
        &["ratios", "--corpus", "autonomous", "--params", "c=1", "--log-k-cap", "0", "--window", "60", "--samples", "12"],
    );
    assert_eq!(code(&o), 0);
    let left = csv_rows(&dir.path().join("ratios_gap0.csv"));
    let right = csv_rows(&dir.path().join("ratios_gap1.csv"));
    assert_eq!((left.len(), right.len()), (12, 12));
    for row in &left {
        let (g, un): (f64, f64) = (row[0].parse().unwrap(), row[2].parse().unwrap());
        assert!((un - (1.0 - g)).abs() < 1e-9);
    }
    for row in &right {
        let (g, st): (f64, f64) = (row[0].parse().unwrap(), row[1].parse().unwrap());
        assert!((st - (1.0 - g)).abs() < 1e-9);
    }
}

#[test]
fn ratios_reuse_a_spectrum_file() {
    let dir = TempDir::new().unwrap();
    let sys = ["--corpus", "ex731", "--params", "ω=2,a=1", "--window", "100"];
    let mut s = vec!["spectrum"];
    s.extend(sys);
    assert_eq!(code(&run_in(dir.path(), &s)), 0);
    let spectrum_file = dir.path().join("spectrum.json");
    let mut r = vec!["ratios", "--spectrum-json", spectrum_file.to_str().unwrap(), "--samples", "5"];
    r.extend(sys);
    assert_eq!(code(&run_in(dir.path(), &r)), 0);
    let m = json(dir.path(), "ratios.json");
    assert_eq!(m["result"]["files"].as_array().unwrap().len(), 2);
    assert_eq!(m["result"]["gaps_from"], spectrum_file.to_str().unwrap());
}

#[test]
fn verify_examples() {
    let dir = TempDir::new().unwrap();
    let ex707 = ["verify", "--corpus", "ex707", "--rate", "quadratic"];
    let mut slow = ex707.to_vec();
    slow.extend(["--params-json", r#"{"class":"slow","projector":"id","alpha":-1,"theta":2,"k":1}"#]);
    assert_eq!(code(&run_in(dir.path(), &slow)), 0);
    let doc = json(dir.path(), "verify.json");
    assert_eq!(doc["result"]["feasible"], true);
    assert_eq!(doc["result"]["report"]["side"], "both");

    let mut nonuniform = ex707.to_vec();
    nonuniform.extend(["--params-json", r#"{"class":"nonuniform","projector":"id","alpha":-1,"theta":2}"#]);
    let o = run_in(dir.path(), &nonuniform);
    assert_eq!(code(&o), 3);
    let doc = json(dir.path(), "verify.json");
    assert!(doc["result"]["rejected"].as_str().unwrap().contains("must be negative"));

    let identity = |n: &str| {
        let d = TempDir::new().unwrap();
        let o = run_in(
            d.path(),
            &[
                "verify",
                "--corpus",
                "autonomous",
                "--params",
                "c=0",
                "--window",
                n,
                "--params-json",
                r#"{"class":"uniform","projector":"id","alpha":-0.1,"k":1}"#,
            ],
        );
        assert_eq!(code(&o), 3);
        let doc = json(d.path(), "verify.json");
        assert_eq!(doc["result"]["feasible"], false);
        f(&doc["result"]["report"]["worst_slack"])
    };
    let (s50, s100) = (identity("50"), identity("100"));
    assert!((s50 - 10.0).abs() < 1e-9 && (s100 - 20.0).abs() < 1e-9, "{s50} {s100}");
}

#[test]
fn verify_reads_params_from_a_file() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("p.json");
    fs::write(&p, r#"{"class":"slow","projector":[1],"alpha":-1,"theta":2,"log_k":0,"gamma":0}"#).unwrap();
    let o = run_in(
        dir.path(),
        &["verify", "--corpus", "ex707", "--params-json", p.to_str().unwrap()],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = run_in(dir.path(), &["verify", "--corpus", "ex707", "--params-json", r#"{"class":"slow"}"#]);
    assert_eq!(code(&o), 2);
}

#[test]
fn similarity_experiments() {
    let dir = TempDir::new().unwrap();
    let base = ["similarity", "--corpus", "ex731", "--params", "ω=2,a=1"];
    let mut shift = base.to_vec();
    shift.extend(["--map", "exp-scaling:-1"]);
    assert_eq!(code(&run_in(dir.path(), &shift)), 0);
    let doc = json(dir.path(), "similarity.json");
    let r = &doc["result"];
    assert_eq!(r["non_invariance_demonstrated"], true);
    for d in r["diffs"].as_array().unwrap() {
        assert!((f(&d["displacement"]) - 1.0).abs() < 0.1, "{d}");
    }

    let mut id = base.to_vec();
    id.extend(["--map", "identity"]);
    assert_eq!(code(&run_in(dir.path(), &id)), 0);
    let doc = json(dir.path(), "similarity.json");
    assert_eq!(doc["result"]["non_invariance_demonstrated"], false);
    for d in doc["result"]["diffs"].as_array().unwrap() {
        assert_eq!(f(&d["displacement"]), 0.0);
    }

    let mut uniform = shift.clone();
    uniform.extend(["--class", "uniform"]);
    assert_eq!(code(&run_in(dir.path(), &uniform)), 0);
    let doc = json(dir.path(), "similarity.json");
    for s in ["spectrum_a", "spectrum_b"] {
        assert_eq!(doc["result"][s]["flags"], serde_json::json!(["may_exceed_range"]), "{s}");
    }

    let mut degenerate = shift.clone();
    degenerate.extend(["--theta-s", "0.5"]);
    let o = run_in(dir.path(), &degenerate);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("not weakly nondegenerate"));
    let doc = json(dir.path(), "nondegeneracy.json");
    assert_eq!(doc["result"]["passes"], false);
}

#[test]
fn diagnose_examples() {
    let diag = |corpus: &str, params: &str| {
        let dir = TempDir::new().unwrap();
        let o = run_in(dir.path(), &["diagnose", "--corpus", corpus, "--params", params, "--window", "200"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        json(dir.path(), "diagnose.json")["result"].clone()
    };
    let r = diag("ex707", "");
    assert_eq!(r["usp_holds"], false);
    assert_eq!(r["upp"]["status"], "violated");
    assert_eq!(r["upp"]["class"], "slow");
    let r = diag("ex718", "");
    assert_eq!((r["usp_holds"].clone(), r["upp"]["status"].clone()), (Value::Bool(false), "violated".into()));
    let r = diag("ex708", "ω=2,a=0.8");
    assert_eq!((r["usp_holds"].clone(), r["upp"]["status"].clone()), (Value::Bool(true), "holds".into()));
    let r = diag("ex731", "ω=2,a=1");
    assert!(f(&r["growth"]["a_hat"]) <= 3.0 && f(&r["growth"]["eps_hat"]) <= 2.0, "{}", r["growth"]);
    assert!(f(&r["cocycle"]["max_relative_error"]) < 1e-10);
}

#[test]
fn corpus_commands() {
    let o = run(&["corpus", "list"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    for name in ["ex707", "ex718", "ex708", "ex731", "ex735", "autonomous"] {
        assert!(text.contains(name), "{name}");
    }
    let o = run(&["corpus", "show", "ex731", "--params", "ω=2,a=1"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("[-5, 1]") && text.contains("published") && text.contains("computed"));
    assert_eq!(code(&run(&["corpus", "show", "ex731", "--params", "ω=4,a=1"])), 2);
    assert_eq!(code(&run(&["corpus", "show", "missing"])), 2);
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        "# ex731 at a small window\ncorpus = \"ex731\"\nparams = \"omega=2,a=1\"\nwindow = 100\ngrid_step = 0.1\nseed = 11\n",
    )
    .unwrap();
    let o = run_in(dir.path(), &["spectrum", "--config", cfg.to_str().unwrap(), "--window", "-50,60"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json(dir.path(), "spectrum.json");
    assert_eq!(doc["config"]["window"], serde_json::json!([-50, 60]));
    assert_eq!(f(&doc["config"]["grid_step"]), 0.1);
    assert_eq!(doc["config"]["seed"], 11);

    fs::write(&cfg, "corpus = \"ex731\"\nstep = 0.1\n").unwrap();
    assert_eq!(code(&run_in(dir.path(), &["spectrum", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn config_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    for args in [
        vec!["spectrum"],
        vec!["spectrum", "--corpus", "ex731", "--refinement-tol", "0"],
        vec!["spectrum", "--corpus", "ex731", "--window", "5,-5"],
        vec!["spectrum", "--corpus", "ex731", "--class", "fast"],
        vec!["spectrum", "--corpus", "ex731", "--gamma-min", "1"],
        vec!["spectrum", "--corpus", "ex731", "--rate", "linear"],
        vec!["spectrum", "--corpus", "ex731", "--jobs", "0"],
        vec!["spectrum", "--corpus", "nope"],
        vec!["spectrum", "--system-csv", "/nonexistent.csv"],
        vec!["similarity", "--corpus", "ex731", "--map", "rotate:2"],
        vec!["frobnicate"],
    ] {
        let o = run_in(dir.path(), &args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn system_csv_input() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("sys.csv");
    let mut text = String::from("window,-30,31\n");
    for n in -30..=31 {
        text.push_str(&format!("{n},{},0,0,{}\n", (-1.0f64).exp(), 1.0f64.exp()));
    }
    fs::write(&csv, text).unwrap();
    let o = run_in(
        dir.path(),
        &["spectrum", "--system-csv", csv.to_str().unwrap(), "--log-k-cap", "0", "--gamma-min", "-2", "--gamma-max", "2"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json(dir.path(), "spectrum.json");
    let iv = intervals(&doc);
    assert_eq!(iv.len(), 2, "{iv:?}");
    assert!((iv[0].0 + 1.0).abs() < 0.01 && (iv[1].1 - 1.0).abs() < 0.01, "{iv:?}");
    assert_eq!(doc["config"]["window"], serde_json::json!([-30, 31]));
}

fn all_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn outputs_are_reproducible_across_runs_and_job_counts() {
    let runs = [("1", "a"), ("4", "b"), ("4", "c")];
    let base = ["--corpus", "ex731", "--params", "ω=2,a=1", "--window", "120", "--seed", "5"];
    let mut outputs = Vec::new();
    for (jobs, _) in runs {
        let dir = TempDir::new().unwrap();
        for cmd in [vec!["spectrum"], vec!["ratios", "--samples", "8"], vec!["diagnose"]] {
            let mut args = cmd.clone();
            args.extend(base);
            args.extend(["--jobs", jobs]);
            assert_eq!(code(&run_in(dir.path(), &args)), 0);
        }
        outputs.push(all_files(dir.path()));
    }
    assert_eq!(outputs[0].len(), 6);
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[1], outputs[2]);
}

#[test]
fn seed_changes_only_the_spot_check() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for (dir, seed) in [(&a, "1"), (&b, "2")] {
        let o = run_in(dir.path(), &["diagnose", "--corpus", "ex708", "--window", "100", "--seed", seed]);
        assert_eq!(code(&o), 0);
    }
    let (ja, jb) = (json(a.path(), "diagnose.json"), json(b.path(), "diagnose.json"));
    assert_eq!(ja["result"]["growth"], jb["result"]["growth"]);
    assert_eq!(ja["result"]["cocycle"]["seed"], 1);
    assert_eq!(jb["result"]["cocycle"]["seed"], 2);
}
