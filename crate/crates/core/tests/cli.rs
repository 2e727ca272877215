use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bexcl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bexcl")).args(args).output().unwrap()
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).unwrap()
}

fn read_json(path: &Path) -> Value {
    json(&std::fs::read(path).unwrap())
}

#[test]
fn verify_gradient_passes() {
    let out = bexcl(&[
        "verify",
        "--identity",
        "gradient",
        "--model",
        "bernstein:n=2,L=4",
        "--N",
        "12",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out.stdout);
    assert_eq!(doc["passed"], true);
    assert_eq!(doc["reports"][0]["states_checked"], 4096);
    assert_eq!(doc["metadata"]["args"]["model"], "bernstein:n=2,L=4");
    assert!(doc["metadata"]["build"]
        .as_str()
        .unwrap()
        .starts_with("bernstein-exclusion"));
}

#[test]
fn mutated_gradient_fails_with_witness() {
    for mutation in ["h", "g", "h-indicator"] {
        let out = bexcl(&["verify", "--identity", "gradient", "--mutate", mutation, "--L", "3"]);
        assert_eq!(out.status.code(), Some(1), "mutation {mutation}");
        let doc = json(&out.stdout);
        assert_eq!(doc["passed"], false);
        let failing: Vec<&Value> = doc["reports"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|r| r["passed"] == false)
            .collect();
        assert!(!failing.is_empty());
        let witness = &failing[0]["failures"][0];
        assert_ne!(witness["lhs"], witness["rhs"]);
    }
}

#[test]
fn full_suite_fails_only_on_the_indicator_threshold_identity() {
    let out = bexcl(&["verify", "--all", "--L", "4", "--N", "12"]);
    assert_eq!(out.status.code(), Some(1));
    let doc = json(&out.stdout);
    let reports = doc["reports"].as_array().unwrap();
    assert!(reports.len() > 30);
    let (threshold, others): (Vec<&Value>, Vec<&Value>) =
        reports.iter().partition(|r| r["identity"] == "threshold_identity");
    assert!(others.iter().all(|r| r["passed"] == true));
    assert!(threshold.iter().any(|r| r["passed"] == false));
    let binomial = bexcl(&["verify", "--identity", "threshold-binomial", "--L", "4", "--N", "12"]);
    assert_eq!(binomial.status.code(), Some(0));
}

#[test]
fn negativity_and_expectation() {
    let out = bexcl(&["verify", "--identity", "negativity", "--n", "1", "--k", "2"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out.stdout)["result"]["negativity"]["value"], "-1/4");

    let out = bexcl(&[
        "expectation",
        "--model",
        "rpmm:l=2,L=4",
        "--rho",
        "0.5",
        "--samples",
        "100000",
        "--seed",
        "7",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out.stdout);
    let (estimate, stderr) = (doc["estimate"].as_f64().unwrap(), doc["stderr"].as_f64().unwrap());
    assert!((estimate - 0.25).abs() <= 3.0 * stderr);
    assert_eq!(doc["exact"], "1/4");
}

#[test]
fn graph_writes_membership() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("g.csv");
    let out = bexcl(&[
        "graph",
        "--model",
        "bernstein:n=2,L=4",
        "--N",
        "14",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("state_id,sector,class_id,blocked"));
    let blocked = lines.filter(|l| l.ends_with(",1")).count();
    assert!(blocked > 0);
    let meta = read_json(&dir.path().join("g.csv.meta.json"));
    assert_eq!(meta["summary"]["blocked"], blocked);
}

#[test]
fn simulate_hydro_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim.csv");
    let out = bexcl(&[
        "simulate",
        "--model",
        "rpmm:l=1,L=2",
        "--N",
        "128",
        "--K",
        "8",
        "--tmax",
        "0.01",
        "--times",
        "0,0.01",
        "--replicas",
        "2",
        "--seed",
        "4",
        "--out",
        sim.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&sim).unwrap();
    assert!(text.starts_with("replica,t_macro,box_index,box_center_u,density\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 8);
    let meta = read_json(&dir.path().join("sim.csv.meta.json"));
    assert_eq!(meta["seed"], 4);

    let pde = dir.path().join("pde.csv");
    let out = bexcl(&[
        "hydro",
        "--model",
        "rpmm:l=1,L=2",
        "--M",
        "32",
        "--tmax",
        "0.01",
        "--out",
        pde.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&pde).unwrap();
    assert!(text.starts_with("t_macro,grid_index,u,rho\n"));
    assert_eq!(text.lines().count(), 1 + 4 * 32);

    let out = bexcl(&[
        "compare",
        "--model",
        "bernstein:n=1,L=2",
        "--N",
        "256",
        "--K",
        "16",
        "--profile",
        "step:0.8,0.2",
        "--tmax",
        "0.01",
        "--replicas",
        "2",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out.stdout);
    let times = doc["comparison"]["times"].as_array().unwrap();
    assert_eq!(times.len(), 4);
    assert!(times.iter().all(|t| t["L1"].as_f64().unwrap() < 0.2));
}

#[test]
fn blocked_simulation_keeps_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("b.csv");
    let out = bexcl(&[
        "simulate",
        "--model",
        "pmm:n=2",
        "--N",
        "16",
        "--K",
        "4",
        "--profile",
        "constant:0.2",
        "--tmax",
        "0.5",
        "--seed",
        "1",
        "--out",
        sim.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let text = std::fs::read_to_string(&sim).unwrap();
    assert!(text.lines().count() > 1);
    let meta = read_json(&dir.path().join("b.csv.meta.json"));
    assert!(meta["replicas"][0]["blocked_at"].is_number());
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["verify"][..],
        &["verify", "--identity", "gradient", "--model", "ssep"],
        &["graph", "--model", "bernstein:n=3,L=2", "--N", "10"],
        &["graph", "--model", "ssep", "--N", "40"],
        &["simulate", "--model", "ssep", "--N", "100", "--K", "7"],
        &["hydro", "--model", "ssep", "--M", "8"],
        &["expectation", "--model", "ssep", "--rho", "1.5"],
        &[
            "simulate", "--model", "ssep", "--N", "64", "--times", "0,0.5", "--tmax", "0.1",
        ],
        &["bogus"],
    ] {
        assert_eq!(bexcl(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(
        &config,
        r#"{"model": "rpmm:l=2,L=4", "rho": "0.5", "samples": 500, "seed": 1}"#,
    )
    .unwrap();
    let base = bexcl(&["expectation", "--config", config.to_str().unwrap()]);
    assert_eq!(base.status.code(), Some(0));
    let doc = json(&base.stdout);
    assert_eq!(doc["model"], "rpmm:l=2,L=4");
    assert_eq!(doc["samples"], 500);

    let overridden = bexcl(&["expectation", "--config", config.to_str().unwrap(), "--samples", "800"]);
    assert_eq!(json(&overridden.stdout)["samples"], 800);

    std::fs::write(&config, r#"{"model": "ssep", "unknown": 1}"#).unwrap();
    assert_eq!(
        bexcl(&["expectation", "--config", config.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn thread_count_does_not_change_output() {
    let args = [
        "simulate",
        "--model",
        "bernstein:n=1,L=2",
        "--N",
        "128",
        "--K",
        "8",
        "--tmax",
        "0.01",
        "--replicas",
        "3",
        "--seed",
        "5",
    ];
    let one = bexcl(&[&args[..], &["--threads", "1"]].concat());
    let two = bexcl(&[&args[..], &["--threads", "3"]].concat());
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, two.stdout);
}
