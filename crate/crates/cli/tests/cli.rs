use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn slicevis(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slicevis")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write_csv(dir: &Path) -> String {
    let mut s = String::from("x,z,g,y\n");
    for i in 0..40 {
        let x = (i % 8) as f64;
        let z = ((i * 5) % 13) as f64;
        let g = ["a", "b", "c"][i % 3];
        s.push_str(&format!("{x},{z},{g},{}\n", 3.0 - x + 0.5 * z));
    }
    let p = dir.join("d.csv");
    std::fs::write(&p, s).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn ingest_reports_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_csv(dir.path());
    let s = json(&slicevis(&["ingest", "--data", &data]));
    assert_eq!(s["nrows"], 40);
    let kinds: Vec<&str> = s["columns"].as_array().unwrap().iter().map(|c| c["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["numeric", "numeric", "categorical", "numeric"]);
}

#[test]
fn fit_describes_the_model() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_csv(dir.path());
    let m = json(&slicevis(&["fit", "--data", &data, "--response", "y", "--builtin", "linear", "--id", "lm"]));
    assert_eq!(m["id"], "lm");
    assert_eq!(m["kind"], "numeric");
    assert_eq!(m["inputSchema"].as_array().unwrap().len(), 3);
}

#[test]
fn section_matches_the_session_payload_schema() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_csv(dir.path());
    let s = json(&slicevis(&[
        "section", "--data", &data, "--response", "y", "--section", "x", "--builtin", "linear", "--point", "z=4,g=b",
        "--sigma", "max",
    ]));
    assert_eq!(s["plotType"], "curve");
    assert_eq!(s["point"]["uC"]["z"], 4.0);
    assert_eq!(s["point"]["uC"]["g"], "b");
    assert_eq!(s["points"].as_array().unwrap().len(), 40);
    // y = 3 - x + 0.5 z exactly, so the curve at z = 4 is 5 - x
    let xs = s["grid"]["axes"][0]["values"].as_array().unwrap();
    let ys = s["fits"][0]["predictions"]["values"].as_array().unwrap();
    assert_eq!(xs.len(), ys.len());
    for (x, y) in xs.iter().zip(ys) {
        assert!((5.0 - x.as_f64().unwrap() - y.as_f64().unwrap()).abs() < 1e-9);
    }
}

#[test]
fn tour_json_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_csv(dir.path());
    let t = json(&slicevis(&["tour", "--data", &data, "--response", "y", "--kind", "kmed", "--length", "5", "--seed", "2"]));
    assert_eq!(t["kind"], "kmed");
    assert_eq!(t["points"].as_array().unwrap().len(), 5);
    assert!(t["diagnostics"]["visible"].as_array().unwrap().iter().all(|v| v.as_u64().unwrap() >= 1));

    let out = slicevis(&[
        "tour", "--data", &data, "--response", "y", "--kind", "random,kmed", "--length", "5", "--seeds", "3", "--format",
        "table", "--label", "toy",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].contains("random") && lines[0].contains("kmed"));
    assert!(lines[1].starts_with("toy"));
}

#[test]
fn lof_tour_ranks_by_residual() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_csv(dir.path());
    let t = json(&slicevis(&[
        "tour", "--data", &data, "--response", "y", "--kind", "lof", "--length", "3", "--builtin", "knn:3",
    ]));
    assert_eq!(t["kind"], "lof");
    assert_eq!(t["ranked"].as_array().unwrap().len(), 3);
}

#[test]
fn simulate_then_ingest_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sim.csv");
    let csv = csv.to_str().unwrap();
    let out = slicevis(&["simulate", "--kind", "mixture", "--n", "50", "--p", "3", "--seed", "4", "--out", csv]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let s = json(&slicevis(&["ingest", "--data", csv]));
    assert_eq!(s["nrows"], 50);
    assert_eq!(s["columns"].as_array().unwrap().len(), 3);
}

#[test]
fn config_fills_unset_flags_only() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_csv(dir.path());
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[tour]\nkind = [\"random\"]\nlength = 3\nsigma = \"max\"\nseed = 9\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let t = json(&slicevis(&["--config", cfg, "tour", "--data", &data, "--response", "y", "--length", "4"]));
    assert_eq!(t["kind"], "random");
    assert_eq!(t["lengthRequested"], 4);
    assert_eq!(t["seed"], 9);
    assert_eq!(t["diagnostics"]["meanVisible"], 40.0);

    std::fs::write(dir.path().join("bad.toml"), "[tour]\nwidth = 3\n").unwrap();
    let out = slicevis(&["--config", dir.path().join("bad.toml").to_str().unwrap(), "tour", "--data", &data]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_csv(dir.path());
    assert_eq!(slicevis(&["frobnicate"]).status.code(), Some(2));
    // no response designated
    assert_eq!(slicevis(&["tour", "--data", &data, "--kind", "lof"]).status.code(), Some(2));
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "x,y\n").unwrap();
    assert_eq!(slicevis(&["ingest", "--data", empty.to_str().unwrap()]).status.code(), Some(3));
    let out = slicevis(&["fit", "--data", &data, "--response", "y", "--builtin", "forest"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("forest"));
}
