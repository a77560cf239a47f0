use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dronenet::design::Design;
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/tiny").join(name)
}

fn run(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dronenet"));
    cmd.args(args);
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("{e}: {}", String::from_utf8_lossy(&out.stdout))
    })
}

fn config() -> String {
    fixture("config.json").display().to_string()
}

fn certified() -> Value {
    serde_json::from_str(&std::fs::read_to_string(fixture("oracle.json")).unwrap()).unwrap()
}

#[test]
fn solve_matches_the_certified_optimum() {
    let out = run(&["--config", &config(), "solve", "--mode", "oa_bc"], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let got = json(&out)["objective"].as_f64().unwrap();
    let want = certified()["objective"].as_f64().unwrap();
    assert!((got - want).abs() <= 1e-6 * want, "{got} vs {want}");
}

#[test]
fn oracle_recertifies_the_fixture() {
    let out = run(&["--config", &config(), "oracle"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let c = certified();
    assert_eq!(v["design"], c["design"]);
    assert_eq!(v["objective"], c["objective"]);
}

#[test]
fn every_mode_agrees_on_the_fixture() {
    let want = certified()["objective"].as_f64().unwrap();
    for mode in ["REFO", "OA", "OA_BC"] {
        let out = run(&["--config", &config(), "--mode", mode, "solve"], &[]);
        let got = json(&out)["objective"].as_f64().unwrap();
        assert!((got - want).abs() <= 1e-6 * want, "{mode}");
    }
}

#[test]
fn heuristic_is_no_better_than_the_optimum() {
    let out = run(&["--config", &config(), "heuristic"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let got = json(&out)["objective"].as_f64().unwrap();
    assert!(got >= certified()["objective"].as_f64().unwrap());
}

#[test]
fn design_json_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("greedy.json");
    let out = run(&["--config", &config(), "heuristic", "--out", path.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let d: Design = serde_json::from_value(v["design"].clone()).unwrap();
    let again: Design = serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
    assert_eq!(d, again);
    let read = dronenet_cli::commands::read_design(&path).unwrap();
    assert_eq!(read, d);
}

#[test]
fn simulate_uses_a_saved_design() {
    let out = run(
        &["--config", &config(), "simulate", "--design", fixture("oracle.json").to_str().unwrap()],
        &[("DRONENET_SIMULATOR__HORIZON", "300000")],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["replications"].as_array().unwrap().len(), 2);
    assert!(v["replications"][0]["served"].as_u64().unwrap() > 50);
    let sim = v["mean_response"].as_f64().unwrap();
    let analytic = v["analytic_response"].as_f64().unwrap();
    // takeoff and landing add 20 s to every response on top of the model
    assert!(sim > analytic && sim < 2.0 * analytic, "{sim} vs {analytic}");
}

#[test]
fn analyze_reproduces_survival_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("analyze.json");
    std::fs::write(
        &cfg,
        r#"{ "network": { "fleet_size": 11 },
             "analytics": { "overdoses_per_year": 560, "drone_response_minutes": 2.04, "ems_response_minutes": 9.32 } }"#,
    )
    .unwrap();
    let out = run(&["--config", cfg.to_str().unwrap(), "analyze"], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let rows = v["report"]["rows"].as_array().unwrap();
    let table = [("BANDARA", 0.48, 0.08, 40, 6), ("DEMAIO", 0.23, 0.04, 19, 3), ("CHANTA", 0.38, 0.09, 32, 7)];
    for (row, (kind, dp, ep, ds, es)) in rows.iter().zip(table) {
        assert_eq!(row["kind"], kind);
        assert!((row["drone_probability"].as_f64().unwrap() - dp).abs() <= 0.01);
        assert!((row["ems_probability"].as_f64().unwrap() - ep).abs() <= 0.01);
        assert_eq!(row["drone_survivors_whole"], ds);
        assert_eq!(row["ems_survivors_whole"], es);
    }
    let cost = v["report"]["network_cost"].as_f64().unwrap();
    assert!((cost - 287_664.0).abs() < 5.0);
}

#[test]
fn malformed_csv_is_a_data_error_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("requests.csv"),
        "timestamp,latitude,longitude\n0,36.85,-75.98\n60,36.86,oops\n",
    )
    .unwrap();
    std::fs::copy(fixture("bases.csv"), dir.path().join("bases.csv")).unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, r#"{ "data": { "requests": "requests.csv", "bases": "bases.csv" } }"#).unwrap();
    let out = run(&["--config", cfg.to_str().unwrap(), "solve"], &[]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("requests.csv:3"), "{err}");
}

#[test]
fn exit_codes() {
    let c = config();
    let out = run(&["--config", &c, "--mode", "fast", "solve"], &[]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["--config", "/nonexistent/config.json", "solve"], &[]);
    assert_eq!(out.status.code(), Some(2));
    // a 5 km radius leaves one cluster uncovered by any two bases
    let out = run(&["--config", &c, "solve"], &[("DRONENET_NETWORK__RADIUS", "5000")]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(json(&out)["status"], "INFEASIBLE");
    let out = run(&["--config", &c, "--warm-start", "solve"], &[("DRONENET_SOLVER__NODE_LIMIT", "1")]);
    assert_eq!(out.status.code(), Some(5));
    assert!(json(&out)["design"].is_object());
}

#[test]
fn template_is_a_complete_config() {
    let out = run(&["template"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let cfg: dronenet_cli::config::RunConfig = serde_json::from_value(v).unwrap();
    assert_eq!(cfg, dronenet_cli::config::RunConfig::default());
}

#[test]
fn bench_emits_matrix_and_profile() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["bench", "--sizes", "20", "--count", "2", "--time-limit", "20", "--out", dir.path().to_str().unwrap()],
        &[],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let mut rdr = csv::Reader::from_path(dir.path().join("bench.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3 * 2);
    let mut rdr = csv::Reader::from_path(dir.path().join("profile.csv")).unwrap();
    let mut last: Option<(String, f64, u64)> = None;
    for r in rdr.records().map(Result::unwrap) {
        let (m, t, k) = (r[0].to_string(), r[1].parse::<f64>().unwrap(), r[2].parse::<u64>().unwrap());
        if let Some((lm, lt, lk)) = &last {
            if *lm == m {
                assert!(t >= *lt && k == lk + 1);
            }
        }
        last = Some((m, t, k));
    }
    let summary = String::from_utf8_lossy(&out.stdout);
    assert!(summary.contains("OA_BC"));
}
