use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn soliton(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_soliton"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

/// Runs `solve` on a `[2]`, `ε = 1` configuration with a shortened horizon.
fn short_run(tmp: &Path, name: &str) -> PathBuf {
    write_config(
        tmp,
        "short.json",
        r#"{"dims": [2], "epsilon": 1.0, "integrate": {"s_max": 60}}"#,
    );
    let out = soliton(&["solve", "short.json", "--output-dir", name], tmp);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    tmp.join(name)
}

#[test]
fn solve_writes_three_artifacts_and_verify_passes() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), "run.json", r#"{"dims": [2], "epsilon": 1.0}"#);
    let out = soliton(&["solve", "run.json", "--output-dir", "out"], tmp.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let dir = tmp.path().join("out");
    for f in ["trajectory.csv", "profile.csv", "summary.json"] {
        assert!(dir.join(f).is_file(), "missing {f}");
    }
    let summary = read_json(&dir.join("summary.json"));
    assert_eq!(summary["success"], true);
    assert_eq!(summary["config"]["mode"], "soliton");
    assert!(summary["limits"]["mu"].is_array());

    let out = soliton(&["verify", "out"], tmp.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rep = stdout_json(&out);
    assert_eq!(rep["pass"], true);
    let checks = rep["checks"].as_array().unwrap();
    for c in checks {
        for key in ["name", "target", "measured", "tol", "pass", "where"] {
            assert!(c.get(key).is_some(), "check without {key}: {c}");
        }
    }
    let rt = checks.iter().find(|c| c["name"] == "round trip").unwrap();
    assert_eq!(rt["measured"], 0.0);
}

#[test]
fn trajectory_header_has_the_documented_order() {
    let tmp = TempDir::new().unwrap();
    write_config(
        tmp.path(),
        "two.json",
        r#"{"dims": [2, 3], "epsilon": 1.0, "integrate": {"s_max": 20}}"#,
    );
    let out = soliton(&["solve", "two.json", "--output-dir", "o"], tmp.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(tmp.path().join("o/trajectory.csv")).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "s,t,W,X_1,X_2,Y_1,Y_2,u,g_1,g_2,L,H,Q,G,J,C,udot,uddot,trL"
    );
    let prof = std::fs::read_to_string(tmp.path().join("o/profile.csv")).unwrap();
    assert!(prof.starts_with("t,g_1,g_2,gdot_1,gdot_2,gddot_1,gddot_2,gdddot_1,gdddot_2,u,udot,uddot,trL,W,X_1,X_2,Y_1,Y_2\n"));
    let first_row = text.lines().nth(1).unwrap();
    assert!(first_row.split(',').all(|f| f.parse::<f64>().is_ok()));
}

#[test]
fn identical_configs_give_identical_artifacts() {
    let tmp = TempDir::new().unwrap();
    let a = short_run(tmp.path(), "a");
    let b = short_run(tmp.path(), "b");
    for f in ["trajectory.csv", "profile.csv", "summary.json"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn tampered_trajectory_fails_verification() {
    let tmp = TempDir::new().unwrap();
    let dir = short_run(tmp.path(), "run");
    let path = dir.join("trajectory.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let k = lines.len() / 2;
    let mut fields: Vec<String> = lines[k].split(',').map(String::from).collect();
    fields[2] = format!("-{}", fields[2]);
    lines[k] = fields.join(",");
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();

    let out = soliton(&["verify", "run"], tmp.path());
    assert_ne!(code(&out), 0);
    let rep = stdout_json(&out);
    assert_eq!(rep["pass"], false);
    let w = rep["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "W positivity")
        .unwrap();
    assert_eq!(w["pass"], false);
}

#[test]
fn verify_rejects_missing_artifacts() {
    let tmp = TempDir::new().unwrap();
    std::fs::create_dir(tmp.path().join("empty")).unwrap();
    assert_eq!(code(&soliton(&["verify", "empty"], tmp.path())), 1);

    let dir = short_run(tmp.path(), "run");
    std::fs::remove_file(dir.join("trajectory.csv")).unwrap();
    assert_eq!(code(&soliton(&["verify", "run"], tmp.path())), 1);
}

#[test]
fn verify_writes_into_output_dir() {
    let tmp = TempDir::new().unwrap();
    short_run(tmp.path(), "run");
    let out = soliton(&["verify", "run", "--output-dir", "report"], tmp.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rep = read_json(&tmp.path().join("report/verification.json"));
    assert_eq!(rep["pass"], true);
}

#[test]
fn exit_codes_separate_input_rejection_and_numerics() {
    let tmp = TempDir::new().unwrap();
    let t = tmp.path();
    let cases = [
        (r#"{"dims": [1, 3], "epsilon": 1.0}"#, "solve", 1),
        (
            r#"{"dims": [2], "epsilon": 1.0, "bogus": true}"#,
            "solve",
            1,
        ),
        (r#"{"dims": [2], "epsilon": -1.0}"#, "solve", 1),
        (
            r#"{"dims": [2], "epsilon": 1.0, "shoot": {"coeffs": [1, 1]}}"#,
            "solve",
            1,
        ),
        (
            r#"{"dims": [2], "epsilon": 1.0, "mode": "einstein"}"#,
            "solve",
            1,
        ),
        (
            r#"{"dims": [2], "epsilon": 1.0, "shoot": {"coeffs": [1, -1]}}"#,
            "einstein",
            1,
        ),
        (
            r#"{"dims": [2], "epsilon": 1.0, "integrate": {"rtol": 0}}"#,
            "solve",
            1,
        ),
        (
            r#"{"dims": [2], "epsilon": 1.0, "integrate": {"max_steps": 20}}"#,
            "solve",
            3,
        ),
    ];
    for (i, (body, cmd, expected)) in cases.iter().enumerate() {
        let name = format!("c{i}.json");
        write_config(t, &name, body);
        let out = soliton(&[cmd, &name, "--output-dir", &format!("o{i}")], t);
        assert_eq!(code(&out), *expected, "{body}: {}", stderr(&out));
        assert!(!stderr(&out).is_empty());
    }
    assert_eq!(code(&soliton(&["solve", "missing.json"], t)), 1);
    assert_eq!(code(&soliton(&["frobnicate"], t)), 1);
}

#[test]
fn large_chart_step_is_rejected_with_exit_two() {
    let tmp = TempDir::new().unwrap();
    write_config(
        tmp.path(),
        "h.json",
        r#"{"dims": [2], "epsilon": 1.0, "shoot": {"h": 0.5}}"#,
    );
    let out = soliton(&["solve", "h.json", "--output-dir", "o"], tmp.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("Q < 0"), "{}", stderr(&out));
}

#[test]
fn hyperbolic_einstein_run_matches_the_closed_form() {
    let tmp = TempDir::new().unwrap();
    write_config(
        tmp.path(),
        "hyp.json",
        r#"{"dims": [3], "epsilon": 2.0, "mode": "einstein"}"#,
    );
    let out = soliton(&["einstein", "hyp.json", "--output-dir", "o"], tmp.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let s = read_json(&tmp.path().join("o/summary.json"));
    let err = s["einstein"]["hyperbolic_error"]["value"].as_f64().unwrap();
    assert!(err <= 1e-6, "{err}");
    assert_eq!(s["success"], true);
    assert_eq!(code(&soliton(&["verify", "o"], tmp.path())), 0);
}

#[test]
fn einstein_run_with_two_factors_reaches_e_plus() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), "e.json", r#"{"dims": [2, 3], "epsilon": 1.0}"#);
    let out = soliton(&["einstein", "e.json", "--output-dir", "o"], tmp.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let s = read_json(&tmp.path().join("o/summary.json"));
    assert!(s["einstein"]["final_distance"].as_f64().unwrap() <= 1e-6);
    let series = s["einstein"]["distance_to_e_plus"].as_array().unwrap();
    assert!(series.len() > 10 && series.len() <= 402);
    let mc = &s["einstein"]["mean_curvature"];
    assert!((mc["measured"].as_f64().unwrap() - mc["target"].as_f64().unwrap()).abs() <= 1e-4);
    assert!(s.get("limits").is_none());
    assert_eq!(code(&soliton(&["verify", "o"], tmp.path())), 0);
}

#[test]
fn parallel_sweep_writes_one_directory_per_config() {
    let tmp = TempDir::new().unwrap();
    let body = |e: f64| format!(r#"{{"dims": [2], "epsilon": {e}, "integrate": {{"s_max": 30}}}}"#);
    write_config(tmp.path(), "p.json", &body(0.5));
    write_config(tmp.path(), "q.json", &body(2.0));
    let out = soliton(
        &[
            "solve",
            "p.json",
            "q.json",
            "--jobs",
            "2",
            "--output-dir",
            "sweep",
        ],
        tmp.path(),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for stem in ["p", "q"] {
        assert!(tmp
            .path()
            .join("sweep")
            .join(stem)
            .join("summary.json")
            .is_file());
    }
    let p = read_json(&tmp.path().join("sweep/p/summary.json"));
    assert_eq!(p["config"]["epsilon"], 0.5);
}

#[test]
fn output_section_selects_formats_and_directory() {
    let tmp = TempDir::new().unwrap();
    write_config(
        tmp.path(),
        "f.json",
        r#"{"dims": [2], "epsilon": 1.0, "integrate": {"s_max": 20},
            "output": {"dir": "only-json", "formats": ["json"]}}"#,
    );
    let out = soliton(&["solve", "f.json"], tmp.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let dir = tmp.path().join("only-json");
    assert!(dir.join("summary.json").is_file());
    assert!(!dir.join("trajectory.csv").exists());
}

fn portrait_rows(out: &Output) -> Vec<(f64, f64, f64, f64, String)> {
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "X1,W,dX1,dW,kind");
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let n = |k: usize| f[k].parse::<f64>().unwrap();
            (n(0), n(1), n(2), n(3), f[4].to_string())
        })
        .collect()
}

#[test]
fn portrait_samples_the_planar_flow() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), "p.json", r#"{"dims": [2, 3], "epsilon": 2.0}"#);
    let out = soliton(&["portrait", "p.json", "--grid", "6,5"], tmp.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = portrait_rows(&out);
    assert_eq!(rows.iter().filter(|r| r.4 == "grid").count(), 30);
    for r in rows.iter().filter(|r| r.4 == "grid" && r.0 == 0.0) {
        assert!(r.2 > 0.0, "{r:?}");
    }
    let null: Vec<_> = rows.iter().filter(|r| r.4 == "nullcline").collect();
    assert!(!null.is_empty());
    for r in null {
        assert!(r.3.abs() <= 1e-14 * r.1.powi(3).max(1e-300), "{r:?}");
    }
    let crit = rows.iter().find(|r| r.4 == "critical").unwrap();
    assert!((crit.0 - 2f64.sqrt() / 5.0).abs() < 1e-15);
    assert!((crit.1 - (2.0f64 / 10.0).sqrt()).abs() < 1e-15);
    assert!(crit.2.abs() < 1e-15 && crit.3.abs() < 1e-15);
}

#[test]
fn malformed_grid_flags_exit_one() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), "p.json", r#"{"dims": [2], "epsilon": 1.0}"#);
    for g in ["5", "5,x", "1,5", "5,5,5", ""] {
        let out = soliton(&["portrait", "p.json", "--grid", g], tmp.path());
        assert_eq!(code(&out), 1, "--grid {g:?}");
    }
    let out = soliton(&["portrait", "p.json", "--w0", "10"], tmp.path());
    assert_eq!(code(&out), 1);
}

#[test]
fn critical_point_catalogue() {
    let tmp = TempDir::new().unwrap();
    write_config(tmp.path(), "c.json", r#"{"dims": [2, 3], "epsilon": 2.0}"#);
    let out = soliton(&["critical-points", "c.json"], tmp.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let cat = stdout_json(&out);
    let pts = cat.as_array().unwrap();
    let find = |n: &str| pts.iter().find(|p| p["name"] == n).unwrap();
    let ep = find("e_plus");
    assert!((ep["point"]["W"].as_f64().unwrap() - 0.4472136).abs() < 1e-7);
    let origin = find("origin");
    let ev: Vec<f64> = origin["eigenvalues"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(ev, vec![-1.0, -1.0, 0.0, 0.0, 0.0]);
    assert_eq!(find("sphere_e2")["point"]["X"][1], 1.0);

    write_config(tmp.path(), "one.json", r#"{"dims": [2], "epsilon": 1.0}"#);
    let cat = stdout_json(&soliton(&["critical-points", "one.json"], tmp.path()));
    let seed = cat
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["name"] == "soliton_seed")
        .unwrap();
    let ev: Vec<f64> = seed["eigenvalues"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    for (a, b) in ev.iter().zip([-0.5, 0.5, 1.0]) {
        assert!((a - b).abs() < 1e-15, "{ev:?}");
    }
    for pair in seed["eigenvectors"].as_array().unwrap() {
        assert_eq!(pair["vector"].as_array().unwrap().len(), 3);
    }
    write_config(tmp.path(), "bad.json", r#"{"dims": [], "epsilon": 1.0}"#);
    assert_eq!(
        code(&soliton(&["critical-points", "bad.json"], tmp.path())),
        1
    );
}
