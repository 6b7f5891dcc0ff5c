use std::fs;
use std::path::Path;

use mmv_demix::cli::{main_with_args, EXIT_CONFIG, EXIT_IO, EXIT_OK};
use serde_json::{json, Value};
use tempfile::TempDir;

fn run(args: &[&str]) -> i32 {
    let mut full = vec!["mmv-demix"];
    full.extend_from_slice(args);
    main_with_args(full)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write_config(dir: &Path, name: &str, value: &Value) -> String {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn synth_then_demix_recovers_the_three_tone_instance() {
    let dir = TempDir::new().unwrap();
    let synth_out = dir.path().join("synth");
    assert_eq!(
        run(&["synth", "--seed", "3", "--out", synth_out.to_str().unwrap()]),
        EXIT_OK
    );
    let instance = read_json(&synth_out.join("instance.json"));
    assert_eq!(instance["n_sensors"], 50);
    assert_eq!(instance["seed"], 3);

    let cfg = json!({
        "command": "demix",
        "instance": { "path": synth_out.join("instance.json") },
    });
    let cfg_path = write_config(dir.path(), "demix.json", &cfg);
    let out = dir.path().join("demix");
    assert_eq!(
        run(&[
            "demix",
            "--config",
            &cfg_path,
            "--out",
            out.to_str().unwrap()
        ]),
        EXIT_OK
    );
    let report = read_json(&out.join("report.json"));
    let freqs: Vec<f64> = serde_json::from_value(report["estimated_frequencies"].clone()).unwrap();
    assert!(
        mmv_demix::dual_analysis::success(&freqs, &[0.1, 0.4, 0.8]),
        "{freqs:?}"
    );
    assert_eq!(
        report["estimated_outlier_rows"].as_array().unwrap().len(),
        15
    );

    let rows = fs::read_to_string(out.join("row_norms.csv")).unwrap();
    assert!(rows.starts_with("row,gamma_row_norm,lambda\n"));
    assert_eq!(rows.lines().count(), 51);
    let trace = fs::read_to_string(out.join("dual_polynomial.csv")).unwrap();
    assert!(trace.starts_with("f,q_norm\n"));
    let diag = fs::read_to_string(out.join("solver_trace.csv")).unwrap();
    assert!(diag.starts_with("iteration,objective,primal_residual,dual_residual\n"));
}

#[test]
fn demix_outputs_are_byte_identical_across_runs() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        assert_eq!(
            run(&["demix", "--seed", "1", "--out", out.to_str().unwrap()]),
            EXIT_OK
        );
    }
    for name in [
        "report.json",
        "dual_polynomial.csv",
        "row_norms.csv",
        "solver_trace.csv",
    ] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn zero_instance_reports_nothing() {
    let dir = TempDir::new().unwrap();
    let n = 12;
    let instance = json!({
        "n_sensors": n,
        "n_snapshots": 2,
        "frequencies": [],
        "amplitudes_re": [],
        "amplitudes_im": [],
        "outliers_re": vec![0.0; 2 * n],
        "outliers_im": vec![0.0; 2 * n],
    });
    let inst_path = write_config(dir.path(), "zero.json", &instance);
    let cfg_path = write_config(
        dir.path(),
        "cfg.json",
        &json!({ "instance": { "path": inst_path } }),
    );
    let out = dir.path().join("out");
    assert_eq!(
        run(&[
            "demix",
            "--config",
            &cfg_path,
            "--out",
            out.to_str().unwrap()
        ]),
        EXIT_OK
    );
    let report = read_json(&out.join("report.json"));
    assert!(report["estimated_frequencies"]
        .as_array()
        .unwrap()
        .is_empty());
    assert!(report["estimated_outlier_rows"]
        .as_array()
        .unwrap()
        .is_empty());
}

#[test]
fn explicit_lambda_reaches_the_report() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    assert_eq!(
        run(&["demix", "--lambda", "0.2", "--out", out.to_str().unwrap()]),
        EXIT_OK
    );
    assert_eq!(read_json(&out.join("report.json"))["lambda"], 0.2);
    assert_eq!(
        run(&["demix", "--lambda", "auto", "--out", out.to_str().unwrap()]),
        EXIT_OK
    );
    let auto = read_json(&out.join("report.json"))["lambda"]
        .as_f64()
        .unwrap();
    assert!((auto - 1.0 / 50f64.sqrt()).abs() < 1e-15);
}

fn small_sweep(dir: &Path) -> String {
    let cfg = json!({
        "phase_transition": {
            "n_sensors": 16,
            "f1": 0.2,
            "delta_start": 1.0,
            "delta_step": 1.0,
            "delta_stop": 2.0,
            "snapshots": [2],
            "trials": 2,
            "total_outliers": 2,
        }
    });
    write_config(dir, "sweep.json", &cfg)
}

#[test]
fn phase_transition_is_reproducible_and_auditable() {
    let dir = TempDir::new().unwrap();
    let cfg = small_sweep(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, threads) in [(&a, "1"), (&b, "2")] {
        let code = run(&[
            "phase-transition",
            "--config",
            &cfg,
            "--trials",
            "1",
            "--seed",
            "17",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, EXIT_OK);
    }
    let rates = fs::read_to_string(a.join("success_rates.csv")).unwrap();
    assert_eq!(
        rates,
        fs::read_to_string(b.join("success_rates.csv")).unwrap()
    );
    let audit = fs::read_to_string(a.join("trials.csv")).unwrap();
    assert_eq!(audit, fs::read_to_string(b.join("trials.csv")).unwrap());

    let mut lines = rates.lines();
    assert_eq!(lines.next(), Some("L,delta_times_N,success_rate"));
    let cells: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(cells.len(), 2);
    let mut audit_lines = audit.lines();
    assert_eq!(audit_lines.next(), Some("seed,delta,L,success"));
    let flags: Vec<Vec<String>> = audit_lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(flags.len(), 2);
    for (cell, flag) in cells.iter().zip(&flags) {
        let delta: f64 = flag[1].parse().unwrap();
        let delta_n: f64 = cell[1].parse().unwrap();
        assert!((delta * 16.0 - delta_n).abs() < 1e-12);
        assert_eq!(
            cell[2].parse::<f64>().unwrap(),
            flag[3].parse::<f64>().unwrap()
        );
    }
}

#[test]
fn certificate_command_writes_margins_and_summary() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("cert");
    assert_eq!(
        run(&[
            "certificate",
            "--seed",
            "4",
            "--trials",
            "3",
            "--out",
            out.to_str().unwrap()
        ]),
        EXIT_OK
    );
    let report = read_json(&out.join("certificate.json"));
    for field in [
        "interpolation_residual",
        "offgrid_max",
        "near_curvature_max",
        "outlier_row_margin",
        "condition_number_D",
    ] {
        assert!(report[field].is_number(), "{field}");
    }
    let summary = read_json(&out.join("certificate_summary.json"));
    assert_eq!(summary["runs"], 3);
    assert_eq!(summary["reports"][0]["seed"], 4);
    let trace = fs::read_to_string(out.join("certificate_trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), (1 << 14) + 1);

    let cfg = write_config(
        dir.path(),
        "clean.json",
        &json!({ "certificate": { "n_outliers": 0 } }),
    );
    let clean = dir.path().join("clean");
    assert_eq!(
        run(&[
            "certificate",
            "--config",
            &cfg,
            "--out",
            clean.to_str().unwrap()
        ]),
        EXIT_OK
    );
    let residual = read_json(&clean.join("certificate.json"))["interpolation_residual"]
        .as_f64()
        .unwrap();
    assert!(residual <= 1e-8);
}

#[test]
fn exit_codes_follow_the_failure_kind() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x");
    let out = out.to_str().unwrap();
    assert_eq!(run(&["demix", "--lambda=-1", "--out", out]), EXIT_CONFIG);
    assert_eq!(run(&["frobnicate"]), EXIT_CONFIG);

    let mismatch = write_config(dir.path(), "m.json", &json!({ "command": "synth" }));
    assert_eq!(
        run(&["demix", "--config", &mismatch, "--out", out]),
        EXIT_CONFIG
    );

    let bad_sweep = write_config(
        dir.path(),
        "s.json",
        &json!({ "phase_transition": { "delta_start": 1.5, "delta_stop": 0.1 } }),
    );
    assert_eq!(
        run(&["phase-transition", "--config", &bad_sweep, "--out", out]),
        EXIT_CONFIG
    );
    assert_eq!(
        run(&["phase-transition", "--trials", "0", "--out", out]),
        EXIT_CONFIG
    );

    let missing = dir.path().join("missing.json");
    assert_eq!(
        run(&["demix", "--config", missing.to_str().unwrap()]),
        EXIT_IO
    );

    let blocker = dir.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let nested = blocker.join("out");
    assert_eq!(run(&["synth", "--out", nested.to_str().unwrap()]), EXIT_IO);
}
