use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dirac-edge"))
        .args(args)
        .env("DIRAC_EDGE_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json_of(args: &[&str]) -> Value {
    serde_json::from_str(&ok(args)).unwrap()
}

/// `(k2, E_g)` per CSV row of a dispersion table.
fn gap_column(csv: &str) -> Vec<(f64, Option<f64>)> {
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("k2,E_b_plus,E_b_minus,E_g,branch_id"));
    lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(f.len(), 5);
            (f[0].parse().unwrap(), (!f[3].is_empty()).then(|| f[3].parse().unwrap()))
        })
        .collect()
}

#[test]
fn dispersion_at_unit_zeta_is_the_diagonal() {
    let rows = gap_column(&ok(&["dispersion", "--m", "1", "--zeta", "1", "--k-range", "-3:3", "--n", "257"]));
    assert_eq!(rows.len(), 257);
    for (k, e) in rows {
        if k.abs() < 1.0 {
            assert!((e.unwrap() - k).abs() < 1e-15);
        }
    }
}

#[test]
fn dispersion_at_zero_zeta_is_flat_on_the_left() {
    for (k, e) in gap_column(&ok(&["dispersion", "--m", "1", "--zeta", "0"])) {
        if k < 0.0 {
            assert_eq!(e, Some(1.0));
        } else {
            assert_eq!(e, None);
        }
    }
}

#[test]
fn dispersion_at_infinite_zeta_has_no_gap_column() {
    let rows = gap_column(&ok(&["dispersion", "--m", "1", "--zeta", "inf"]));
    assert!(!rows.is_empty());
    assert!(rows.iter().all(|(_, e)| e.is_none()));
}

#[test]
fn numeric_dispersion_follows_the_closed_form() {
    let rows = gap_column(&ok(&[
        "dispersion", "--m", "1", "--zeta", "0.5", "--source", "shooting", "--k-range", "-1:0.4", "--n", "15",
    ]));
    for (k, e) in rows {
        let exact = (k + 0.75) / 1.25;
        if exact < 0.95 {
            assert!((e.unwrap() - exact).abs() < 1e-7);
        }
    }
}

#[test]
fn conductivity_examples() {
    for (m, z, sigma, bulk) in [("1", "1", 1, 0.5), ("-1", "1", 0, -0.5), ("-1", "-1", -1, -0.5)] {
        let v = json_of(&["conductivity", "--m", m, "--zeta", z]);
        assert_eq!(v["sigma_e"], sigma, "m={m} ζ={z}");
        assert_eq!(v["flow"], sigma);
        assert_eq!(v["sigma_bulk"], bulk);
        assert_eq!(v["agree"], true);
        assert_eq!(v["methods"].as_array().unwrap().len(), 4);
    }
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let args = ["dispersion", "--m", "-1", "--zeta", "-2", "--source", "shooting", "--n", "33"];
    assert_eq!(ok(&args), ok(&args));
    let args = ["perturb-scan", "--seed", "5", "--count", "3", "--n", "65"];
    assert_eq!(ok(&args), ok(&args));
}

#[test]
fn json_keys_are_sorted() {
    let text = ok(&["flow", "--m", "1", "--zeta", "0.5"]);
    let keys: Vec<&str> = text
        .lines()
        .filter(|l| l.starts_with("  \"") )
        .map(|l| l.trim().split('"').nth(1).unwrap())
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
}

#[test]
fn files_and_config_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let out = dir.path().join("flow.json");
    std::fs::write(&cfg, r#"{"m": -1, "zeta": "inf", "k-range": [-2, 2]}"#).unwrap();
    let stdout = ok(&[
        "flow", "--m", "1", "--zeta", "2", "--config", cfg.to_str().unwrap(), "-o", out.to_str().unwrap(),
    ]);
    assert!(stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["flow"], 0);
    assert_eq!(v["k_range"], serde_json::json!([-2.0, 2.0]));
}

#[test]
fn perturbation_from_config_keeps_the_flow() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("w.json");
    std::fs::write(
        &cfg,
        r#"{"source": "shooting", "perturbation": {"V": {"kind": "gaussian", "amplitude": 0.4, "center": 1.0, "width": 0.5}}}"#,
    )
    .unwrap();
    let v = json_of(&["flow", "--m", "1", "--zeta", "0.5", "--config", cfg.to_str().unwrap()]);
    assert_eq!(v["flow"], 1);
    assert!(v["sigma_e_analytic"].is_null());
}

#[test]
fn gapstate_sources_agree() {
    let dir = tempfile::tempdir().unwrap();
    let mut energies = Vec::new();
    for source in ["analytic", "shooting", "discrete"] {
        let summary = dir.path().join(format!("{source}.json"));
        let csv = ok(&[
            "gapstate", "--m", "1", "--zeta", "0.5", "--k2", "0.2", "--source", source,
            "--summary", summary.to_str().unwrap(),
        ]);
        assert!(csv.starts_with("state,x1,v_re,v_im,w_re,w_im,density\n"));
        let v: Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
        let s = &v["states"][0];
        assert!(s["boundary_residual"].as_f64().unwrap() < 1e-9);
        energies.push(s["energy"].as_f64().unwrap());
    }
    assert!((energies[1] - 0.76).abs() < 1e-9);
    assert!((energies[2] - 0.76).abs() < 7e-3);
}

#[test]
fn perturb_scan_keeps_unit_flow() {
    let v = json_of(&["perturb-scan", "--m", "1", "--zeta", "0.5", "--seed", "7", "--count", "10"]);
    assert_eq!(v["holds"], true);
    let entries = v["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 10);
    assert!(entries.iter().all(|e| e["flow"] == 1 && e["norm"].as_f64().unwrap() <= 0.8 + 1e-12));
}

#[test]
fn bloch_without_perturbation_folds_the_fibers() {
    let dir = tempfile::tempdir().unwrap();
    let summary = dir.path().join("bloch.json");
    let csv = ok(&[
        "bloch", "--m", "1", "--zeta", "1", "--theta-samples", "8", "--summary", summary.to_str().unwrap(),
    ]);
    assert!(csv.lines().count() > 8);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(Path::new(&summary)).unwrap()).unwrap();
    assert_eq!(v["folding_passed"], true);
    assert_eq!(v["flow"], 1);
}

#[test]
fn selftest_reports_each_criterion() {
    let text = ok(&["selftest", "--criteria", "1,4"]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines.iter().all(|l| l.starts_with("[PASS]")));
}

#[test]
fn exit_codes_separate_usage_from_check_failures() {
    assert_eq!(run(&["flow", "--m", "0"]).status.code(), Some(1));
    assert_eq!(run(&["flow", "--zeta", "nan"]).status.code(), Some(1));
    assert_eq!(run(&["flow", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(run(&["conductivity", "--window", "-2:2"]).status.code(), Some(1));
    assert_eq!(run(&["selftest", "--criteria", "42"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    // a range that misses the crossing cannot reproduce the closed-form flow
    let out = run(&["flow", "--m", "1", "--zeta", "0.5", "--k-range", "-0.1:0.1"]);
    assert_eq!(out.status.code(), Some(2));
}
