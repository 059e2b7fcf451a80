use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn heatlab(kind: &str, config: &Value, dir: &Path, extra: &[&str]) -> Output {
    let path = dir.join("config.json");
    fs::write(&path, config.to_string()).unwrap();
    Command::new(env!("CARGO_BIN_EXE_heatlab"))
        .arg(kind)
        .arg("--config")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

fn base(initial: Value, experiment: Value) -> Value {
    json!({
        "params": {"n": 5, "p": 3},
        "grid": {"r_max": 20, "nodes": 200},
        "solver": {"t_end": 1.0},
        "initial": initial,
        "experiment": experiment,
    })
}

fn gaussian(amplitude: f64, width: f64) -> Value {
    json!({"kind": "gaussian", "amplitude": amplitude, "width": width})
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out/manifest.json")).unwrap()).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join("out").join(name)).unwrap()
}

fn plot_rows(dir: &Path, series: &str) -> Vec<(f64, f64)> {
    read(dir, "plot.csv")
        .lines()
        .skip(1)
        .filter_map(|l| {
            let mut it = l.split(',');
            (it.next() == Some(series)).then(|| {
                let x = it.next().unwrap().parse().unwrap();
                let y = it.next().unwrap().parse().unwrap();
                (x, y)
            })
        })
        .collect()
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn zero_data_solve_is_all_pass() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = base(gaussian(0.0, 1.0), json!({"kind": "solve"}));
    config["solver"]["checkpoints"] = json!([0.5]);
    let out = heatlab("solve", &config, dir.path(), &[]);
    assert_success(&out);
    let m = manifest(dir.path());
    assert_eq!(m["all_pass"], json!(true));
    let names: Vec<&str> = m["invariants"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| i["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["positivity", "sign_symmetry"]);
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
    let series = read(dir.path(), "series.csv");
    assert!(series.starts_with("t,sup_norm,weighted_sup,dt\n"));
    assert!(series
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap() == 0.0));
    assert!(read(dir.path(), "checkpoint_000.csv").starts_with("r,u\n"));
    assert!(read(dir.path(), "plot.csv").starts_with("series,x,y\n"));
}

#[test]
fn decaying_solve_plots_monotone_times() {
    let dir = tempfile::tempdir().unwrap();
    let config = base(gaussian(0.3, 1.5), json!({"kind": "solve"}));
    assert_success(&heatlab("solve", &config, dir.path(), &[]));
    let rows = plot_rows(dir.path(), "sup_norm");
    assert!(rows.len() > 10);
    assert!(rows.windows(2).all(|w| w[1].0 > w[0].0));
    assert_eq!(
        manifest(dir.path())["reports"]["status"]["kind"],
        json!("reached_horizon")
    );
}

#[test]
fn missing_exponent_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = base(gaussian(0.1, 1.0), json!({"kind": "solve"}));
    config["params"].as_object_mut().unwrap().remove("p");
    let out = heatlab("solve", &config, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("params.p"));
    assert!(!dir.path().join("out/manifest.json").exists());
}

#[test]
fn subcommand_must_match_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = base(gaussian(0.1, 1.0), json!({"kind": "energy"}));
    let out = heatlab("solve", &config, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("experiment.kind"));
}

#[test]
fn command_line_overrides_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = base(gaussian(0.1, 1.0), json!({"kind": "solve"}));
    config["solver"]["checkpoints"] = json!([0.1]);
    assert_success(&heatlab(
        "solve",
        &config,
        dir.path(),
        &["--nodes", "50", "--rmax", "10", "--tend", "0.2"],
    ));
    assert_eq!(read(dir.path(), "checkpoint_000.csv").lines().count(), 52);
    let last = read(dir.path(), "series.csv").lines().last().unwrap().to_string();
    assert_eq!(last.split(',').next().unwrap().parse::<f64>().unwrap(), 0.2);
}

#[test]
fn failed_invariant_sets_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = base(
        gaussian(0.3, 1.5),
        json!({"kind": "picard", "k_max": 20, "compare_tol": 1e-12, "picard": {"budget": false}}),
    );
    let out = heatlab("picard", &config, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let m = manifest(dir.path());
    assert_eq!(m["all_pass"], json!(false));
    assert!(read(dir.path(), "budget.csv").starts_with("t,budget_r,budget_inf,cauchy_diff\n"));
}

#[test]
fn picard_agrees_with_the_solver() {
    let dir = tempfile::tempdir().unwrap();
    let config = base(gaussian(0.3, 1.5), json!({"kind": "picard"}));
    assert_success(&heatlab("picard", &config, dir.path(), &["--jobs", "2"]));
    let m = manifest(dir.path());
    assert_eq!(m["reports"]["status"], json!("converged"));
    assert_eq!(read(dir.path(), "budget.csv").lines().count(), 1 + 3);
}

#[test]
fn morrey_artifacts_are_reproducible() {
    let runs: Vec<_> = (0..2)
        .map(|_| {
            let dir = tempfile::tempdir().unwrap();
            let mut config = base(
                json!({"kind": "indicator", "radius": 1.0}),
                json!({"kind": "morrey", "lambda": 1.0}),
            );
            config["seed"] = json!(7);
            assert_success(&heatlab("morrey", &config, dir.path(), &[]));
            dir
        })
        .collect();
    for name in ["morrey.json", "cells.csv", "plot.csv"] {
        assert_eq!(read(runs[0].path(), name), read(runs[1].path(), name), "{name}");
    }
    let m: Value = serde_json::from_str(&read(runs[0].path(), "morrey.json")).unwrap();
    let omega5 = 8.0 * std::f64::consts::PI.powi(2) / 15.0;
    assert!((m["value"].as_f64().unwrap() / omega5.sqrt() - 1.0).abs() < 0.02);
    assert!(read(runs[0].path(), "cells.csv").starts_with("a,R,value\n"));
    assert_eq!(
        manifest(runs[0].path())["config_hash"],
        manifest(runs[1].path())["config_hash"]
    );
}

#[test]
fn smoothing_contracts() {
    let dir = tempfile::tempdir().unwrap();
    let config = base(gaussian(1.0, 2.0), json!({"kind": "smoothing", "count": 6}));
    assert_success(&heatlab("smoothing", &config, dir.path(), &[]));
    assert!(read(dir.path(), "smoothing.csv").starts_with("t,ratio,contraction\n"));
    assert_eq!(plot_rows(dir.path(), "contraction").len(), 6);
}

#[test]
fn energy_decreases_on_a_small_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = base(
        gaussian(0.1, 4.0),
        json!({"kind": "energy", "times": [1.0], "count": 101}),
    );
    config["grid"] = json!({"r_max": 30, "nodes": 300});
    assert_success(&heatlab("energy", &config, dir.path(), &[]));
    assert!(read(dir.path(), "energy_T1.csv").starts_with("s,E,m,residual_identity\n"));
    let e = plot_rows(dir.path(), "E[T=1]");
    assert_eq!(e.len(), 101);
    assert!(e.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-6 * (1.0 + w[0].1.abs())));
}

#[test]
fn dependence_ratios_start_at_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = base(
        gaussian(0.5, 2.0),
        json!({"kind": "dependence", "t0": 1.0, "perturbations": [1e-2, 1e-3]}),
    );
    config["solver"]["checkpoints"] = json!([0.1, 0.5, 1.0]);
    assert_success(&heatlab("dependence", &config, dir.path(), &[]));
    let csv = read(dir.path(), "dependence.csv");
    assert!(csv.starts_with("delta,t,ratio\n"));
    assert_eq!(csv.lines().count(), 1 + 2 * 4);
}

#[test]
fn hypotheses_report_only() {
    let dir = tempfile::tempdir().unwrap();
    let config = base(gaussian(1.0, 1.0), json!({"kind": "hypotheses"}));
    assert_success(&heatlab("hypotheses", &config, dir.path(), &[]));
    let m = manifest(dir.path());
    assert!(m["invariants"].as_array().unwrap().is_empty());
    assert_eq!(m["reports"]["pointwise_tail_decay"]["satisfied"], json!(true));
    let h: Value = serde_json::from_str(&read(dir.path(), "hypotheses.json")).unwrap();
    assert!(h["kernel_trend"].as_array().unwrap().len() > 2);
}

#[test]
fn threshold_bundle_for_a_gaussian_ray() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = base(
        gaussian(1.0, 2.0),
        json!({"kind": "threshold", "rel_tol": 5e-3, "deltas": [0.1]}),
    );
    config["grid"] = json!({"r_max": 40, "nodes": 400});
    config["solver"]["t_end"] = json!(200.0);
    assert_success(&heatlab("threshold", &config, dir.path(), &[]));
    let t: Value = serde_json::from_str(&read(dir.path(), "threshold.json")).unwrap();
    for key in [
        "lambda_lo",
        "lambda_hi",
        "rel_width",
        "trials",
        "morrey_series_lo",
        "morrey_series_hi",
    ] {
        assert!(t.get(key).is_some(), "{key}");
    }
    let (lo, hi) = (t["lambda_lo"].as_f64().unwrap(), t["lambda_hi"].as_f64().unwrap());
    assert!(lo < 2.125 && hi > 2.115 && (hi - lo) / lo < 5e-3, "{lo} {hi}");
    assert!(t["trials"].as_array().unwrap().iter().any(|x| x["T_est"].is_number()));
    assert!(read(dir.path(), "morrey_lo.csv").starts_with("t,morrey\n"));
    assert!(read(dir.path(), "morrey_hi.csv").starts_with("t,morrey\n"));
    assert_eq!(manifest(dir.path())["all_pass"], json!(true));
}
