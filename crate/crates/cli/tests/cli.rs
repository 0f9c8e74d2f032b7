use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_elastica"))
        .current_dir(dir)
        .env("RUST_LOG", "error")
        .env_remove("ELASTICA_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fit_bundled_with(dir: &Path, max_iter: &str, extra: &[&str]) -> Output {
    let curves = data("curves.csv");
    let cov = data("covariates.csv");
    let mut args = vec!["fit", "--curves", path_str(&curves), "--covariates", path_str(&cov), "--max-iter", max_iter];
    args.extend_from_slice(extra);
    run(dir, &args)
}

fn fit_bundled(dir: &Path, extra: &[&str]) -> Output {
    fit_bundled_with(dir, "5", extra)
}

#[test]
fn fit_on_bundled_data_writes_model_and_report() {
    let dir = TempDir::new().unwrap();
    let out = fit_bundled(dir.path(), &["--report", "report.txt"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let model: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("model.json")).unwrap()).unwrap();
    assert_eq!(model["schema_version"], 1);
    assert_eq!(model["method"], "quotient");
    assert_eq!(model["covariate_names"], serde_json::json!(["x", "group_b"]));
    assert_eq!(model["encoding"][1]["reference"], "a");
    // 3 effects x 11 basis functions x 2 coordinates
    assert_eq!(model["coefficients"].as_array().unwrap().len(), 66);
    let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    for key in ["loss trace:", "iterations: ", "R2: ", "adjusted R2: "] {
        assert!(report.contains(key), "report lacks {key}:\n{report}");
    }
}

#[test]
fn frechet_without_at_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = fit_bundled(dir.path(), &["--method", "frechet"]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--at") && err.contains("Usage"), "{err}");
}

#[test]
fn frechet_with_at_writes_predictions() {
    let dir = TempDir::new().unwrap();
    let at = data("at.csv");
    let out = fit_bundled(dir.path(), &["--method", "frechet", "--at", path_str(&at), "--predictions", "p.csv"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert!(csv.starts_with("curve_id,t,c1,c2\n"));
    assert!(csv.contains("\ntest001,"));
}

#[test]
fn unknown_flag_and_bad_csv_exit_2() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&run(dir.path(), &["fit", "--no-such-flag"])), 2);
    fs::write(dir.path().join("bad.csv"), "id,x,y\na,0,0\na,1,1\n").unwrap();
    assert_eq!(code(&run(dir.path(), &["distance", "--curves", "bad.csv"])), 2);
    fs::write(dir.path().join("nan.csv"), "curve_id,c1,c2\na,0,0\na,oops,1\n").unwrap();
    assert_eq!(code(&run(dir.path(), &["distance", "--curves", "nan.csv"])), 2);
}

#[test]
fn collinear_covariates_exit_3() {
    let dir = TempDir::new().unwrap();
    let raw = fs::read_to_string(data("covariates.csv")).unwrap();
    let doubled: String = raw
        .lines()
        .enumerate()
        .map(|(i, l)| {
            let x = l.split(',').nth(1).unwrap();
            if i == 0 { format!("{l},x2\n") } else { format!("{l},{x}\n") }
        })
        .collect();
    fs::write(dir.path().join("cov.csv"), doubled).unwrap();
    let curves = data("curves.csv");
    let out = run(dir.path(), &["fit", "--curves", path_str(&curves), "--covariates", "cov.csv", "--max-iter", "2"]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn strict_non_convergence_exits_4() {
    let dir = TempDir::new().unwrap();
    let out = fit_bundled_with(dir.path(), "1", &["--strict"]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    // outputs are still written for inspection
    assert!(dir.path().join("model.json").exists());
    assert_eq!(code(&fit_bundled_with(dir.path(), "1", &[])), 0);
}

#[test]
fn saved_model_reproduces_fit_predictions() {
    let dir = TempDir::new().unwrap();
    let at = data("at.csv");
    let out = fit_bundled(dir.path(), &["--at", path_str(&at), "--predictions", "fit.csv"]);
    assert_eq!(code(&out), 0);
    let out = run(dir.path(), &["predict", "--model", "model.json", "--at", path_str(&at), "--out", "loaded.csv"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(dir.path().join("fit.csv")).unwrap(), fs::read(dir.path().join("loaded.csv")).unwrap());
}

#[test]
fn predict_rejects_unknown_level() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&fit_bundled(dir.path(), &[])), 0);
    fs::write(dir.path().join("at.csv"), "curve_id,x,group\nq,0,c\n").unwrap();
    let out = run(dir.path(), &["predict", "--model", "model.json", "--at", "at.csv"]);
    assert_eq!(code(&out), 2);
}

fn coefficients(path: &Path) -> Vec<f64> {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    v["coefficients"].as_array().unwrap().iter().map(|c| c.as_f64().unwrap()).collect()
}

#[test]
fn refit_on_own_predictions_reproduces_coefficients() {
    let dir = TempDir::new().unwrap();
    let cov = data("covariates.csv");
    // piecewise-constant SRV splines are reproduced exactly by polygons whose
    // vertices include the knots, so only the fit itself is probed
    let basis = ["--degree", "0", "--knots", "11"];
    let mut args = vec!["--at", path_str(&cov), "--predictions", "own.csv", "--out", "first.json"];
    args.extend_from_slice(&basis);
    assert_eq!(code(&fit_bundled(dir.path(), &args)), 0);
    let mut args =
        vec!["fit", "--curves", "own.csv", "--covariates", path_str(&cov), "--out", "second.json", "--max-iter", "5"];
    args.extend_from_slice(&basis);
    let out = run(dir.path(), &args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let (a, b) = (coefficients(&dir.path().join("first.json")), coefficients(&dir.path().join("second.json")));
    let worst = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-4, "largest coefficient change {worst}");
}

#[test]
fn distance_between_reparametrizations_is_small() {
    let dir = TempDir::new().unwrap();
    let pts = [(0.0, 0.0), (1.0, 0.5), (1.5, 2.0), (0.5, 3.0), (-0.5, 2.0)];
    let mut csv = String::from("curve_id,t,c1,c2\n");
    let even = [0.0, 0.25, 0.5, 0.75, 1.0];
    let skewed = [0.0, 0.05, 0.2, 0.6, 1.0];
    for (id, times) in [("a", even), ("b", skewed)] {
        for (t, (x, y)) in times.iter().zip(pts) {
            csv.push_str(&format!("{id},{t},{x},{y}\n"));
        }
    }
    fs::write(dir.path().join("c.csv"), csv).unwrap();
    let out = run(dir.path(), &["distance", "--curves", "c.csv", "--ids", "a", "b"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let d: f64 = text.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!(d < 5e-3, "distance {d}");
}

#[test]
fn simulate_is_deterministic_and_thread_independent() {
    let dir = TempDir::new().unwrap();
    for (sub, threads) in [("one", "1"), ("two", "3")] {
        let out = run(dir.path(), &["--threads", threads, "simulate", "--scenario", "3", "--seed", "5", "--out-dir", sub]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["train_curves.csv", "train_covariates.csv", "test_curves.csv", "test_covariates.csv"] {
        assert_eq!(fs::read(dir.path().join("one").join(f)).unwrap(), fs::read(dir.path().join("two").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn mean_writes_csv_and_svg() {
    let dir = TempDir::new().unwrap();
    let curves = data("curves.csv");
    let out = run(dir.path(), &["mean", "--curves", path_str(&curves), "--max-iter", "3", "--out", "m.csv", "--svg", "m.svg"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let svg = fs::read_to_string(dir.path().join("m.svg")).unwrap();
    assert!(svg.starts_with("<?xml") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(fs::read_to_string(dir.path().join("m.csv")).unwrap().lines().count(), 202);
}

#[test]
fn test_command_requires_a_choice() {
    let dir = TempDir::new().unwrap();
    let curves = data("curves.csv");
    assert_eq!(code(&run(dir.path(), &["test", "--curves", path_str(&curves)])), 2);
}
