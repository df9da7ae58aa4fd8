use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const HEADER: &str = "Person,Temp,LDR,Gas,PIR,Hum,Timestamp\n";

fn sensorlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sensorlab"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = sensorlab(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn report(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn generate(dir: &Path, profile: &str, size: &str, output: &str) {
    ok(dir, &["generate", "--profile", profile, "--size", size, "--seed", "5", "--output", output]);
}

#[test]
fn validate_counts_rows() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "separable", "120", "d.csv");
    assert_eq!(ok(dir.path(), &["validate", "--input", "d.csv"]).trim(), "rows: 120, errors: 0");
}

#[test]
fn validate_names_bad_row_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "{HEADER}Alex,26,100,0.1,No,50,2018-09-13 10:00:00\nAlex,26,abc,0.1,No,50,2018-09-13 10:00:04\n"
    );
    std::fs::write(dir.path().join("bad.csv"), text).unwrap();
    let out = sensorlab(dir.path(), &["validate", "--input", "bad.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("row 2") && err.contains("LDR"), "{err}");
}

#[test]
fn validate_empty_and_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("empty.csv"), HEADER).unwrap();
    let out = sensorlab(dir.path(), &["validate", "--input", "empty.csv"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stderr(&out).contains("no data rows"));

    let out = sensorlab(dir.path(), &["validate", "--input", "nope.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_classifier_lists_choices() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "separable", "60", "d.csv");
    let out = sensorlab(dir.path(), &["evaluate", "--input", "d.csv", "--classifier", "svm", "--output-dir", "o"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    for name in ["dt", "rf", "gb", "knn", "nb", "lr"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn evaluate_report_shape_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "separable", "200", "d.csv");
    for out in ["a", "b"] {
        ok(dir.path(), &["evaluate", "--input", "d.csv", "--classifier", "rf", "--n-trees", "15", "--seed", "9", "--output-dir", out]);
    }
    let a = std::fs::read(dir.path().join("a/evaluate.json")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b/evaluate.json")).unwrap());
    assert_eq!(
        std::fs::read(dir.path().join("a/evaluate.config.toml")).unwrap(),
        std::fs::read(dir.path().join("b/evaluate.config.toml")).unwrap()
    );

    let r = report(dir.path().join("a/evaluate.json"));
    assert_eq!(r["command"], "evaluate");
    assert_eq!(r["seed"], 9);
    assert_eq!(r["input_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(r["per_fold"].as_array().unwrap().len(), 5);
    assert_eq!(r["hyperparameters"]["forest"]["n_trees"], 15);
    let f1 = r["macro_f1"]["mean"].as_f64().unwrap();
    assert!(f1 > 0.8 && f1 <= 1.0);
}

#[test]
fn config_file_supplies_settings_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "separable", "100", "d.csv");
    std::fs::write(dir.path().join("run.toml"), "input = \"d.csv\"\nclassifier = \"nb\"\nfolds = 4\n").unwrap();
    ok(dir.path(), &["--config", "run.toml", "evaluate", "--output-dir", "o"]);
    let r = report(dir.path().join("o/evaluate.json"));
    assert_eq!((r["classifier"].as_str(), r["folds"].as_u64()), (Some("nb"), Some(4)));

    ok(dir.path(), &["--config", "run.toml", "evaluate", "--classifier", "knn", "--output-dir", "o"]);
    assert_eq!(report(dir.path().join("o/evaluate.json"))["classifier"], "knn");
    let echo = std::fs::read_to_string(dir.path().join("o/evaluate.config.toml")).unwrap();
    assert!(echo.contains("classifier = \"knn\""), "{echo}");

    std::fs::write(dir.path().join("typo.toml"), "clasifier = \"nb\"\n").unwrap();
    let out = sensorlab(dir.path(), &["--config", "typo.toml", "evaluate", "--input", "d.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn importance_needs_a_tree_model() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "separable", "120", "d.csv");
    ok(dir.path(), &["importance", "--input", "d.csv", "--model", "dt", "--output-dir", "o"]);
    let r = report(dir.path().join("o/importance.json"));
    assert_eq!(r["importances"][0]["feature"], "LDR");
    assert!((r["total"].as_f64().unwrap() - 1.0).abs() < 1e-9);

    let out = sensorlab(dir.path(), &["importance", "--input", "d.csv", "--model", "knn", "--output-dir", "o"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn predict_time_reports_person() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "schedule", "600", "s.csv");
    let person = ok(
        dir.path(),
        &["predict-time", "--input", "s.csv", "--query", "2018-09-13 08:00:10", "--output-dir", "o"],
    );
    assert_eq!(person.trim(), "Alex");
    let r = report(dir.path().join("o/predict_time.json"));
    assert_eq!(r["predicted_person"], "Alex");
    assert_eq!(r["query_epoch_seconds"].as_f64(), Some(1536825610.0));
    assert!(r["holdout_accuracy"].as_f64().unwrap() >= 0.9);

    let out = sensorlab(
        dir.path(),
        &["predict-time", "--input", "s.csv", "--query", "1969-12-31 23:59:59", "--output-dir", "o"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("epoch"));
}

#[test]
fn zero_noise_forecast_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["generate", "--profile", "var_system", "--size", "300", "--noise-scale", "0", "--output", "v.csv"],
    );
    ok(dir.path(), &["forecast", "--input", "v.csv", "--order", "2", "--n-test", "5", "--output-dir", "o"]);
    let r = report(dir.path().join("o/forecast.json"));
    for (series, rmse) in r["rmse"].as_object().unwrap() {
        assert!(rmse.as_f64().unwrap() < 1e-8, "{series}: {rmse}");
    }
    let table = std::fs::read_to_string(dir.path().join("o/forecast.csv")).unwrap();
    assert_eq!(table.lines().next(), Some("step_index,series,actual,predicted"));
    assert_eq!(table.lines().count(), 1 + 5 * 4);
}

#[test]
fn forecast_with_selection_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "var_system", "800", "v.csv");
    let truth: Value = report(dir.path().join("v.truth.json"));
    assert_eq!(truth["order"], 2);
    ok(dir.path(), &["forecast", "--input", "v.csv", "--select", "4", "--output-dir", "o"]);
    let r = report(dir.path().join("o/forecast.json"));
    assert_eq!(r["lag_selection"]["candidates"].as_array().unwrap().len(), 4);
    assert_eq!(r["order"], r["lag_selection"]["chosen"]);
    assert_eq!(r["granger"]["result"].as_array().unwrap().len(), 12);
    assert!(r["adf"]["Temp"]["result"]["statistic"].is_f64());
}

#[test]
fn forecast_rejects_short_series() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "var_system", "12", "v.csv");
    let out = sensorlab(dir.path(), &["forecast", "--input", "v.csv", "--order", "3", "--output-dir", "o"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("need at least"), "{}", stderr(&out));
}

#[test]
fn generate_rejects_unstable_system() {
    let dir = tempfile::tempdir().unwrap();
    let system = r#"{"coefficients": [[[1.1,0,0,0],[0,0.5,0,0],[0,0,0.5,0],[0,0,0,0.5]]],
        "mean": [26, 50, 300, 5], "noise_sigma": [0.1, 0.1, 0.1, 0.1]}"#;
    std::fs::write(dir.path().join("sys.json"), system).unwrap();
    let out = sensorlab(
        dir.path(),
        &["generate", "--profile", "var_system", "--system", "sys.json", "--output", "v.csv"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("v.csv").exists());
}

#[test]
fn simulate_accounts_for_detections() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = HEADER.to_string();
    for i in 0..50 {
        let person = if i % 10 < 3 { "Blake" } else { "No person" };
        let ldr = if i == 7 { 5000.0 } else { 300.0 };
        text += &format!("{person},26,{ldr},0.1,No,50,2018-09-13 10:{:02}:{:02}\n", i * 4 / 60, i * 4 % 60);
    }
    std::fs::write(dir.path().join("s.csv"), text).unwrap();
    std::fs::write(
        dir.path().join("t.json"),
        r#"{"LDR": {"low": 0, "high": 1000, "provenance": "manual"}}"#,
    )
    .unwrap();
    ok(dir.path(), &["simulate", "--input", "s.csv", "--thresholds", "t.json", "--output-dir", "o"]);
    let r = report(dir.path().join("o/simulate.json"));
    let stats = &r["stats"];
    assert_eq!(stats["reduction_ratio"].as_f64(), Some(0.7));
    assert_eq!(stats["alert_count"], 1);
    let size = |f: &str| std::fs::metadata(dir.path().join("o").join(f)).unwrap().len();
    assert_eq!(stats["bytes_local"].as_u64(), Some(size("local.csv")));
    assert_eq!(stats["bytes_cloud"].as_u64(), Some(size("cloud.csv")));
    let cloud = std::fs::read_to_string(dir.path().join("o/cloud.csv")).unwrap();
    assert_eq!(cloud.lines().count(), 1 + 15);
    assert!(cloud.lines().skip(1).all(|l| l.starts_with("Blake,")));
    let alerts = std::fs::read_to_string(dir.path().join("o/alerts.jsonl")).unwrap();
    let alert: Value = serde_json::from_str(alerts.lines().next().unwrap()).unwrap();
    assert_eq!((alert["sensor"].as_str(), alert["side"].as_str()), (Some("LDR"), Some("high")));
}

#[test]
fn simulate_rejects_conflicting_threshold_sources() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), "schedule", "60", "s.csv");
    std::fs::write(dir.path().join("t.json"), "{}").unwrap();
    let out = sensorlab(dir.path(), &["simulate", "--input", "s.csv", "--thresholds", "t.json", "--derive"]);
    assert_eq!(out.status.code(), Some(2));
}
