use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_flexauction"))
}

fn scenario(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
        .display()
        .to_string()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad JSON ({e}): {}\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect()
}

#[test]
fn worked_example_default_rule() {
    let out = run(&["run", &scenario("worked_example.json")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["xi"], serde_json::json!([1, 1, 1]));
    assert_eq!(v["g"], serde_json::json!([0, 2]));
    assert_eq!(floats(&v["t"]), vec![11.5, 6.5, 6.5]);
    assert_eq!(v["seller_profit"].as_f64(), Some(18.5));
    assert_eq!(v["virtual_surplus"].as_f64(), Some(13.5));
    assert!(v.get("trace").is_none());
}

#[test]
fn worked_example_per_class_rule() {
    let out = run(&[
        "run",
        &scenario("worked_example.json"),
        "--rule",
        "per-class",
        "--explain",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["g"], serde_json::json!([0, 2]));
    assert_eq!(floats(&v["t"]), vec![12.5, 6.5, 6.5]);
    assert_eq!(v["seller_profit"].as_f64(), Some(19.5));
    assert_eq!(v["virtual_surplus"].as_f64(), Some(13.5));
    assert_eq!(v["trace"]["served"], serde_json::json!([0, 1, 2]));
}

#[test]
fn empty_scenario_is_a_zero_outcome() {
    let out = run(&["run", &scenario("empty.json")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["xi"], serde_json::json!([]));
    assert_eq!(v["seller_profit"].as_f64(), Some(0.0));
}

fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path.display().to_string()
}

#[test]
fn input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let worked = std::fs::read_to_string(scenario("worked_example.json")).unwrap();
    let increasing = worked.replace("5.0,\n    3.0", "3.0,\n    5.0");
    assert_ne!(increasing, worked);
    let bad_prices = write(&dir, "prices.json", &increasing);
    assert_eq!(run(&["run", &bad_prices]).status.code(), Some(2));

    // consumer 0's true level is 1; claiming 2 overstates its flexibility
    let reports = write(
        &dir,
        "reports.json",
        r#"{"r": [15.0, 8.0, 6.75], "c": [2, 2, 2]}"#,
    );
    let out = run(&[
        "run",
        &scenario("worked_example.json"),
        "--reports",
        &reports,
    ]);
    assert_eq!(out.status.code(), Some(2));

    let under = write(
        &dir,
        "under.json",
        r#"{"r": [9.0, 8.0, 6.75], "c": [1, 1, 2]}"#,
    );
    let out = run(&["run", &scenario("worked_example.json"), "--reports", &under]);
    assert_eq!(out.status.code(), Some(0));

    let garbage = write(&dir, "garbage.json", r#"{"k": 1, "m": [1]}"#);
    assert_eq!(run(&["run", &garbage]).status.code(), Some(2));
    assert_eq!(
        run(&["run", "/nonexistent/scenario.json"]).status.code(),
        Some(2)
    );
    // no true types to run on
    assert_eq!(
        run(&["run", &scenario("two_level.json")]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["oracle-compare", "--max-n", "13"]).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&[
            "verify",
            &scenario("two_level.json"),
            "--suite",
            "bic",
            "--consumer",
            "9"
        ])
        .status
        .code(),
        Some(2)
    );
    let out = bin()
        .args(["oracle-compare", "--instances", "1"])
        .env("AUCTION_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oracle_compare_passes_and_ties_do_not_matter() {
    for extra in [&[][..], &["--invert-ties"][..], &["--fixed-supply"][..]] {
        let mut args = vec!["oracle-compare", "--instances", "1500", "--seed", "3"];
        args.extend_from_slice(extra);
        let out = run(&args);
        assert_eq!(out.status.code(), Some(0), "{extra:?}");
        assert_eq!(json(&out)["mismatches"].as_u64(), Some(0));
    }
}

#[test]
fn oracle_compare_reports_per_class_shortfall() {
    let out = run(&[
        "oracle-compare",
        "--instances",
        "1500",
        "--seed",
        "3",
        "--rule",
        "per-class",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert!(v["mismatches"].as_u64().unwrap() > 0);
    let first = &v["first_mismatch"];
    assert!(first["oracle"]["objective"].as_f64() > first["allocator"]["objective"].as_f64());
}

#[test]
fn verify_suites() {
    let two = scenario("two_level.json");
    let out = run(&[
        "verify",
        &two,
        "--suite",
        "bic",
        "--trials",
        "2000",
        "--grid-points",
        "5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["passed"], Value::Bool(true));

    let out = run(&[
        "verify",
        &two,
        "--suite",
        "ir",
        "--trials",
        "1000",
        "--ex-post-profiles",
        "2000",
        "--corrupt",
        "doubled",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(json(&out)["ex_post_violations"].as_u64().unwrap() > 0);

    let out = run(&[
        "verify",
        &scenario("one_consumer.json"),
        "--suite",
        "profit",
        "--trials",
        "200000",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    for key in ["profit", "virtual_surplus"] {
        assert!((v[key].as_f64().unwrap() - 2.5).abs() < 0.025, "{key}: {v}");
    }

    let out = run(&[
        "verify",
        &two,
        "--suite",
        "interim",
        "--trials",
        "1000",
        "--consumer",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn regularity_command() {
    let out = run(&["check-regularity", &scenario("truncated_exponential.json")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["passed"], Value::Bool(true));
}

#[test]
fn output_file_and_thread_count_do_not_change_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    let worked = scenario("worked_example.json");
    let status = bin()
        .args(["run", &worked, "--explain", "--out"])
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    let stdout = run(&["run", &worked, "--explain"]).stdout;
    assert_eq!(std::fs::read(&path).unwrap(), stdout);

    let three = scenario("three_level.json");
    let args = [
        "verify",
        three.as_str(),
        "--suite",
        "bic",
        "--trials",
        "500",
        "--grid-points",
        "3",
    ];
    let one = bin()
        .args(args)
        .env("AUCTION_THREADS", "1")
        .output()
        .unwrap()
        .stdout;
    let four = bin()
        .args(args)
        .env("AUCTION_THREADS", "4")
        .output()
        .unwrap()
        .stdout;
    assert!(!one.is_empty());
    assert_eq!(one, four);
}
