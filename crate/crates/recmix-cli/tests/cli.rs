//! End-to-end checks of the binary: exit codes, config-file merging, and
//! input validation.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn recmix(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_recmix"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).expect("output file exists")
}

#[test]
fn weights_emits_closed_form_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("w.csv");
    let result = recmix(&[
        "weights",
        "--beta",
        "0.5",
        "--max-lag",
        "3",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    let text = read(&out);
    assert!(text.starts_with("# recmix weights format=v1"));
    assert!(text.contains("0.5,1,0.5\n"));
    assert!(text.contains("0.5,2,0.25\n"));
    assert!(text.contains("0.5,3,0.125\n"));
}

#[test]
fn weights_beta_zero_is_invalid_parameter() {
    let result = recmix(&["weights", "--beta", "0"]);
    assert_eq!(result.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("non-normalizable"), "stderr: {stderr}");
}

#[test]
fn filter_missing_input_file_is_input_error() {
    let result = recmix(&["filter", "--input", "/nonexistent/stream.jsonl"]);
    assert_eq!(result.status.code(), Some(2));
}

#[test]
fn filter_requires_exactly_one_source() {
    let result = recmix(&["filter"]);
    assert_eq!(result.status.code(), Some(4));

    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("s.jsonl");
    fs::write(&input, "{\"t\":0,\"y\":1.0}\n").unwrap();
    let result = recmix(&[
        "filter",
        "--input",
        input.to_str().unwrap(),
        "--generator",
        "drift",
        "--drift-std",
        "0.1",
    ]);
    assert_eq!(result.status.code(), Some(4));
}

#[test]
fn filter_empty_stream_is_no_data() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.jsonl");
    fs::write(&input, "").unwrap();
    let result = recmix(&["filter", "--input", input.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("no observations"));
}

#[test]
fn malformed_jsonl_reports_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.jsonl");
    fs::write(&input, "{\"t\":0,\"y\":1.0}\n{oops}\n").unwrap();
    let result = recmix(&["filter", "--input", input.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("line 2"));
}

#[test]
fn out_of_order_timestamps_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("ooo.csv");
    fs::write(&input, "t,y\n3,0.5\n1,0.5\n").unwrap();
    let result = recmix(&["filter", "--input", input.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("strictly increasing"));
}

#[test]
fn csv_input_with_truth_populates_abs_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("s.csv");
    fs::write(&input, "t,y,truth\n0,0.9,1.0\n1,1.1,1.0\n").unwrap();
    let out = dir.path().join("trace.csv");
    let result = recmix(&[
        "filter",
        "--input",
        input.to_str().unwrap(),
        "--particles",
        "200",
        "--beta",
        "1",
        "--seed",
        "3",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    let text = read(&out);
    let header = text.lines().nth(1).unwrap();
    assert_eq!(header, "t,mean,std,ess,log_marginal_increment,abs_error");
    let first_row = text.lines().nth(2).unwrap();
    assert_eq!(first_row.split(',').count(), 6);
    assert!(!first_row.ends_with(','), "abs_error must be populated");
}

#[test]
fn generate_then_filter_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let stream = dir.path().join("stream.jsonl");
    let ok = recmix(&[
        "generate",
        "--generator",
        "sinusoid",
        "--amp",
        "1.5",
        "--period",
        "25",
        "--steps",
        "40",
        "--obs-std",
        "0.5",
        "--seed",
        "9",
        "--output",
        stream.to_str().unwrap(),
    ]);
    assert!(ok.status.success());
    let trace = dir.path().join("trace.csv");
    let report = dir.path().join("report.json");
    let ok = recmix(&[
        "filter",
        "--input",
        stream.to_str().unwrap(),
        "--particles",
        "300",
        "--beta",
        "0.8",
        "--noise-std",
        "0.2",
        "--report",
        report.to_str().unwrap(),
        "--output",
        trace.to_str().unwrap(),
    ]);
    assert!(ok.status.success());
    // 40 observations -> header comment + column header + 40 rows
    assert_eq!(read(&trace).lines().count(), 42);
    let report: serde_json::Value = serde_json::from_str(&read(&report)).unwrap();
    assert!(report["rmse"].is_number());
    assert_eq!(report["rows"].as_array().unwrap().len(), 40);
    let ess = report["mean_ess"].as_f64().unwrap();
    assert!(ess >= 1.0 && ess <= 300.0);
}

#[test]
fn config_file_supplies_values_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        r#"
beta = 0.9
particles = 64
steps = 4
seed = 11
kernel = "identity"
"#,
    )
    .unwrap();
    let out_a = dir.path().join("a.csv");
    let result = recmix(&[
        "chain",
        "--config",
        cfg.to_str().unwrap(),
        "--output",
        out_a.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    let text_a = read(&out_a);
    assert!(text_a.contains("beta=0.9"));
    assert!(text_a.contains("particles=64"));

    // explicit flag wins over the file value
    let out_b = dir.path().join("b.csv");
    let result = recmix(&[
        "chain",
        "--config",
        cfg.to_str().unwrap(),
        "--beta",
        "0.5",
        "--output",
        out_b.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    assert!(read(&out_b).contains("beta=0.5"));
}

#[test]
fn chain_beta_zero_warns_but_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let result = recmix(&[
        "chain",
        "--beta",
        "0",
        "--particles",
        "10",
        "--steps",
        "3",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    assert!(String::from_utf8_lossy(&result.stderr).contains("warning"));
    // frozen chain: all mass at lag t + 1
    assert!(read(&out).contains("3,4,10,10\n"));
}

#[test]
fn bench_rejects_short_runs() {
    let result = recmix(&["bench", "--steps", "500"]);
    assert_eq!(result.status.code(), Some(4));
}

#[test]
fn unknown_config_key_is_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "betaa = 0.5\n").unwrap();
    let result = recmix(&["chain", "--config", cfg.to_str().unwrap()]);
    assert_eq!(result.status.code(), Some(2));
}
