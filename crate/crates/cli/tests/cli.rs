use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;
use std::process::{Command, Output, Stdio};

use logsketch::data::{to_update_stream, write_turnstile, StreamOrder};
use logsketch::{io as lio, signed_design_matrix, SketchedDataset};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_logsketch"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_sketch(path: &Path) -> SketchedDataset {
    SketchedDataset::read_csv(BufReader::new(File::open(path).unwrap()), "test").unwrap()
}

#[test]
fn synthetic_then_sketch_has_expected_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("syn.svm");
    let sk = dir.path().join("syn.sketch");
    run_ok(&["gen-synthetic", "--n", "1000", "--out", data.to_str().unwrap()]);
    run_ok(&[
        "sketch", "--in", data.to_str().unwrap(), "--format", "libsvm", "--levels", "3", "--buckets", "64",
        "--sample", "32", "--out", sk.to_str().unwrap(),
    ]);
    let sketch = read_sketch(&sk);
    assert_eq!(sketch.len(), 224);
    assert_eq!(std::fs::read_to_string(&sk).unwrap().lines().count(), 225);
}

#[test]
fn stdin_turnstile_matches_batch_sketch() {
    let dir = tempfile::tempdir().unwrap();
    let data_path = dir.path().join("syn.csv");
    run_ok(&["gen-synthetic", "--n", "300", "--out", data_path.to_str().unwrap(), "--seed", "2"]);
    let data = lio::read_csv(&data_path).unwrap();
    let a = signed_design_matrix(&data);
    let stream = to_update_stream(&a, StreamOrder::Shuffled, 3, 11);
    let mut text = Vec::new();
    write_turnstile(&mut text, a.n(), a.d(), &stream).unwrap();

    let common = ["--levels", "3", "--buckets", "16", "--sample", "8", "--seed", "5"];
    let batch = dir.path().join("batch.sketch");
    let streamed = dir.path().join("stream.sketch");
    let mut args = vec!["sketch", "--in", data_path.to_str().unwrap(), "--format", "csv", "--out", batch.to_str().unwrap()];
    args.extend(common);
    run_ok(&args);

    let mut args = vec!["sketch", "--in", "-", "--format", "turnstile", "--out", streamed.to_str().unwrap()];
    args.extend(common);
    let mut child = bin().args(&args).stdin(Stdio::piped()).stderr(Stdio::piped()).spawn().unwrap();
    child.stdin.take().unwrap().write_all(&text).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let (b, s) = (read_sketch(&batch), read_sketch(&streamed));
    assert_eq!(b.weights(), s.weights());
    let scale = b.rows().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for (x, y) in b.rows().iter().zip(s.rows().iter()) {
        assert!((x - y).abs() <= 1e-9 * scale, "{x} vs {y}");
    }
}

#[test]
fn solve_with_fractional_clip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("syn.svm");
    let sk = dir.path().join("syn.sketch");
    let model = dir.path().join("model.txt");
    run_ok(&["gen-synthetic", "--n", "2000", "--out", data.to_str().unwrap()]);
    run_ok(&[
        "sketch", "--in", data.to_str().unwrap(), "--format", "libsvm", "--buckets", "64", "--out",
        sk.to_str().unwrap(),
    ]);
    let out = run_ok(&["solve", "--sketch", sk.to_str().unwrap(), "--clip", "0.25", "--out-model", model.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("K = 16"));
    let coefs: Vec<f64> = std::fs::read_to_string(&model)
        .unwrap()
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(coefs.len(), 2);

    run_ok(&["solve", "--sketch", sk.to_str().unwrap(), "--out-model", model.to_str().unwrap()]);
    let out = bin()
        .args(["solve", "--sketch", sk.to_str().unwrap(), "--clip", "1.5", "--out-model", model.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn experiment_writes_results_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.conf");
    std::fs::write(
        &plan,
        "dataset = synthetic\nn = 2000\nmethods = sketch, uniform, sgd\nsizes = 100, 200\nreps = 3\nseed = 1\n",
    )
    .unwrap();
    let out = dir.path().join("results.csv");
    run_ok(&["experiment", "--config", plan.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let recs = lio::read_results_csv(&out).unwrap();
    assert_eq!(recs.len(), 3 * 2 * 3);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("dataset,method,size,rep,ratio,reduce_ms,total_ms\n"));
    let summary = std::fs::read_to_string(dir.path().join("results_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 3 * 2);

    // Same plan, same numbers apart from timings.
    let out2 = dir.path().join("again.csv");
    run_ok(&["experiment", "--config", plan.to_str().unwrap(), "--out", out2.to_str().unwrap()]);
    let recs2 = lio::read_results_csv(&out2).unwrap();
    for (a, b) in recs.iter().zip(&recs2) {
        assert_eq!((&a.method, a.size, a.rep, a.ratio.to_bits()), (&b.method, b.size, b.rep, b.ratio.to_bits()));
    }
}

#[test]
fn validate_params_reports_violations() {
    let out = run_ok(&["validate-params", "--n", "100000", "--d", "3", "--mu", "1", "--eps", "0.1", "--delta", "0.05"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("violated: N >= b m^2 d^2 / (eps delta)"), "{text}");
}

#[test]
fn errors_exit_nonzero() {
    for args in [
        vec!["sketch", "--in", "/nonexistent/file", "--format", "libsvm", "--out", "/tmp/x"],
        vec!["gen-synthetic", "--n", "2", "--out", "/tmp/never.svm"],
        vec!["frobnicate"],
        vec!["gen-synthetic", "--n", "10", "--out", "/tmp/x.svm", "--bogus"],
    ] {
        let out = bin().args(&args).output().unwrap();
        assert!(!out.status.success(), "{args:?} should fail");
        assert!(!out.stderr.is_empty());
    }
}
