use std::path::Path;
use std::process::{Command, Output};

use seqclf_core::bench::{synthetic_corpus, SyntheticSpec};

fn seqclf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqclf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn corpus(path: &Path, examples: usize) {
    let data = synthetic_corpus(&SyntheticSpec {
        examples,
        ..SyntheticSpec::default()
    });
    let mut csv = "text,label\n".to_owned();
    for e in &data.examples {
        csv += &format!("{},{}\n", e.text, data.classes[e.label]);
    }
    std::fs::write(path, csv).unwrap();
}

#[test]
fn describe_prints_grouped_totals() {
    for (model, total) in [("transformer", "655,041"), ("char-cnn", "11,371,683")] {
        let out = seqclf(&["describe", model]);
        assert_eq!(code(&out), 0);
        assert!(text(&out).contains(total), "{model}: {}", text(&out));
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&seqclf(&["describe", "foo"])), 2);
    assert_eq!(code(&seqclf(&["verify", "--nope"])), 2);
    assert_eq!(code(&seqclf(&[])), 2);
    assert_eq!(code(&seqclf(&["gradcheck", "--tol", "-1"])), 2);
    assert_eq!(code(&seqclf(&["--help"])), 0);
}

#[test]
fn verify_passes_and_detects_a_mutation() {
    let ok = seqclf(&["verify"]);
    assert_eq!(code(&ok), 0);
    assert_eq!(
        text(&ok).lines().filter(|l| l.starts_with("PASS")).count(),
        4
    );
    let bad = seqclf(&["verify", "--mutate"]);
    assert_eq!(code(&bad), 1);
    assert!(text(&bad).contains("mismatch"));
}

#[test]
fn gradcheck_with_zero_tolerance_fails() {
    assert_eq!(code(&seqclf(&["gradcheck", "--tol", "0"])), 1);
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    corpus(&data, 20);
    let d = data.to_str().unwrap();
    assert_eq!(
        code(&seqclf(&["train", "--model", "glove-bilstm", "--data", d])),
        3
    );
    let missing = dir.path().join("missing.csv");
    let out = seqclf(&[
        "train",
        "--model",
        "transformer",
        "--data",
        missing.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3);
    let broken = dir.path().join("broken.csv");
    std::fs::write(&broken, "words,category\nhello,a\n").unwrap();
    let out = seqclf(&[
        "train",
        "--model",
        "transformer",
        "--data",
        broken.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 3);
}

#[test]
fn training_writes_one_row_per_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    corpus(&data, 50);
    let out_dir = dir.path().join("run");
    let out = seqclf(&[
        "train",
        "--model",
        "transformer",
        "--data",
        data.to_str().unwrap(),
        "--scale",
        "16:4",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = std::fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 11);
    let accuracy = std::fs::read_to_string(out_dir.join("accuracy.csv")).unwrap();
    assert!(accuracy.starts_with("Epochs,"));
    assert_eq!(accuracy.lines().count(), 11);
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    corpus(&data, 40);
    let conf = dir.path().join("run.conf");
    std::fs::write(
        &conf,
        "# small run\ntraining.batch = 8\ntraining.epochs = 3\n",
    )
    .unwrap();
    let summary = |extra: &[&str]| {
        let out_dir = dir.path().join(format!("run{}", extra.len()));
        let mut args = vec![
            "train",
            "--model",
            "transformer",
            "--data",
            data.to_str().unwrap(),
            "--scale",
            "16:4",
            "--config",
            conf.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        assert_eq!(code(&seqclf(&args)), 0);
        let s = std::fs::read_to_string(out_dir.join("summary.json")).unwrap();
        serde_json::from_str::<serde_json::Value>(&s).unwrap()
    };
    let from_file = summary(&[]);
    assert_eq!(from_file["training"]["batch"], 8);
    assert_eq!(from_file["training"]["epochs"], 3);
    let overridden = summary(&["--batch", "4"]);
    assert_eq!(overridden["training"]["batch"], 4);
    assert_eq!(overridden["training"]["epochs"], 3);

    std::fs::write(&conf, "training.bach = 8\n").unwrap();
    let out = seqclf(&[
        "train",
        "--model",
        "transformer",
        "--data",
        data.to_str().unwrap(),
        "--config",
        conf.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn single_model_benchmark_writes_one_timing_row() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("bench");
    let out = seqclf(&[
        "benchmark",
        "--models",
        "transformer",
        "--synthetic",
        "50",
        "--epochs",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let timing = std::fs::read_to_string(out_dir.join("timing.csv")).unwrap();
    let lines: Vec<&str> = timing.lines().collect();
    assert_eq!(lines[0], "Model,Epoch1_ms,Epoch5_ms,Epoch10_ms");
    assert_eq!(lines.len(), 2);
    assert!(text(&out).contains("ordering: transformer"));
}
