//! Acceptance suite. Runs each criterion in sequence (timing checks must not
//! share the core with other tests) and prints one PASS/FAIL line per
//! criterion. Exits non-zero if any fails.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use seqclf_core::architectures::ModelKind;
use seqclf_core::bench::{parse_epoch_times, synthetic_corpus, Curve, CurveTable, SyntheticSpec};
use seqclf_core::pipeline::{prepare, Pretrained};
use seqclf_core::training::{evaluate, train_epoch, AdamConfig, AdamState, TrainConfig};
use seqclf_core::{ArchitectureConfig, RngStream};

const BIN: &str = env!("CARGO_BIN_EXE_seqclf");

type Outcome = Result<String, String>;
type Criterion<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn run(args: &[&str]) -> (Output, Duration) {
    let start = Instant::now();
    let out = Command::new(BIN).args(args).output().expect("binary runs");
    (out, start.elapsed())
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration, what: &str) -> Result<(), String> {
    ensure(elapsed < limit, || {
        format!("{what} took {elapsed:.1?}, limit {limit:?}")
    })
}

fn digits(s: &str) -> String {
    s.chars().filter(char::is_ascii_digit).collect()
}

/// Published counts, listed independently of the library's own table.
const EXPECTED_LAYERS: &[(&str, &[(&str, u64)])] = &[
    (
        "char-cnn",
        &[
            ("embedding", 4_830),
            ("conv1d_1", 123_904),
            ("conv1d_2", 459_008),
            ("conv1d_3", 196_864),
            ("conv1d_4", 196_864),
            ("conv1d_5", 196_864),
            ("conv1d_6", 196_864),
            ("dense_1", 8_913_920),
            ("dense_2", 1_049_600),
            ("dense_3", 32_800),
            ("dense_4", 165),
            ("total", 11_371_683),
        ],
    ),
    (
        "glove-bilstm",
        &[
            ("embedding", 2_887_000),
            ("bidirectional", 2_510_848),
            ("dense_1", 32_800),
            ("dense_2", 165),
            ("total", 5_430_813),
            ("trainable", 2_543_813),
        ],
    ),
    (
        "res-cnn-bilstm",
        &[
            ("char_bidirectional_1", 3_149_824),
            ("char_bidirectional_2", 6_295_552),
            ("char_bidirectional_5", 557_568),
            ("word_embedding", 2_887_000),
            ("word_bidirectional_1", 2_510_848),
            ("word_bidirectional_4", 6_295_552),
            ("branch char", 23_969_246),
            ("branch word", 24_842_072),
            ("total", 48_819_707),
            ("trainable", 45_932_707),
        ],
    ),
    (
        "transformer",
        &[
            ("token_and_position_embedding", 643_200),
            ("transformer_block", 10_656),
            ("dense_1", 660),
            ("dense_2", 420),
            ("dense_3", 105),
            ("total", 655_041),
        ],
    ),
];

fn criterion_counts() -> Outcome {
    let (out, elapsed) = run(&["verify", "--verbose"]);
    ensure(out.status.success(), || {
        format!("verify exited {}", out.status)
    })?;
    within(elapsed, Duration::from_secs(1), "verify")?;
    let text = stdout(&out);
    let mut section = "";
    let mut seen = Vec::new();
    for line in text.lines() {
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix("PASS ") {
            section = rest.split_whitespace().next().unwrap_or("");
        } else if let Some(rest) = trimmed.strip_prefix("ok ") {
            if let Some((item, value)) = rest.split_once(':') {
                seen.push((section.to_owned(), item.to_owned(), digits(value)));
            }
        }
    }
    let mut checked = 0;
    for (model, layers) in EXPECTED_LAYERS {
        for (item, count) in *layers {
            ensure(
                seen.iter()
                    .any(|(m, i, v)| m == model && i == item && *v == count.to_string()),
                || format!("{model} {item}: {count} not confirmed"),
            )?;
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} published counts confirmed in {elapsed:.0?}"
    ))
}

/// Hand-computed char-stack length chain.
fn char_chain(input: usize) -> Vec<usize> {
    let conv = |t: usize, k: usize| t - k + 1;
    let pool = |t: usize| (t - 3) / 3 + 1;
    let mut chain = vec![input];
    let mut t = conv(input, 7);
    chain.push(t);
    t = pool(t);
    chain.push(t);
    t = conv(t, 7);
    chain.push(t);
    t = pool(t);
    chain.push(t);
    for _ in 0..4 {
        t = conv(t, 3);
        chain.push(t);
    }
    chain.push(pool(t));
    chain
}

fn json_shape(report: &serde_json::Value, layer: &str) -> Option<Vec<u64>> {
    report["rows"]
        .as_array()?
        .iter()
        .find(|r| r["name"] == layer)?["output_shape"]
        .as_array()?
        .iter()
        .map(|v| v.as_u64())
        .collect()
}

fn describe_json(model: &str) -> Result<serde_json::Value, String> {
    let (out, _) = run(&["describe", model, "--json"]);
    ensure(out.status.success(), || format!("describe {model} failed"))?;
    serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())
}

fn criterion_shapes() -> Outcome {
    let chain = char_chain(1014);
    ensure(
        chain == [1014, 1008, 336, 330, 110, 108, 106, 104, 102, 34],
        || format!("oracle chain {chain:?}"),
    )?;
    let oracle = (chain.last().unwrap() * 256) as u64;
    ensure(oracle == 8_704, || format!("oracle width {oracle}"))?;
    let char_cnn = describe_json("char-cnn")?;
    let flatten = json_shape(&char_cnn, "flatten");
    ensure(flatten == Some(vec![oracle]), || {
        format!("flatten shape {flatten:?}")
    })?;
    let pooled = json_shape(&char_cnn, "max_pooling1d_3");
    ensure(pooled == Some(vec![34, 256]), || {
        format!("last pool {pooled:?}")
    })?;
    let res = describe_json("res-cnn-bilstm")?;
    let concat = json_shape(&res, "concatenate");
    ensure(concat == Some(vec![256]), || {
        format!("concat shape {concat:?}")
    })?;
    Ok("flatten width 8704 (34 x 256), Res concat width 256".into())
}

fn criterion_gradcheck() -> Outcome {
    let (out, elapsed) = run(&["gradcheck", "--tol", "1e-4"]);
    let text = stdout(&out);
    ensure(out.status.success(), || {
        format!("gradcheck exited {}:\n{text}", out.status)
    })?;
    within(elapsed, Duration::from_secs(120), "gradcheck")?;
    let required = [
        "dense_relu",
        "dense_softmax",
        "dense_l2_penalty",
        "embedding",
        "token_position_embedding",
        "conv1d_relu",
        "max_pooling1d",
        "flatten",
        "dropout",
        "lstm_sequences",
        "bidirectional_last",
        "residual_add",
        "concatenate",
        "global_average_pooling1d",
        "layer_normalization",
        "multi_head_attention",
        "transformer_block",
        "sparse_categorical_crossentropy",
        "tiny char-cnn",
        "tiny glove-bilstm",
        "tiny res-cnn-bilstm",
        "tiny transformer",
    ];
    for case in required {
        ensure(
            text.lines()
                .any(|l| l.starts_with(case) && l.trim_end().ends_with("ok")),
            || format!("case `{case}` missing or failing"),
        )?;
    }
    let (faulty, _) = run(&["gradcheck", "--inject-fault"]);
    ensure(faulty.status.code() == Some(1), || {
        "corrupted derivative went unnoticed".into()
    })?;
    let worst = text
        .lines()
        .find(|l| l.starts_with("worst:"))
        .unwrap_or("")
        .to_owned();
    Ok(format!(
        "{} cases in {elapsed:.1?}; {worst}",
        required.len()
    ))
}

fn criterion_convergence() -> Outcome {
    let start = Instant::now();
    let data = synthetic_corpus(&SyntheticSpec::default());
    ensure(data.len() == 2000, || "corpus size".into())?;
    let arch = ArchitectureConfig::default().scaled(8, 4);
    let config = TrainConfig {
        batch: 32,
        adam: AdamConfig {
            lr: 1e-3,
            ..AdamConfig::default()
        },
        ..TrainConfig::default()
    };
    let mut summary = Vec::new();
    for kind in ModelKind::ALL {
        let mut p = prepare::<f32>(
            kind,
            &arch,
            &data,
            &Pretrained::Random { seed: 5 },
            config.validation_split,
            config.seed,
        )
        .map_err(|e| e.to_string())?;
        let mut adam = AdamState::for_model(config.adam, &p.model);
        let mut rng = RngStream::new(config.seed);
        let mut best = 0.0f64;
        let mut losses = Vec::new();
        for epoch in 1..=config.epochs {
            let m = train_epoch(
                &mut p.model,
                &p.train,
                None,
                &config,
                &mut adam,
                &mut rng,
                epoch,
            )
            .map_err(|e| e.to_string())?;
            losses.push(m.train_loss);
            let (_, acc) = evaluate(&p.model, &p.train, 256).map_err(|e| e.to_string())?;
            best = best.max(acc);
        }
        let (first, last) = (losses[0], *losses.last().unwrap());
        ensure(best >= 0.95, || {
            format!("{} peaked at train accuracy {best:.3}", kind.id())
        })?;
        ensure(last < first, || {
            format!("{} loss rose from {first:.4} to {last:.4}", kind.id())
        })?;
        summary.push(format!("{} {best:.3}", kind.id()));
    }
    within(start.elapsed(), Duration::from_secs(600), "convergence")?;
    Ok(format!(
        "train accuracy {} in {:.0?}",
        summary.join(", "),
        start.elapsed()
    ))
}

fn criterion_timing(out_dir: &Path) -> Outcome {
    let dir = out_dir.to_str().unwrap();
    let (out, elapsed) = run(&["benchmark", "--out", dir]);
    ensure(out.status.success(), || {
        format!(
            "benchmark exited {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr)
        )
    })?;
    within(elapsed, Duration::from_secs(1200), "benchmark")?;
    let file = std::fs::File::open(out_dir.join("epoch_times.csv")).map_err(|e| e.to_string())?;
    let times = parse_epoch_times(file).map_err(|e| e.to_string())?;
    let mean = |kind: ModelKind| {
        times
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, t)| t.iter().sum::<f64>() / t.len() as f64)
            .ok_or_else(|| format!("no times for {}", kind.id()))
    };
    let t = mean(ModelKind::Transformer)?;
    let g = mean(ModelKind::GloveBilstm)?;
    let c = mean(ModelKind::CharCnn)?;
    let r = mean(ModelKind::ResCnnBilstm)?;
    let detail = format!(
        "mean ms: transformer {t:.0}, glove {g:.0}, char {c:.0}, res {r:.0}; ratio {:.2}",
        t / g
    );
    ensure(t < g && g < c && c < r, || {
        format!("ordering broken: {detail}")
    })?;
    ensure(t / g <= 0.7, || format!("ratio too high: {detail}"))?;
    Ok(format!("{detail} ({elapsed:.0?})"))
}

fn write_corpus(path: &Path, examples: usize) {
    let data = synthetic_corpus(&SyntheticSpec {
        examples,
        ..SyntheticSpec::default()
    });
    let mut w = "text,label\n".to_owned();
    for e in &data.examples {
        w.push_str(&format!("{},{}\n", e.text, data.classes[e.label]));
    }
    std::fs::write(path, w).unwrap();
}

fn criterion_determinism(work: &Path) -> Outcome {
    let data = work.join("det.csv");
    write_corpus(&data, 200);
    let mut compared = 0;
    for model in ["transformer", "char-cnn"] {
        let mut dirs = Vec::new();
        for run_id in ["a", "b"] {
            let dir = work.join(format!("det_{model}_{run_id}"));
            let (out, _) = run(&[
                "train",
                "--model",
                model,
                "--data",
                data.to_str().unwrap(),
                "--precision",
                "f64",
                "--scale",
                "16:4",
                "--seed",
                "9",
                "--out",
                dir.to_str().unwrap(),
            ]);
            ensure(out.status.success(), || {
                format!(
                    "train {model} failed: {}",
                    String::from_utf8_lossy(&out.stderr)
                )
            })?;
            dirs.push(dir);
        }
        for file in [
            "metrics.csv",
            "accuracy.csv",
            "loss.csv",
            "validation_accuracy.csv",
            "validation_loss.csv",
            "summary.json",
        ] {
            let a = std::fs::read(dirs[0].join(file)).map_err(|e| e.to_string())?;
            let b = std::fs::read(dirs[1].join(file)).map_err(|e| e.to_string())?;
            ensure(a == b, || format!("{model}: {file} differs between runs"))?;
            compared += 1;
        }
        let rows = std::fs::read_to_string(dirs[0].join("metrics.csv")).unwrap();
        ensure(rows.lines().count() == 11, || {
            format!("{model}: expected 10 metric rows")
        })?;
    }
    Ok(format!(
        "{compared} metric files bitwise identical across repeated runs"
    ))
}

fn criterion_frozen() -> Outcome {
    let data = synthetic_corpus(&SyntheticSpec {
        examples: 300,
        ..SyntheticSpec::default()
    });
    let arch = ArchitectureConfig::default().scaled(16, 4);
    let config = TrainConfig {
        batch: 32,
        ..TrainConfig::default()
    };
    let mut notes = Vec::new();
    for (kind, layer) in [
        (ModelKind::GloveBilstm, "embedding"),
        (ModelKind::ResCnnBilstm, "word_embedding"),
    ] {
        let mut p = prepare::<f32>(
            kind,
            &arch,
            &data,
            &Pretrained::Random { seed: 4 },
            config.validation_split,
            config.seed,
        )
        .map_err(|e| e.to_string())?;
        let bits = |m: &seqclf_core::Model<f32>, layer: &str, role: &str| -> Vec<u32> {
            m.parameter(layer, role)
                .expect("parameter exists")
                .data()
                .iter()
                .map(|v| v.to_bits())
                .collect()
        };
        let table = bits(&p.model, layer, "embeddings");
        ensure(table.iter().any(|&b| b != 0), || "table is blank".into())?;
        let head = bits(&p.model, "dense_2", "kernel");
        seqclf_core::training::fit(&mut p.model, &p.train, p.val.as_ref(), &config)
            .map_err(|e| e.to_string())?;
        ensure(bits(&p.model, layer, "embeddings") == table, || {
            format!("{} embedding table changed", kind.id())
        })?;
        ensure(bits(&p.model, "dense_2", "kernel") != head, || {
            format!("{} trainable head never moved", kind.id())
        })?;
        notes.push(format!("{} ({} values)", kind.id(), table.len()));
    }
    Ok(format!(
        "tables bitwise unchanged after 10 epochs: {}",
        notes.join(", ")
    ))
}

fn criterion_curves(bench_dir: &Path) -> Outcome {
    const HEADER: &str = "Epochs,1-D Char,Glove,Res-CNN-BiLSTM,Transformer";
    for curve in Curve::ALL {
        let path = bench_dir.join(curve.file_name());
        let text =
            std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        ensure(text.lines().next() == Some(HEADER), || {
            format!("{} header {:?}", curve.file_name(), text.lines().next())
        })?;
        let table = CurveTable::parse(text.as_bytes()).map_err(|e| e.to_string())?;
        ensure(table.rows.len() == 10, || "expected 10 epochs".into())?;
        ensure(table.to_csv() == text, || {
            format!("{} does not re-emit identically", curve.file_name())
        })?;
        let again = CurveTable::parse(table.to_csv().as_bytes()).map_err(|e| e.to_string())?;
        ensure(again == table, || {
            format!("{} does not round-trip", curve.file_name())
        })?;
    }
    Ok("4 curve files carry the header and round-trip exactly".into())
}

fn main() {
    let work = tempfile::tempdir().expect("temp dir");
    let bench_dir: PathBuf = work.path().join("bench");
    let criteria: Vec<(&str, Criterion)> = vec![
        ("1 parameter counts", Box::new(criterion_counts)),
        ("2 shape oracle", Box::new(criterion_shapes)),
        ("3 gradient checks", Box::new(criterion_gradcheck)),
        ("4 training sanity", Box::new(criterion_convergence)),
        (
            "5 timing ordering",
            Box::new(|| criterion_timing(&bench_dir)),
        ),
        (
            "6 determinism",
            Box::new(|| criterion_determinism(work.path())),
        ),
        ("7 frozen embeddings", Box::new(criterion_frozen)),
        ("8 curve format", Box::new(|| criterion_curves(&bench_dir))),
    ];
    let mut failures = 0;
    for (name, check) in &criteria {
        match check() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                failures += 1;
                println!("FAIL criterion {name}: {why}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
