use std::path::Path;

use seqclf_core::architectures::{
    describe_model, group_thousands, verify_reference_counts, ReferenceCounts,
};
use seqclf_core::bench::{
    epoch_times_csv, metrics_csv, run_benchmark, run_gradcheck_suite, speed_ranking,
    synthetic_corpus, BenchmarkConfig, Curve, CurveTable, DeskScale, GradCheckSuiteOptions,
    ModelRun, TimingTable,
};
use seqclf_core::pipeline::{prepare, Pretrained};
use seqclf_core::text::load_labeled_csv;
use seqclf_core::training::{fit_with, EpochMetrics, TrainConfig};
use seqclf_core::{ArchitectureConfig, Element, Error, ModelKind, RunConfig};

use crate::args::{
    BenchmarkArgs, DescribeArgs, GradcheckArgs, Precision, TrainArgs, TrainingFlags, VerifyArgs,
};
use crate::failure::{as_usage, CliError};

type CliResult<T = ()> = Result<T, CliError>;

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p).map_err(as_usage),
        None => Ok(RunConfig::default()),
    }
}

/// Flags win over the file, the file over built-in defaults.
fn merge_training(flags: &TrainingFlags, mut cfg: TrainConfig) -> CliResult<TrainConfig> {
    if let Some(v) = flags.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = flags.batch {
        cfg.batch = v;
    }
    if let Some(v) = flags.lr {
        cfg.adam.lr = v;
    }
    if let Some(v) = flags.decay {
        cfg.adam.decay = v;
    }
    if let Some(v) = flags.seed {
        cfg.seed = v;
    }
    if let Some(v) = flags.validation_split {
        cfg.validation_split = v;
    }
    cfg.validate().map_err(as_usage)?;
    Ok(cfg)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|source| Error::Io { path, source })?;
    Ok(())
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    Ok(())
}

fn write_curves(
    dir: &Path,
    runs: &[(ModelKind, Vec<EpochMetrics>)],
) -> CliResult<Vec<&'static str>> {
    let mut written = Vec::new();
    for curve in Curve::ALL {
        if let Some(table) = CurveTable::from_histories(curve, runs)? {
            write_file(dir, curve.file_name(), &table.to_csv())?;
            written.push(curve.file_name());
        }
    }
    Ok(written)
}

fn epoch_line(kind: ModelKind, epochs: usize, m: &EpochMetrics) -> String {
    let mut line = format!(
        "{:<15} epoch {:>2}/{epochs}  loss {:.4}  acc {:.4}",
        kind.id(),
        m.epoch,
        m.train_loss,
        m.train_accuracy
    );
    if let (Some(l), Some(a)) = (m.val_loss, m.val_accuracy) {
        line += &format!("  val_loss {l:.4}  val_acc {a:.4}");
    }
    line + &format!("  ({:.1} ms)", m.wall_ms)
}

pub fn describe(args: DescribeArgs) -> CliResult {
    let config = load_config(args.config.as_deref())?;
    let arch = args
        .scale
        .unwrap_or(DeskScale::FULL)
        .apply(&config.architecture);
    let report = describe_model(&arch.build(args.model)?);
    if args.json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.to_text());
    }
    Ok(())
}

pub fn verify(args: VerifyArgs) -> CliResult {
    let mut arch = ArchitectureConfig::default();
    if args.mutate {
        arch.char_cnn.dense_units /= 2;
    }
    let mut failed = Vec::new();
    for kind in ModelKind::ALL {
        let graph = arch.build(kind)?;
        let report = verify_reference_counts(&graph, &ReferenceCounts::for_model(kind))?;
        let counts = graph.counts();
        println!(
            "{} {:<15} total {:>10}  trainable {:>10}  frozen {:>9}  ({} checks)",
            if report.passed() { "PASS" } else { "FAIL" },
            kind.id(),
            group_thousands(counts.total),
            group_thousands(counts.trainable),
            group_thousands(counts.non_trainable),
            report.checks.len()
        );
        for check in &report.checks {
            let actual = check
                .actual
                .map_or_else(|| "missing".to_owned(), group_thousands);
            if !check.passed() {
                println!(
                    "     mismatch {}: expected {}, got {actual}",
                    check.item,
                    group_thousands(check.expected)
                );
            } else if args.verbose {
                println!("     ok {}: {actual}", check.item);
            }
        }
        if !report.passed() {
            failed.push(kind.id());
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Check(format!(
            "parameter counts differ for {}",
            failed.join(", ")
        )))
    }
}

pub fn train(args: TrainArgs) -> CliResult {
    match args.training.precision {
        Precision::F32 => train_as::<f32>(&args),
        Precision::F64 => train_as::<f64>(&args),
    }
}

fn train_as<T: Element>(args: &TrainArgs) -> CliResult {
    let config = load_config(args.training.config.as_deref())?;
    let train_cfg = merge_training(&args.training, config.training)?;
    let arch = args
        .scale
        .unwrap_or(DeskScale::FULL)
        .apply(&config.architecture);
    let kind = args.model;
    let pretrained = match (&args.glove, kind.uses_pretrained_words()) {
        (Some(path), true) => Pretrained::File(path.clone()),
        (None, true) => {
            return Err(CliError::Data(format!(
                "{} needs pretrained word vectors; pass --glove PATH",
                kind.id()
            )))
        }
        // Unused by this model.
        (_, false) => Pretrained::Random { seed: 0 },
    };
    let data = load_labeled_csv(&args.data)?;
    let mut prepared = prepare::<T>(
        kind,
        &arch,
        &data,
        &pretrained,
        train_cfg.validation_split,
        train_cfg.seed,
    )?;
    if let Some((hits, misses)) = prepared.coverage {
        eprintln!("word vectors: {hits} found, {misses} missing (zero rows)");
    }
    let epochs = train_cfg.epochs;
    let history = fit_with(
        &mut prepared.model,
        &prepared.train,
        prepared.val.as_ref(),
        &train_cfg,
        |m| println!("{}", epoch_line(kind, epochs, m)),
    )?;

    create_dir(&args.out)?;
    write_file(&args.out, "metrics.csv", &metrics_csv(&history))?;
    let runs = [(kind, history)];
    write_file(&args.out, "epoch_times.csv", &epoch_times_csv(&runs))?;
    write_curves(&args.out, &runs)?;
    let last = runs[0].1.last().expect("at least one epoch");
    let counts = prepared.model.runtime_counts();
    let mut summary = serde_json::json!({
        "model": kind.id(),
        "precision": format!("{:?}", args.training.precision).to_lowercase(),
        "train_examples": prepared.train.len(),
        "validation_examples": prepared.val.as_ref().map_or(0, |v| v.len()),
        "parameters": { "total": counts.total, "trainable": counts.trainable },
        "training": train_cfg,
        "final": last,
    });
    // Timing lives in epoch_times.csv so the summary stays reproducible.
    summary["final"]
        .as_object_mut()
        .expect("metrics serialize to an object")
        .remove("wall_ms");
    write_file(
        &args.out,
        "summary.json",
        &(serde_json::to_string_pretty(&summary).expect("json value") + "\n"),
    )?;
    println!("wrote {}", args.out.display());
    Ok(())
}

pub fn benchmark(args: BenchmarkArgs) -> CliResult {
    match args.training.precision {
        Precision::F32 => benchmark_as::<f32>(&args),
        Precision::F64 => benchmark_as::<f64>(&args),
    }
}

fn benchmark_as<T: Element>(args: &BenchmarkArgs) -> CliResult {
    let config = load_config(args.training.config.as_deref())?;
    let train = merge_training(&args.training, config.training)?;
    let scale = if args.paper_scale {
        DeskScale::FULL
    } else {
        args.scale.unwrap_or(DeskScale::BENCHMARK)
    };
    let mut synthetic = config.synthetic;
    if let Some(n) = args.synthetic {
        synthetic.examples = n;
    }
    let data = synthetic_corpus(&synthetic);
    let bench = BenchmarkConfig {
        models: args.models.0.clone(),
        arch: scale.apply(&config.architecture),
        embedding_seed: synthetic.seed,
        train,
    };
    let epochs = bench.train.epochs;
    eprintln!(
        "{} examples, scale {}:{}, {} epochs, batch {}",
        data.len(),
        scale.width,
        scale.length,
        epochs,
        bench.train.batch
    );
    let runs = run_benchmark::<T>(&bench, &data, |kind, m| {
        eprintln!("{}", epoch_line(kind, epochs, m))
    })?;

    create_dir(&args.out)?;
    let histories: Vec<(ModelKind, Vec<EpochMetrics>)> =
        runs.iter().map(|r| (r.kind, r.history.clone())).collect();
    write_file(
        &args.out,
        "timing.csv",
        &TimingTable::from_histories(&histories).to_csv(),
    )?;
    write_file(&args.out, "epoch_times.csv", &epoch_times_csv(&histories))?;
    write_curves(&args.out, &histories)?;
    print_ranking(&runs);
    println!("wrote {}", args.out.display());
    Ok(())
}

fn print_ranking(runs: &[ModelRun]) {
    println!("mean epoch time, fastest first:");
    let ranked = speed_ranking(runs);
    for (kind, ms) in &ranked {
        let params = runs
            .iter()
            .find(|r| r.kind == *kind)
            .map_or(0, |r| r.parameters.total);
        println!(
            "  {:<15} {ms:>10.1} ms  ({} parameters)",
            kind.id(),
            group_thousands(params)
        );
    }
    let order: Vec<&str> = ranked.iter().map(|(k, _)| k.id()).collect();
    println!("ordering: {}", order.join(" < "));
}

pub fn gradcheck(args: GradcheckArgs) -> CliResult {
    if args.tol.is_nan() || args.tol < 0.0 {
        return Err(CliError::Usage(format!(
            "--tol {} is not a tolerance",
            args.tol
        )));
    }
    let options = GradCheckSuiteOptions {
        tolerance: args.tol,
        seed: args.seed,
        max_elements_per_input: (args.max_elements > 0).then_some(args.max_elements),
        inject_fault: args.inject_fault,
        ..GradCheckSuiteOptions::default()
    };
    let report = run_gradcheck_suite(&options)?;
    println!("{:<34} {:>8} {:>12}", "case", "checked", "worst rel");
    for case in &report.cases {
        println!(
            "{:<34} {:>8} {:>12.3e}  {}",
            case.name,
            case.report.checked,
            case.report.max_relative_error,
            if case.report.passed { "ok" } else { "FAIL" }
        );
    }
    if let Some(worst) = report.worst() {
        println!(
            "worst: {} at {:.3e} (tolerance {:e})",
            worst.name, worst.report.max_relative_error, args.tol
        );
    }
    if report.passed() {
        Ok(())
    } else {
        let failed = report.cases.iter().filter(|c| !c.report.passed).count();
        Err(CliError::Check(format!(
            "{failed} of {} gradient checks exceed tolerance {:e}",
            report.cases.len(),
            args.tol
        )))
    }
}
