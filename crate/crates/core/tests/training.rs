use seqclf_core::architectures::ModelKind;
use seqclf_core::bench::{synthetic_corpus, tiny_architectures, SyntheticSpec};
use seqclf_core::pipeline::{prepare, Pretrained};
use seqclf_core::training::{adam_step, fit, AdamConfig, AdamState, TrainConfig};
use seqclf_core::{Error, Tensor};

fn small_run(kind: ModelKind, seed: u64) -> Vec<seqclf_core::training::EpochMetrics> {
    let data = synthetic_corpus(&SyntheticSpec {
        examples: 60,
        ..SyntheticSpec::default()
    });
    let config = TrainConfig {
        epochs: 3,
        batch: 16,
        seed,
        ..TrainConfig::default()
    };
    let mut p = prepare::<f64>(
        kind,
        &tiny_architectures(),
        &data,
        &Pretrained::Random { seed: 1 },
        config.validation_split,
        seed,
    )
    .unwrap();
    fit(&mut p.model, &p.train, p.val.as_ref(), &config).unwrap()
}

#[test]
fn same_seed_same_history_in_f64() {
    for kind in ModelKind::ALL {
        let strip = |h: Vec<seqclf_core::training::EpochMetrics>| {
            h.into_iter()
                .map(|m| {
                    (
                        m.train_loss.to_bits(),
                        m.train_accuracy.to_bits(),
                        m.val_loss.map(f64::to_bits),
                    )
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(
            strip(small_run(kind, 5)),
            strip(small_run(kind, 5)),
            "{kind}"
        );
        assert_ne!(
            strip(small_run(kind, 5)),
            strip(small_run(kind, 6)),
            "{kind}"
        );
    }
}

#[test]
fn epochs_are_numbered_and_timed() {
    let h = small_run(ModelKind::Transformer, 2);
    assert_eq!(h.iter().map(|m| m.epoch).collect::<Vec<_>>(), [1, 2, 3]);
    assert!(h
        .iter()
        .all(|m| m.wall_ms > 0.0 && m.val_accuracy.is_some()));
}

#[test]
fn adam_descends_a_quadratic() {
    // f(w) = sum((w - 3)^2), minimized at 3.
    let config = AdamConfig {
        lr: 0.1,
        decay: 0.0,
        ..AdamConfig::default()
    };
    let mut w = Tensor::<f64>::from_f64(&[4], &[0.0, -1.0, 5.0, 10.0]).unwrap();
    let mut state = AdamState::<f64>::new(config, [Some(&[4usize][..])]);
    for _ in 0..500 {
        let g: Vec<f64> = w.data().iter().map(|v| 2.0 * (v - 3.0)).collect();
        let g = Tensor::from_f64(&[4], &g).unwrap();
        state.step(&mut [&mut w], &[Some(g)]).unwrap();
    }
    assert!(w.data().iter().all(|v| (v - 3.0).abs() < 1e-2), "{w:?}");
    assert_eq!(state.step_count(), 500);
}

#[test]
fn invalid_training_configs_are_rejected() {
    let bad = [
        TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        },
        TrainConfig {
            batch: 0,
            ..TrainConfig::default()
        },
        TrainConfig {
            validation_split: 1.0,
            ..TrainConfig::default()
        },
    ];
    for c in bad {
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }
    let _ = adam_step::<f32>;
}
