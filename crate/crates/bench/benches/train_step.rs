use criterion::{criterion_group, criterion_main, Criterion};
use seqclf_core::bench::{synthetic_corpus, DeskScale, SyntheticSpec};
use seqclf_core::pipeline::{prepare, Pretrained};
use seqclf_core::training::{adam_step, batch_gradients, AdamConfig, AdamState};
use seqclf_core::{ArchitectureConfig, ModelKind, RngStream};

/// One minibatch of 32 through forward, backward and an Adam update.
fn train_step(c: &mut Criterion) {
    let data = synthetic_corpus(&SyntheticSpec {
        examples: 64,
        ..SyntheticSpec::default()
    });
    let arch = DeskScale::BENCHMARK.apply(&ArchitectureConfig::default());
    let mut group = c.benchmark_group("train_step");
    group.sample_size(10);
    for kind in ModelKind::ALL {
        let mut p = prepare::<f32>(kind, &arch, &data, &Pretrained::Random { seed: 1 }, 0.0, 1)
            .expect("synthetic corpus prepares");
        let batch = p.train.subset(&(0..32).collect::<Vec<_>>());
        let mut adam = AdamState::for_model(AdamConfig::default(), &p.model);
        let mut rng = RngStream::new(2);
        group.bench_function(kind.id(), |bench| {
            bench.iter(|| {
                let (_, _, grads) = batch_gradients(&p.model, &batch, &mut rng).unwrap();
                adam_step(&mut p.model, &grads, &mut adam).unwrap();
            })
        });
    }
    group.finish();
}

criterion_group!(benches, train_step);
criterion_main!(benches);
