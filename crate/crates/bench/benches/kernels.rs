use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use seqclf_bench::random;
use seqclf_core::autodiff::LstmOptions;
use seqclf_core::Graph;

fn matmul(c: &mut Criterion) {
    let mut group = c.benchmark_group("matmul");
    for n in [64, 256] {
        let a = random(&[n, n], 1);
        let b = random(&[n, n], 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| a.matmul(&b).unwrap())
        });
    }
    group.finish();
}

fn conv1d(c: &mut Criterion) {
    // One char-CNN block at 16:4 scale: 32 x 256 x 70 input, 16 filters of width 7.
    let x = random(&[32, 256, 70], 3);
    let k = random(&[7, 70, 16], 4);
    let b = random(&[16], 5);
    c.bench_function("conv1d forward+backward", |bench| {
        bench.iter(|| {
            let g = Graph::new();
            let (xv, kv, bv) = (g.constant(x.clone()), g.leaf(k.clone()), g.leaf(b.clone()));
            let y = xv.conv1d(kv, bv, 1).unwrap().sum();
            g.backward(y).unwrap()
        })
    });
}

fn lstm(c: &mut Criterion) {
    let x = random(&[32, 25, 18], 6);
    let wx = random(&[18, 64], 7);
    let wh = random(&[16, 64], 8);
    let b = random(&[64], 9);
    c.bench_function("lstm forward+backward", |bench| {
        bench.iter(|| {
            let g = Graph::new();
            let y = g
                .constant(x.clone())
                .lstm(
                    g.leaf(wx.clone()),
                    g.leaf(wh.clone()),
                    g.leaf(b.clone()),
                    LstmOptions::default(),
                )
                .unwrap()
                .sum();
            g.backward(y).unwrap()
        })
    });
}

criterion_group!(benches, matmul, conv1d, lstm);
criterion_main!(benches);
