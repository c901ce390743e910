use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use dcae_core::model::build_model;
use dcae_core::nn::{Conv1d, Mode};
use dcae_core::{DcaeConfig, Tensor3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, shape: (usize, usize, usize)) -> Tensor3 {
    let n = shape.0 * shape.1 * shape.2;
    Tensor3::from_vec((0..n).map(|_| rng.random_range(-1.0..1.0)).collect(), shape).unwrap()
}

fn conv(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut layer = Conv1d::new("c", 8, 16, 45, &mut rng).unwrap();
    let x = random(&mut rng, (32, 8, 1000));
    let g = random(&mut rng, (32, 16, 1000));
    c.bench_function("conv1d forward 32x8x1000 k45", |b| {
        b.iter(|| layer.eval(black_box(&x)).unwrap())
    });
    c.bench_function("conv1d forward+backward 32x8x1000 k45", |b| {
        b.iter(|| {
            layer.forward(black_box(&x)).unwrap();
            layer.backward(black_box(&g)).unwrap()
        })
    });
}

fn dcae(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut model = build_model(&DcaeConfig::default(), 0).unwrap();
    let x = random(&mut rng, (32, 1, 1000));
    let mut group = c.benchmark_group("dcae batch 32");
    group.sample_size(10);
    group.bench_function("inference", |b| {
        b.iter(|| model.infer(black_box(&x)).unwrap())
    });
    group.bench_function("training step", |b| {
        b.iter(|| {
            let y = model.forward(black_box(&x), Mode::Train, &mut rng).unwrap();
            model.backward(&y).unwrap()
        })
    });
    group.finish();
}

criterion_group!(benches, conv, dcae);
criterion_main!(benches);
