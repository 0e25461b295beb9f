use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use mpcrange::assignment::hungarian;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bench_hungarian(c: &mut Criterion) {
    let mut group = c.benchmark_group("hungarian");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [4usize, 12, 40] {
        let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.gen::<f64>()).collect()).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &cost, |b, cost| b.iter(|| hungarian(black_box(cost))));
    }
    group.finish();
}

criterion_group!(benches, bench_hungarian);
criterion_main!(benches);
