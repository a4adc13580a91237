use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use ergmmd::domain::DomainSampleSet;
use ergmmd::metric::{emmd_states_with_gradient, ProjectionMap};
use ergmmd::{KernelSpec, PointSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<f64> {
    (0..n * dim).map(|_| rng.random()).collect()
}

fn bench_emmd_gradient(c: &mut Criterion) {
    let spec = KernelSpec::rbf(0.2).unwrap();
    let mut group = c.benchmark_group("emmd_gradient");
    for (t, m) in [(64, 256), (128, 512), (256, 1024)] {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let states = uniform(&mut rng, t, 2);
        let samples = DomainSampleSet::new(PointSet::euclidean(2, uniform(&mut rng, m, 2)).unwrap()).unwrap();
        group.throughput(Throughput::Elements((t * (t + m)) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(format!("T{t}_M{m}")), &states, |b, s| {
            b.iter(|| emmd_states_with_gradient(black_box(s), 2, &samples, &spec, &ProjectionMap::Identity).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_emmd_gradient);
criterion_main!(benches);
