//! Exact assignment solver cost against cloud size (cubic-time shortest
//! augmenting paths).

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};

use ganflow::transport::{wasserstein_assignment, OrderP, PointCloud};

fn random_cloud(n: usize, d: usize, seed: u64) -> PointCloud {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    PointCloud::new(
        (0..n)
            .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect(),
    )
    .unwrap()
}

fn bench_assignment(c: &mut Criterion) {
    let mut group = c.benchmark_group("assignment");
    for n in [32usize, 128, 512] {
        let xs = random_cloud(n, 3, 1);
        let ys = random_cloud(n, 3, 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| wasserstein_assignment(OrderP::P2, &xs, &ys).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_assignment);
criterion_main!(benches);
