//! Step throughput of the two integrators used by the coupled experiment.

use criterion::{criterion_group, criterion_main, Criterion};

use ganflow::dynamics::{meanfield_step, projected_euler, MeanFieldConfig};
use ganflow::geometry::BoxDomain;
use ganflow::model::{Activation, InitDistribution, TargetDistribution};
use ganflow::quad::Quadrature;

fn bench_projected_euler(c: &mut Criterion) {
    let q = BoxDomain::unit(2);
    c.bench_function("projected_euler_rotation_10k_steps", |b| {
        b.iter(|| {
            projected_euler(|x| vec![-x[1], x[0]], &q, &[0.99, 0.99], 1e-3, 10.0).unwrap()
        })
    });
}

fn bench_meanfield_step(c: &mut Criterion) {
    let act = Activation::sigmoid();
    let target = TargetDistribution::bimodal(1);
    let ens = InitDistribution::default()
        .sample_ensemble(1, 1, 128, 128, 3)
        .unwrap();
    let cfg = MeanFieldConfig {
        dt: 0.01,
        horizon: 0.01,
        gamma_c: 1.0,
        quad: Quadrature::deterministic_1d(),
    };
    c.bench_function("meanfield_step_n128_gh64", |b| {
        b.iter(|| meanfield_step(&ens, &cfg, &target, &act, 0).unwrap())
    });
}

criterion_group!(benches, bench_projected_euler, bench_meanfield_step);
criterion_main!(benches);
