use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use octacage_bench::config_with_points;
use octacage_core::quadrature::{integrate_volume, QuadratureSpec};
use octacage_core::{solve, DynamicProblem, StaticProblem};

fn volume_integration(c: &mut Criterion) {
    let mut group = c.benchmark_group("volume_integration");
    for points in [10_000usize, 100_000] {
        let spec = QuadratureSpec {
            points,
            ..QuadratureSpec::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(points), &spec, |b, spec| {
            b.iter(|| integrate_volume(|x| (-x.norm()).exp(), spec).unwrap())
        });
    }
    group.finish();
}

fn static_assembly(c: &mut Criterion) {
    let problem = StaticProblem::new(&config_with_points(20_000)).unwrap();
    c.bench_function("static_matrix_20k", |b| b.iter(|| problem.matrix(0.5).unwrap()));
}

fn dynamic_solve(c: &mut Criterion) {
    let config = config_with_points(4_800);
    let problem = DynamicProblem::new(&config).unwrap();
    let pair = problem.matrix().unwrap();
    c.bench_function("dynamic_matrix_4800", |b| b.iter(|| problem.matrix().unwrap()));
    c.bench_function("eigensolve_64", |b| {
        b.iter(|| solve(&pair, config.overlap_threshold).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = volume_integration, static_assembly, dynamic_solve
}
criterion_main!(benches);
