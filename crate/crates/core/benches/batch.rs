use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use affproj::batch::{run_parallel, run_sequential, Job};
use affproj::random::{random_family, FamilySpec};
use affproj::{Algorithm, SolverConfig, WindowPolicy};

fn jobs(count: u64, alg: Algorithm, policy: WindowPolicy) -> Vec<Job> {
    (0..count)
        .map(|seed| {
            let fam = random_family(&FamilySpec::random_shape(seed, 30, 4)).expect("family");
            let mut cfg = SolverConfig::new(alg, policy);
            cfg.options.stop.max_iter = 50_000;
            Job::new(fam.sets, fam.x0, cfg)
        })
        .collect()
}

fn batch(c: &mut Criterion) {
    let mut group = c.benchmark_group("random_families");
    group.sample_size(10);
    for (alg, policy) in [(Algorithm::Alg1, WindowPolicy::LastQ { q: 4 }), (Algorithm::Alg2, WindowPolicy::All)] {
        let work = jobs(48, alg, policy);
        let label = format!("{alg}-{policy}");
        group.bench_with_input(BenchmarkId::new("sequential", &label), &work, |b, w| b.iter(|| run_sequential(w)));
        group.bench_with_input(BenchmarkId::new("parallel", &label), &work, |b, w| b.iter(|| run_parallel(w)));
    }
    group.finish();
}

criterion_group!(benches, batch);
criterion_main!(benches);
