use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mmd_fuse::kernels::{build_kernel_bank, gram_stack};
use mmd_fuse::permutation::{permuted_statistics, sample_permutations};
use mmd_fuse::{synth, BankConfig, Execution, FuseVariant, Lambda, PooledSample, Statistic};

fn permutation_statistics(c: &mut Criterion) {
    let mut group = c.benchmark_group("permuted_fuse_n");
    group.sample_size(10);
    for n in [100usize, 250] {
        let x = synth::sample_shifted_gaussian(n, 10, 0.0, 1.0, 1);
        let y = synth::sample_shifted_gaussian(n, 10, 0.0, 1.1f64.sqrt(), 2);
        let z = PooledSample::new(&x, &y).unwrap();
        let stack = gram_stack(&build_kernel_bank(&z, &BankConfig::default()).unwrap(), &z);
        let perms = sample_permutations(2 * n, 200, 7).unwrap();
        let stat = Statistic::Fuse { variant: FuseVariant::Normalised, lambda: Lambda::Auto };
        for (name, exec) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| permuted_statistics(&stack, stat, &perms, exec).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, permutation_statistics);
criterion_main!(benches);
