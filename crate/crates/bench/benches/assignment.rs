use aapa_bench::random_costs;
use aapa_core::solve_assignment;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn square(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_assignment");
    for n in [4usize, 8, 16, 32, 64] {
        let m = random_costs(n, n, n as u64);
        group.bench_with_input(BenchmarkId::new("square", n), &m, |b, m| b.iter(|| solve_assignment(black_box(m))));
    }
    for (r, c_) in [(8usize, 32usize), (32, 8)] {
        let m = random_costs(r, c_, 7);
        group.bench_with_input(BenchmarkId::new("rect", format!("{r}x{c_}")), &m, |b, m| {
            b.iter(|| solve_assignment(black_box(m)))
        });
    }
    group.finish();
}

criterion_group!(benches, square);
criterion_main!(benches);
