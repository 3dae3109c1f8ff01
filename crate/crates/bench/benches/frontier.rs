use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use midclass_bench::{monte_carlo, panel_cross_section};
use midclass_core::frontier::{beta_map, refine_continuous, solve_middle_class};
use midclass_core::Objective;

fn surface(c: &mut Criterion) {
    let mc = monte_carlo(100);
    c.bench_function("beta_map/monte_carlo_100/step1", |b| b.iter(|| beta_map(black_box(&mc), 1).unwrap()));
    // roughly the size of a full WID panel
    let big = panel_cross_section(230);
    let mut g = c.benchmark_group("beta_map/panel");
    g.sample_size(10);
    g.bench_function(format!("{}_units/step1", big.len()), |b| b.iter(|| beta_map(black_box(&big), 1).unwrap()));
    g.finish();
}

fn solve(c: &mut Criterion) {
    let mc = monte_carlo(100);
    c.bench_function("solve_middle_class/m50/beta2", |b| {
        b.iter(|| solve_middle_class(black_box(&mc), 50, Objective::BetaSquared, None).unwrap())
    });
    c.bench_function("refine_continuous/m50/quintic", |b| {
        b.iter(|| refine_continuous(black_box(&mc), 50, Objective::RSquared { degree: 5 }).unwrap())
    });
}

criterion_group!(benches, surface, solve);
criterion_main!(benches);
