use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use midclass_bench::democracy_table;
use midclass_core::panel_analysis::{midclass_comparison, percentile_sweep, MidclassDef};
use midclass_core::{CovariateKey, QuantileInterval};

fn democracy(c: &mut Criterion) {
    let table = democracy_table(150);
    let key = CovariateKey::VdemPolyarchy;
    let defs = [MidclassDef::Interval(QuantileInterval::new(48, 98).unwrap())];
    let maps = BTreeMap::new();
    c.bench_function("panel_fe/one_definition", |b| {
        b.iter(|| midclass_comparison(black_box(&table), key, &defs, &maps).unwrap())
    });
    let mut g = c.benchmark_group("panel_fe");
    g.sample_size(10);
    g.bench_function("percentile_sweep", |b| b.iter(|| percentile_sweep(black_box(&table), key).unwrap()));
    g.finish();
}

criterion_group!(benches, democracy);
criterion_main!(benches);
