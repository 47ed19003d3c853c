use std::hint::black_box;

use catrep_core::repeater::{
    crossover, distribution_rate, monte_carlo_time, ChainParams, DirectParams, LinkParams,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn monte_carlo(c: &mut Criterion) {
    let mut g = c.benchmark_group("monte_carlo_1e4");
    let link = LinkParams::default();
    for n in 0..4 {
        let chain = ChainParams {
            n,
            ..ChainParams::default()
        };
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| monte_carlo_time(&chain, black_box(&link), 10_000, 7).unwrap())
        });
    }
    g.finish();
}

fn crossover_search(c: &mut Criterion) {
    let direct = DirectParams::default();
    let chain = ChainParams {
        n: 3,
        m: 200,
        ..ChainParams::default()
    };
    c.bench_function("crossover_n3_m200", |b| {
        b.iter(|| {
            let scheme = |l: f64| {
                distribution_rate(
                    &chain,
                    &LinkParams {
                        l0_km: l / 8.0,
                        ..LinkParams::default()
                    },
                )
            };
            crossover(scheme, |l| direct.rate(l), black_box((50.0, 1500.0))).unwrap()
        })
    });
}

criterion_group!(benches, monte_carlo, crossover_search);
criterion_main!(benches);
