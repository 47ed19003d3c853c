use std::hint::black_box;

use catrep_core::catqubit::CatQubitParams;
use catrep_core::dynamics::{evolve_constant, liouvillian, CollapseOp, ConstantOptions};
use catrep_core::pulseopt::{fidelity_and_gradient, GrapeProblem};
use catrep_core::qcore::{annihilation, number, QState, C64};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn kerr_setup(dim: usize) -> (catrep_core::qcore::QOperator, Vec<CollapseOp>) {
    let a = annihilation(dim).unwrap();
    let n = number(dim).unwrap();
    let h = n.matmul(&n).unwrap().scale(C64::new(-1.0, 0.0));
    (h, vec![CollapseOp::new(a, 1e-3).unwrap()])
}

fn lindblad(c: &mut Criterion) {
    let mut g = c.benchmark_group("lindblad");
    for dim in [10, 20, 30] {
        let (h, loss) = kerr_setup(dim);
        g.bench_with_input(BenchmarkId::new("liouvillian", dim), &dim, |b, _| {
            b.iter(|| liouvillian(black_box(&h), &loss).unwrap())
        });
        let rho0 = QState::fock(dim, 1).unwrap();
        g.bench_with_input(BenchmarkId::new("evolve_constant", dim), &dim, |b, _| {
            b.iter(|| {
                evolve_constant(
                    &h,
                    &loss,
                    black_box(&rho0),
                    1.0,
                    &ConstantOptions::default(),
                )
                .unwrap()
            })
        });
    }
    g.finish();
}

fn grape_gradient(c: &mut Criterion) {
    let mut g = c.benchmark_group("grape_gradient");
    g.sample_size(20);
    for dim in [12, 20] {
        let problem =
            GrapeProblem::drive(CatQubitParams::new(1.0, 0.0, 2f64.sqrt(), dim).unwrap()).unwrap();
        let u = problem.initial_controls();
        g.bench_with_input(BenchmarkId::from_parameter(dim), &dim, |b, _| {
            b.iter(|| fidelity_and_gradient(&problem, black_box(&u)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, lindblad, grape_gradient);
criterion_main!(benches);
