use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use wiener_lab::capacity::{p_capacity, CapacityProblem, Region};
use wiener_lab::geometry::{benchmark_domain, BenchParams, Cube};
use wiener_lab::lattice::Lattice;
use wiener_lab::par;
use wiener_lab::pde::{solve_cauchy_dirichlet, BoundaryData, Controls, FluxSpec};

fn condenser(dim: usize, h: f64) -> CapacityProblem {
    let n = (2.0 / h).round() as usize + 1;
    let lat = Lattice::new(dim, h, &vec![-1.0; dim], &vec![n; dim]).unwrap();
    let window = Region::Cube(Cube::new(&vec![0.0; dim], 0.75).unwrap());
    CapacityProblem::from_predicate(&lat, window, 1.8, |x| x.iter().map(|v| v * v).sum::<f64>() <= 0.0625)
}

fn modes(c: &mut Criterion, group: &str, run: impl Fn()) {
    let mut g = c.benchmark_group(group);
    g.sample_size(10);
    for (label, sequential) in [("parallel", false), ("sequential", true)] {
        g.bench_function(BenchmarkId::from_parameter(label), |b| {
            par::set_sequential(sequential);
            b.iter(&run);
        });
    }
    par::set_sequential(false);
    g.finish();
}

fn capacity(c: &mut Criterion) {
    let pr2 = condenser(2, 1.0 / 64.0);
    modes(c, "capacity_2d_h64", || {
        p_capacity(&pr2).unwrap();
    });
    let pr3 = condenser(3, 1.0 / 16.0);
    modes(c, "capacity_3d_h16", || {
        p_capacity(&pr3).unwrap();
    });
}

fn solve(c: &mut Criterion) {
    let d = benchmark_domain("square_with_corner", &BenchParams { h: 1.0 / 32.0, ..Default::default() }).unwrap();
    let g = BoundaryData::from_fn("g", |x, t| x[0] * x[0] - x[1] + t);
    let ctl = Controls {
        dt: Some(0.01),
        ..Default::default()
    };
    modes(c, "solve_2d_h32", || {
        solve_cauchy_dirichlet(&FluxSpec::prototype(1.8), &d, &g, 0.05, &ctl).unwrap();
    });
}

criterion_group!(benches, capacity, solve);
criterion_main!(benches);
