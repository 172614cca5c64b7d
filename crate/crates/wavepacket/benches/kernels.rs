//! Boundary-integral kernels on one thread against the full rayon pool.
//!
//! Without the `parallel` feature both variants run the sequential fallback.

use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use wavepacket::curveops::Curve;
use wavepacket::evolve;
use wavepacket::quantities::CurveState;
use wavepacket::spectral::{Field, Grid, C64, I};

fn wavy(n: usize) -> (Field, Field) {
    let g = Grid::new(n, 2.0 * PI).unwrap();
    let xi = Field::from_fn(g, |a| C64::from_polar(0.05, a) + C64::from_polar(0.01, 3.0 * a));
    let u = xi.scale(I);
    (xi, u)
}

fn pools() -> [(&'static str, rayon::ThreadPool); 2] {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let all = rayon::ThreadPoolBuilder::new().build().unwrap();
    [("sequential", one), ("parallel", all)]
}

fn kernels(c: &mut Criterion) {
    let pools = pools();
    let mut group = c.benchmark_group("curve_hilbert");
    for n in [256usize, 512] {
        let (xi, u) = wavy(n);
        let curve = Curve::from_perturbation(&xi).unwrap();
        for (name, pool) in &pools {
            group.bench_with_input(BenchmarkId::new(*name, n), &n, |b, _| {
                pool.install(|| b.iter(|| black_box(curve.hilbert(&u))))
            });
        }
    }
    group.finish();

    let mut group = c.benchmark_group("curve_state");
    group.sample_size(10);
    let (xi, u) = wavy(256);
    for (name, pool) in &pools {
        group.bench_function(*name, |b| {
            pool.install(|| b.iter(|| black_box(CurveState::new(&xi, u.clone(), 0.0).unwrap())))
        });
    }
    group.finish();

    let mut group = c.benchmark_group("rk4_step");
    group.sample_size(10);
    let state = CurveState::new(&xi, u, 0.0).unwrap();
    for (name, pool) in &pools {
        group.bench_function(*name, |b| {
            pool.install(|| b.iter(|| black_box(evolve::step(&state, 0.05, 1e-13).unwrap())))
        });
    }
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
