use std::hint::black_box;

use affine_euler::fields::{
    canonical_profile, evaluate, functionals_at, pde_residual, GridSpec, QuadratureSpec, ScalarSolution,
};
use affine_euler::integrator::{integrate, IntegrationConfig, Trajectory};
use affine_euler::interior::{boundedness_scan, gauge_preset, GaugeKind, LinearDecay, ScanGrid};
use affine_euler::moments::{scalar_invariants, validate_params, ModelParams, ScalarMomentState, ScalarSystem};
use affine_euler::Exec;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nalgebra::Matrix2;

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn setup() -> (ModelParams, Trajectory<3>) {
    let p = validate_params(2.0, 0.1, 0.5).unwrap();
    let prof = canonical_profile(&p, 4.0, 1.0).unwrap();
    let s0 = ScalarMomentState::new(1.0, 0.2, 0.1);
    let inv = scalar_invariants(&p, &s0, prof.ep0).unwrap();
    let cfg = IntegrationConfig::new(5.0).with_tolerances(1e-12, 1e-14);
    (p, integrate(&ScalarSystem { params: p, inv }, s0.to_array(), 0.0, &cfg).unwrap())
}

fn fields(c: &mut Criterion) {
    let (p, traj) = setup();
    let prof = canonical_profile(&p, 4.0, 1.0).unwrap();
    let sol = ScalarSolution::new(p, &traj, prof).unwrap();
    let points = GridSpec::square(5.0, 301).points();
    let spec = QuadratureSpec::default();
    let grid = GridSpec::square(2.0, 41);

    let mut g = c.benchmark_group("fields");
    for (name, exec) in POLICIES {
        g.bench_with_input(BenchmarkId::new("snapshot_301x301", name), &exec, |b, &e| {
            b.iter(|| evaluate(e, &sol, black_box(2.5), &points).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("functionals", name), &exec, |b, &e| {
            b.iter(|| functionals_at(e, &sol, black_box(2.5), &spec).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("pde_residual_41x41", name), &exec, |b, &e| {
            b.iter(|| pde_residual(e, &sol, &p, black_box(1.0), &grid, 0.01, 0.01).unwrap())
        });
    }
    g.finish();
}

fn interior(c: &mut Criterion) {
    let p = validate_params(2.0, 0.0, 0.0).unwrap();
    let gauge = gauge_preset(&p, GaugeKind::Serre).unwrap();
    let a = LinearDecay { a0: Matrix2::identity() };
    let grid = ScanGrid { t0: 0.0, horizon: 1e7, nodes: 2000 };

    let mut g = c.benchmark_group("interior");
    g.sample_size(20);
    for (name, exec) in POLICIES {
        g.bench_with_input(BenchmarkId::new("boundedness_scan", name), &exec, |b, &e| {
            b.iter(|| boundedness_scan(e, &gauge, &a, 2.0, &grid).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, fields, interior);
criterion_main!(benches);
