use criterion::{black_box, criterion_group, criterion_main, Criterion};

use paramid_core::classes::{certify_all, mininorm_path, CertifyOptions};
use paramid_core::identifiability::{standard_directions, ExperimentOptions, STANDARD_EPSILONS};
use paramid_core::{
    builtin_system, identifiability_experiment, observation_set, sensitivity_path, Mode, ObservationSet, SensitivityPath, TimeGrid, ZeroOptions,
    DEFAULT_GRID_POINTS, DEFAULT_INTEGRATOR_TOL,
};

fn setup(name: &str) -> (SensitivityPath, ObservationSet) {
    let spec = builtin_system(name).unwrap();
    let (sys, p0) = spec.build().unwrap();
    let grid = TimeGrid::uniform(0.0, spec.horizon, DEFAULT_GRID_POINTS).unwrap();
    let path = sensitivity_path(&sys, &p0, &grid, DEFAULT_INTEGRATOR_TOL).unwrap();
    let obs = observation_set(&path, spec.mode(), &ZeroOptions::default()).unwrap();
    (path, obs)
}

fn sensitivity(c: &mut Criterion) {
    for name in ["simple-zero", "nonlinear", "tall-mixed"] {
        let spec = builtin_system(name).unwrap();
        let (sys, p0) = spec.build().unwrap();
        let grid = TimeGrid::uniform(0.0, spec.horizon, DEFAULT_GRID_POINTS).unwrap();
        c.bench_function(&format!("sensitivity_path/{name}"), |b| {
            b.iter(|| sensitivity_path(black_box(&sys), &p0, &grid, DEFAULT_INTEGRATOR_TOL).unwrap())
        });
    }
}

fn zeros(c: &mut Criterion) {
    for (name, mode) in [("simple-zero", Mode::K), ("double-zero", Mode::K), ("tall-rank-drop", Mode::H)] {
        let (path, _) = setup(name);
        c.bench_function(&format!("observation_set/{name}"), |b| {
            b.iter(|| observation_set(black_box(&path), mode, &ZeroOptions::default()).unwrap())
        });
    }
}

fn certify(c: &mut Criterion) {
    let (path, obs) = setup("simple-zero");
    let p = path.p0().plus_scaled(1e-2, &standard_directions(1).unwrap()[1].q);
    c.bench_function("certify_all/simple-zero", |b| {
        b.iter(|| certify_all(black_box(&path), &obs, &p, &CertifyOptions::default()).unwrap())
    });
    let (path, obs) = setup("tall-rank-drop");
    c.bench_function("mininorm_path/tall-rank-drop", |b| b.iter(|| mininorm_path(black_box(&path), &obs).unwrap()));
}

fn experiment(c: &mut Criterion) {
    let mut group = c.benchmark_group("experiment");
    group.sample_size(10);
    for name in ["simple-zero", "tall-rank-drop"] {
        let (path, obs) = setup(name);
        let dirs = standard_directions(path.system().l()).unwrap();
        group.bench_function(name, |b| {
            b.iter(|| identifiability_experiment(black_box(&path), &obs, &dirs, &STANDARD_EPSILONS, &ExperimentOptions::default()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sensitivity, zeros, certify, experiment);
criterion_main!(benches);
