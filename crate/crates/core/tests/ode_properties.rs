//! Integrator, fundamental matrix and Jacobian properties on the builtin
//! systems.

use paramid_core::expr::{parse_expression, Var};
use paramid_core::ode::{fundamental_matrix, integrate_trajectory, Wrt};
use paramid_core::registry::builtin_systems;
use paramid_core::{ParamFunction, TimeGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn fundamental_matrix_cocycle() {
    for name in ["rotation-2d", "tall-rank-drop", "nonlinear", "affine"] {
        let spec = paramid_core::builtin_system(name).unwrap();
        let (sys, p0) = spec.build().unwrap();
        let grid = TimeGrid::uniform(0.0, 1.0, 201).unwrap();
        let traj = integrate_trajectory(&sys, &p0, 1e-11, &grid).unwrap();
        let (tau, s, t) = (0.1, 0.45, 0.9);
        let y_tau = fundamental_matrix(&sys, &traj, tau).unwrap();
        let y_s = fundamental_matrix(&sys, &traj, s).unwrap();
        let lhs = y_tau.at(t).unwrap();
        let rhs = &y_s.at(t).unwrap() * &y_tau.at(s).unwrap();
        assert!(lhs.sub(&rhs).max_abs() < 1e-8, "{name}: {:?} vs {:?}", lhs, rhs);
    }
}

#[test]
fn halving_the_tolerance_converges() {
    // ẋ = x² + p with x(0) = 0.1 has x(1) = 0.1 / 0.9.
    let (sys, p0) = paramid_core::builtin_system("nonlinear").unwrap().build().unwrap();
    let grid = TimeGrid::uniform(0.0, 1.0, 3).unwrap();
    let exact = 0.1 / 0.9;
    let mut prev = f64::INFINITY;
    for tol in [1e-6, 1e-8, 1e-10] {
        let x1 = integrate_trajectory(&sys, &p0, tol, &grid).unwrap().end_state()[0];
        let err = (x1 - exact).abs();
        assert!(err <= 10.0 * tol, "tol {tol}: error {err}");
        assert!(err <= prev.max(1e-15));
        prev = err;
        let half = integrate_trajectory(&sys, &p0, tol / 2.0, &grid).unwrap().end_state()[0];
        assert!((half - x1).abs() <= 20.0 * tol);
    }
}

#[test]
fn analytic_jacobians_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for spec in builtin_systems() {
        let (sys, _) = spec.build().unwrap();
        for _ in 0..100 {
            let t = rng.random_range(0.0..1.0);
            let x: Vec<f64> = (0..sys.n()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let p: Vec<f64> = (0..sys.l()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (jx, jp) = sys.jacobians(t, &x, &p).unwrap();
            let fx = sys.fd_jacobian(t, &x, &p, Wrt::State).unwrap();
            let fp = sys.fd_jacobian(t, &x, &p, Wrt::Param).unwrap();
            let tol = |m: &paramid_core::Matrix| 1e-6 * m.max_abs().max(1.0);
            assert!(jx.sub(&fx).max_abs() <= tol(&jx), "{}: ∂f/∂x", spec.name);
            assert!(jp.sub(&fp).max_abs() <= tol(&jp), "{}: ∂f/∂p", spec.name);
        }
    }
}

#[test]
fn symbolic_derivatives_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for spec in builtin_systems() {
        for text in &spec.rhs {
            let e = parse_expression(text).unwrap();
            let vars: Vec<Var> = std::iter::once(Var::T)
                .chain((0..spec.n).map(Var::X))
                .chain((0..spec.l).map(Var::P))
                .collect();
            for v in vars {
                let d = e.diff(v);
                for _ in 0..100 {
                    let t = rng.random_range(0.0..1.0);
                    let x: Vec<f64> = (0..spec.n).map(|_| rng.random_range(-2.0..2.0)).collect();
                    let p: Vec<f64> = (0..spec.l).map(|_| rng.random_range(-2.0..2.0)).collect();
                    let exact = d.eval(t, &x, &p);
                    let h = 1e-5;
                    let at = |delta: f64| {
                        let (mut t, mut x, mut p) = (t, x.clone(), p.clone());
                        match v {
                            Var::T => t += delta,
                            Var::X(i) => x[i] += delta,
                            Var::P(j) => p[j] += delta,
                        }
                        e.eval(t, &x, &p)
                    };
                    let fd = (at(h) - at(-h)) / (2.0 * h);
                    assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{text} d/d{v:?}: {exact} vs {fd}");
                }
            }
        }
    }
}

#[test]
fn reference_parameters_have_consistent_derivatives() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for spec in builtin_systems() {
        let (_, p0) = spec.build().unwrap();
        p0.verify_derivative(0.0, spec.horizon, 100, &mut rng).unwrap();
    }
    let bad = ParamFunction::new(1, |t| vec![t * t], |_| vec![0.0], "wrong");
    assert!(bad.verify_derivative(0.0, 1.0, 20, &mut rng).is_err());
}
