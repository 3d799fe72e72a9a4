//! Linearity of Ψ, scale behaviour of the order fit and of α̂, β̂, and the
//! zero-finder invariants.

use paramid_core::classes::{certify_membership, estimate_alpha, estimate_beta, CertifyOptions};
use paramid_core::zeros::{estimate_order, find_zeros, observation_set, Mode, ZeroOptions};
use paramid_core::{sensitivity_path, ParamFunction, SensitivityPath, TimeGrid, DEFAULT_GRID_POINTS};
use proptest::prelude::*;

fn builtin_path(name: &str) -> SensitivityPath {
    let (sys, p0) = paramid_core::builtin_system(name).unwrap().build().unwrap();
    let grid = TimeGrid::uniform(0.0, 1.0, DEFAULT_GRID_POINTS).unwrap();
    sensitivity_path(&sys, &p0, &grid, 1e-10).unwrap()
}

fn poly(c: [f64; 3], l: usize) -> ParamFunction {
    ParamFunction::broadcast(l, move |t| c[0] + c[1] * t + c[2] * t * t, move |t| c[1] + 2.0 * c[2] * t, "poly")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn psi_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, c1 in prop::array::uniform3(-2.0f64..2.0), c2 in prop::array::uniform3(-2.0f64..2.0)) {
        let path = builtin_path("tall-rank-drop");
        let y = path.fundamental(0.2).unwrap();
        let k = path.psi_kernel(&y, 0.2, 0.9).unwrap();
        let (q1, q2) = (poly(c1, 1), poly(c2, 1));
        let combo = q1.scaled(a).plus_scaled(b, &q2);
        let lhs = k.apply(&combo).unwrap().value;
        let (v1, v2) = (k.apply(&q1).unwrap().value, k.apply(&q2).unwrap().value);
        for i in 0..lhs.len() {
            let rhs = a * v1[i] + b * v2[i];
            prop_assert!((lhs[i] - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn order_fit_is_scale_equivariant(c in 2.0f64..10.0, nu in 1i32..4, h in 0.5f64..3.0) {
        let g = move |t: f64| Ok(h * (t - 0.4).powi(nu) * (1.0 + 0.3 * (t - 0.4)));
        let opts = ZeroOptions::default();
        let base = estimate_order(g, 0.4, 0.05, (0.0, 1.0), Mode::K, &opts).unwrap();
        let scaled = estimate_order(move |t| g(t).map(|v| c * v), 0.4, 0.05, (0.0, 1.0), Mode::K, &opts).unwrap();
        prop_assert_eq!(base.nu, nu as u32);
        prop_assert_eq!(scaled.nu, base.nu);
        prop_assert!((scaled.h - c * base.h).abs() <= 1e-9 * (c * base.h).abs());
    }

    #[test]
    fn alpha_and_beta_are_scale_invariant(c in prop::array::uniform3(-2.0f64..2.0), s in 0.01f64..100.0) {
        let q = poly(c, 1);
        prop_assume!(c.iter().any(|v| v.abs() > 1e-3));
        let a1 = estimate_alpha(&q, 0.0, 1.0, 501).unwrap();
        let a2 = estimate_alpha(&q.scaled(s), 0.0, 1.0, 501).unwrap();
        prop_assert!((a1 - a2).abs() <= 1e-10);
        prop_assert!(a1 > 0.0 && a1 <= 1.0 + 1e-12);

        let path = builtin_path("affine");
        let y = path.fundamental(0.0).unwrap();
        let k = path.psi_kernel(&y, 0.0, 1.0).unwrap();
        let b1 = estimate_beta(&k, &q).unwrap();
        let b2 = estimate_beta(&k, &q.scaled(s)).unwrap();
        prop_assert!((b1 - b2).abs() <= 1e-10);
    }

    #[test]
    fn zeros_are_isolated_and_small(r in prop::collection::vec(0.02f64..0.98, 1..4)) {
        let roots = r.clone();
        let g = move |t: f64| Ok(roots.iter().map(|z| t - z).product::<f64>());
        let grid = TimeGrid::uniform(0.0, 1.0, 2001).unwrap();
        let opts = ZeroOptions::default();
        let found = find_zeros(&g, &grid, Mode::K, &opts).unwrap();
        let max_g = grid.points().iter().map(|&t| g(t).unwrap().abs()).fold(0.0, f64::max);
        for w in found.windows(2) {
            prop_assert!(w[1] - w[0] >= 10.0 * opts.bracket_rel);
        }
        for z in &found {
            prop_assert!(g(*z).unwrap().abs() <= opts.touch_rel * max_g);
        }
    }
}

#[test]
fn h_mode_never_reports_odd_orders() {
    for name in ["tall-rank-drop", "tall-mixed", "double-zero-tall"] {
        let obs = observation_set(&builtin_path(name), Mode::H, &ZeroOptions::default()).unwrap();
        assert!(obs.points.iter().all(|p| p.order % 2 == 0), "{name}");
    }
    assert!(observation_set(&builtin_path("double-zero"), Mode::H, &ZeroOptions::default()).is_err());
}

#[test]
fn certified_constants_are_scale_invariant() {
    let path = builtin_path("simple-zero");
    let obs = observation_set(&path, Mode::K, &ZeroOptions::default()).unwrap();
    let q = poly([0.3, 1.0, -0.5], 1);
    let opts = CertifyOptions::default();
    for k in 0..obs.interval_count() {
        let a = certify_membership(&path, &obs, &q, k, &opts).unwrap();
        let b = certify_membership(&path, &obs, &q.scaled(7.0), k, &opts).unwrap();
        assert!((a.alpha - b.alpha).abs() <= 1e-10 && (a.beta - b.beta).abs() <= 1e-10);
        assert_eq!(a.passed, b.passed);
    }
}
