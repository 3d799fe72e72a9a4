//! Norm axioms for the sampled sup and integral norms.

use paramid_core::grid::{int_norm, sup_norm, TimeGrid, VectorFunctionSamples};
use proptest::prelude::*;

fn samples(coefs: &[f64], grid: &TimeGrid) -> VectorFunctionSamples {
    let c = coefs.to_vec();
    VectorFunctionSamples::from_fn(grid.clone(), move |t| vec![c[0] + c[1] * t + c[2] * (5.0 * t).sin(), c[3] * t * t]).unwrap()
}

fn add(a: &VectorFunctionSamples, b: &VectorFunctionSamples) -> VectorFunctionSamples {
    let v = a.values().iter().zip(b.values()).map(|(x, y)| x.iter().zip(y).map(|(u, w)| u + w).collect()).collect();
    VectorFunctionSamples::new(a.grid().clone(), v).unwrap()
}

proptest! {
    #[test]
    fn norm_axioms(
        a in prop::collection::vec(-3.0f64..3.0, 4),
        b in prop::collection::vec(-3.0f64..3.0, 4),
        c in -5.0f64..5.0,
        len in 0.1f64..3.0,
        pts in 3usize..400,
    ) {
        let grid = TimeGrid::uniform(0.0, len, pts).unwrap();
        let (qa, qb) = (samples(&a, &grid), samples(&b, &grid));
        for norm in [sup_norm as fn(&VectorFunctionSamples) -> f64, int_norm] {
            let na = norm(&qa);
            prop_assert!(na >= 0.0);
            let scaled: Vec<Vec<f64>> = qa.values().iter().map(|v| v.iter().map(|x| c * x).collect()).collect();
            let ns = norm(&VectorFunctionSamples::new(grid.clone(), scaled).unwrap());
            prop_assert!((ns - c.abs() * na).abs() <= 1e-12 * (1.0 + na * c.abs()));
        }
        // Simpson weights are positive for uniform grids, so the integral
        // norm is subadditive and dominated by span × sup.
        prop_assert!(sup_norm(&add(&qa, &qb)) <= sup_norm(&qa) + sup_norm(&qb) + 1e-12);
        prop_assert!(int_norm(&add(&qa, &qb)) <= int_norm(&qa) + int_norm(&qb) + 1e-12);
        prop_assert!(int_norm(&qa) <= len * sup_norm(&qa) * (1.0 + 1e-12) + 1e-12);
    }
}

#[test]
fn zero_function_has_zero_norms() {
    let grid = TimeGrid::uniform(0.0, 1.0, 11).unwrap();
    let z = VectorFunctionSamples::scalar(grid, |_| 0.0).unwrap();
    assert_eq!((sup_norm(&z), int_norm(&z)), (0.0, 0.0));
}
