//! Time grids, sampled vector functions, the sup and integral norms, and the
//! composite quadrature shared by every integral in the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of points of the default analysis grid.
pub const DEFAULT_GRID_POINTS: usize = 2001;

/// A strictly increasing set of sample times covering `[a, b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "time grid needs at least 2 points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("time grid contains non-finite values".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("time grid must be strictly increasing".into()));
        }
        Ok(Self { points })
    }

    /// `count` equally spaced points on `[a, b]`, endpoints included exactly.
    pub fn uniform(a: f64, b: f64, count: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || b <= a {
            return Err(Error::InvalidInput(format!("invalid grid interval [{a}, {b}]")));
        }
        if count < 2 {
            return Err(Error::InvalidInput(format!(
                "time grid needs at least 2 points, got {count}"
            )));
        }
        let last = count - 1;
        let points = (0..count)
            .map(|k| {
                if k == last {
                    b
                } else {
                    a + (b - a) * (k as f64) / (last as f64)
                }
            })
            .collect();
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn a(&self) -> f64 {
        self.points[0]
    }

    pub fn b(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn span(&self) -> f64 {
        self.b() - self.a()
    }
}

/// Values of an `R^m`-valued function on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFunctionSamples {
    grid: TimeGrid,
    values: Vec<Vec<f64>>,
}

impl VectorFunctionSamples {
    pub fn new(grid: TimeGrid, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "{} samples for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        let dim = values.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::InvalidInput("samples must have positive dimension".into()));
        }
        if values.iter().any(|v| v.len() != dim) {
            return Err(Error::InvalidInput("samples have inconsistent dimensions".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn<F>(grid: TimeGrid, mut f: F) -> Result<Self>
    where
        F: FnMut(f64) -> Vec<f64>,
    {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Self::new(grid, values)
    }

    pub fn scalar<F>(grid: TimeGrid, mut f: F) -> Result<Self>
    where
        F: FnMut(f64) -> f64,
    {
        Self::from_fn(grid, |t| vec![f(t)])
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    /// Pointwise Euclidean magnitudes `|q(t_k)|`.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|v| euclidean_norm(v)).collect()
    }
}

pub fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `max_k |q(t_k)|`.
pub fn sup_norm(q: &VectorFunctionSamples) -> f64 {
    q.values.iter().map(|v| euclidean_norm(v)).fold(0.0, f64::max)
}

/// Quadrature approximation of `∫_a^b |q(t)| dt`.
pub fn int_norm(q: &VectorFunctionSamples) -> f64 {
    integrate_scalar(q.grid.points(), &q.magnitudes())
}

/// Componentwise composite Simpson quadrature of `g` over its grid.
pub fn quadrature(g: &VectorFunctionSamples) -> Vec<f64> {
    let weights = quadrature_weights(g.grid.points());
    let mut out = vec![0.0; g.dim()];
    for (w, v) in weights.iter().zip(&g.values) {
        for (acc, x) in out.iter_mut().zip(v) {
            *acc += w * x;
        }
    }
    out
}

/// Composite Simpson integral of scalar samples `f` over nodes `t`.
pub fn integrate_scalar(t: &[f64], f: &[f64]) -> f64 {
    quadrature_weights(t).iter().zip(f).map(|(w, y)| w * y).sum()
}

/// Weights of the composite rule on arbitrary strictly increasing nodes.
///
/// Pairs of panels use the (non-uniform) Simpson rule. With an odd panel
/// count the last panel integrates the quadratic through the last three
/// nodes. Two nodes fall back to the trapezoid rule.
pub fn quadrature_weights(t: &[f64]) -> Vec<f64> {
    let n = t.len();
    let mut w = vec![0.0; n];
    if n < 2 {
        return w;
    }
    if n == 2 {
        let h = t[1] - t[0];
        w[0] = 0.5 * h;
        w[1] = 0.5 * h;
        return w;
    }
    let panels = n - 1;
    let paired = panels - panels % 2;
    let mut k = 0;
    while k < paired {
        let h0 = t[k + 1] - t[k];
        let h1 = t[k + 2] - t[k + 1];
        let s = (h0 + h1) / 6.0;
        w[k] += s * (2.0 - h1 / h0);
        w[k + 1] += s * (h0 + h1) * (h0 + h1) / (h0 * h1);
        w[k + 2] += s * (2.0 - h0 / h1);
        k += 2;
    }
    if panels % 2 == 1 {
        let h0 = t[n - 2] - t[n - 3];
        let h1 = t[n - 1] - t[n - 2];
        w[n - 1] += (2.0 * h1 * h1 + 3.0 * h0 * h1) / (6.0 * (h0 + h1));
        w[n - 2] += (h1 * h1 + 3.0 * h0 * h1) / (6.0 * h0);
        w[n - 3] -= h1 * h1 * h1 / (6.0 * h0 * (h0 + h1));
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(a: f64, b: f64, n: usize) -> TimeGrid {
        TimeGrid::uniform(a, b, n).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(TimeGrid::new(vec![0.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 0.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 1.0, 0.5]).is_err());
        let g = grid(0.0, 3.0, 7);
        assert_eq!(g.a(), 0.0);
        assert_eq!(g.b(), 3.0);
        assert_eq!(g.points()[3], 1.5);
    }

    #[test]
    fn samples_reject_mismatch() {
        let g = grid(0.0, 1.0, 3);
        assert!(VectorFunctionSamples::new(g.clone(), vec![vec![1.0]; 2]).is_err());
        assert!(VectorFunctionSamples::new(g.clone(), vec![vec![1.0], vec![1.0, 2.0], vec![1.0]]).is_err());
        assert!(VectorFunctionSamples::new(g, vec![vec![]; 3]).is_err());
    }

    #[test]
    fn sup_norm_examples() {
        let q = VectorFunctionSamples::scalar(grid(0.0, 1.0, 101), |t| t).unwrap();
        assert_eq!(sup_norm(&q), 1.0);
        let q = VectorFunctionSamples::scalar(grid(0.0, 3.0, 31), |_| -2.0).unwrap();
        assert_eq!(sup_norm(&q), 2.0);
        let q = VectorFunctionSamples::scalar(grid(0.0, 1.0, 1001), |t| (2.0 * PI * t).sin()).unwrap();
        assert!((sup_norm(&q) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn int_norm_examples() {
        let q = VectorFunctionSamples::scalar(grid(0.0, 2.0, 21), |_| 1.0).unwrap();
        assert!((int_norm(&q) - 2.0).abs() < 1e-14);
        let q = VectorFunctionSamples::scalar(grid(0.0, 1.0, 101), |t| t).unwrap();
        assert!((int_norm(&q) - 0.5).abs() < 1e-8);
        let q = VectorFunctionSamples::scalar(grid(0.0, 1.0, 2001), |t| (2.0 * PI * t).sin()).unwrap();
        assert!((int_norm(&q) - 2.0 / PI).abs() < 1e-6);
    }

    #[test]
    fn quadrature_examples() {
        let g = VectorFunctionSamples::from_fn(grid(0.0, 1.0, 11), |_| vec![1.0, 2.0]).unwrap();
        let v = quadrature(&g);
        assert!((v[0] - 1.0).abs() < 1e-14 && (v[1] - 2.0).abs() < 1e-14);
        let g = VectorFunctionSamples::scalar(grid(0.0, 1.0, 3), |t| t * t).unwrap();
        assert!((quadrature(&g)[0] - 1.0 / 3.0).abs() < 1e-15);
        let g = VectorFunctionSamples::scalar(grid(0.0, 1.0, 101), f64::exp).unwrap();
        assert!((quadrature(&g)[0] - (1f64.exp() - 1.0)).abs() < 1e-8);
    }

    #[test]
    fn two_point_grid_is_trapezoid() {
        let g = VectorFunctionSamples::scalar(grid(0.0, 2.0, 2), |t| t).unwrap();
        assert!((quadrature(&g)[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn cubic_exact_on_even_panels_and_odd_tail_is_quadratic_exact() {
        let g = VectorFunctionSamples::scalar(grid(0.0, 2.0, 9), |t| t * t * t - t).unwrap();
        assert!((quadrature(&g)[0] - 2.0).abs() < 1e-13);
        // 4 panels + odd tail on a non-uniform grid.
        let t = vec![0.0, 0.1, 0.3, 0.45, 0.7, 1.0];
        let f: Vec<f64> = t.iter().map(|x| 3.0 * x * x - 2.0 * x + 1.0).collect();
        assert!((integrate_scalar(&t, &f) - 1.0).abs() < 1e-13);
    }
}
