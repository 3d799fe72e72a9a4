//! The parametrised system `x' = f(t, x, p(t))`, its trajectories and the
//! fundamental matrices of the variational equation along the reference.

pub mod dopri;

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::linalg::{singular_values, Lu, Matrix};

pub use dopri::{DenseSolution, Dopri5Options};

/// Default integrator tolerance (relative and absolute).
pub const DEFAULT_INTEGRATOR_TOL: f64 = 1e-10;

const MAX_CONDITION: f64 = 1e12;

pub type RhsFn = dyn Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync;
pub type JacobianFn = dyn Fn(f64, &[f64], &[f64]) -> Matrix + Send + Sync;
pub type CurveFn = dyn Fn(f64) -> Vec<f64> + Send + Sync;

/// Right-hand side `f(t, x, p)` together with dimensions, horizon and the
/// initial state.
#[derive(Clone)]
pub struct SystemModel {
    name: String,
    n: usize,
    l: usize,
    horizon: f64,
    x0: Vec<f64>,
    rhs: Arc<RhsFn>,
    jac_x: Option<Arc<JacobianFn>>,
    jac_p: Option<Arc<JacobianFn>>,
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("l", &self.l)
            .field("horizon", &self.horizon)
            .field("x0", &self.x0)
            .field("analytic_jacobians", &(self.jac_x.is_some(), self.jac_p.is_some()))
            .finish()
    }
}

impl SystemModel {
    pub fn new<F>(n: usize, l: usize, horizon: f64, x0: Vec<f64>, rhs: F) -> Result<Self>
    where
        F: Fn(f64, &[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        if n == 0 || l == 0 {
            return Err(Error::InvalidInput("state and parameter dimensions must be positive".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
        }
        if x0.len() != n {
            return Err(Error::InvalidInput(format!(
                "initial state has {} components, expected {n}",
                x0.len()
            )));
        }
        Ok(Self {
            name: String::from("unnamed"),
            n,
            l,
            horizon,
            x0,
            rhs: Arc::new(rhs),
            jac_x: None,
            jac_p: None,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_jacobians<JX, JP>(mut self, jac_x: JX, jac_p: JP) -> Self
    where
        JX: Fn(f64, &[f64], &[f64]) -> Matrix + Send + Sync + 'static,
        JP: Fn(f64, &[f64], &[f64]) -> Matrix + Send + Sync + 'static,
    {
        self.jac_x = Some(Arc::new(jac_x));
        self.jac_p = Some(Arc::new(jac_p));
        self
    }

    /// Drops the analytic Jacobians so finite differences are used.
    pub fn without_jacobians(mut self) -> Self {
        self.jac_x = None;
        self.jac_p = None;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn has_analytic_jacobians(&self) -> bool {
        self.jac_x.is_some() && self.jac_p.is_some()
    }

    /// Evaluates `f(t, x, p)`, checking dimension and finiteness.
    pub fn rhs(&self, t: f64, x: &[f64], p: &[f64]) -> Result<Vec<f64>> {
        let v = (self.rhs)(t, x, p);
        if v.len() != self.n {
            return Err(Error::InvalidInput(format!(
                "right-hand side returned {} components, expected {}",
                v.len(),
                self.n
            )));
        }
        if v.iter().any(|y| !y.is_finite()) {
            return Err(Error::DomainViolation {
                t,
                reason: "non-finite right-hand side".into(),
            });
        }
        Ok(v)
    }

    /// `(∂f/∂x, ∂f/∂p)` at `(t, x, p)`.
    pub fn jacobians(&self, t: f64, x: &[f64], p: &[f64]) -> Result<(Matrix, Matrix)> {
        Ok((self.jacobian_x(t, x, p)?, self.jacobian_p(t, x, p)?))
    }

    pub fn jacobian_x(&self, t: f64, x: &[f64], p: &[f64]) -> Result<Matrix> {
        match &self.jac_x {
            Some(j) => checked_jacobian(j(t, x, p), self.n, self.n, t),
            None => self.fd_jacobian(t, x, p, Wrt::State),
        }
    }

    pub fn jacobian_p(&self, t: f64, x: &[f64], p: &[f64]) -> Result<Matrix> {
        match &self.jac_p {
            Some(j) => checked_jacobian(j(t, x, p), self.n, self.l, t),
            None => self.fd_jacobian(t, x, p, Wrt::Param),
        }
    }

    /// Central differences with `h_j = cbrt(eps) * max(1, |z_j|)`.
    pub fn fd_jacobian(&self, t: f64, x: &[f64], p: &[f64], wrt: Wrt) -> Result<Matrix> {
        let cols = match wrt {
            Wrt::State => self.n,
            Wrt::Param => self.l,
        };
        let mut jac = Matrix::zeros(self.n, cols);
        let mut xs = x.to_vec();
        let mut ps = p.to_vec();
        for j in 0..cols {
            let z = match wrt {
                Wrt::State => x[j],
                Wrt::Param => p[j],
            };
            let h = f64::EPSILON.cbrt() * z.abs().max(1.0);
            let set = |xs: &mut Vec<f64>, ps: &mut Vec<f64>, v: f64| match wrt {
                Wrt::State => xs[j] = v,
                Wrt::Param => ps[j] = v,
            };
            set(&mut xs, &mut ps, z + h);
            let fp = self.rhs(t, &xs, &ps)?;
            set(&mut xs, &mut ps, z - h);
            let fm = self.rhs(t, &xs, &ps)?;
            set(&mut xs, &mut ps, z);
            for i in 0..self.n {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        Ok(jac)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wrt {
    State,
    Param,
}

fn checked_jacobian(m: Matrix, rows: usize, cols: usize, t: f64) -> Result<Matrix> {
    if m.rows() != rows || m.cols() != cols {
        return Err(Error::InvalidInput(format!(
            "analytic Jacobian is {}x{}, expected {rows}x{cols}",
            m.rows(),
            m.cols()
        )));
    }
    if m.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::DomainViolation {
            t,
            reason: "non-finite Jacobian".into(),
        });
    }
    Ok(m)
}

/// A `C¹` parameter-function `p: I -> R^l` with its derivative.
#[derive(Clone)]
pub struct ParamFunction {
    dim: usize,
    eval: Arc<CurveFn>,
    deriv: Arc<CurveFn>,
    description: String,
}

impl fmt::Debug for ParamFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ParamFunction({}, dim {})", self.description, self.dim)
    }
}

impl ParamFunction {
    pub fn new<E, D>(dim: usize, eval: E, deriv: D, description: impl Into<String>) -> Self
    where
        E: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
        D: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    {
        Self {
            dim,
            eval: Arc::new(eval),
            deriv: Arc::new(deriv),
            description: description.into(),
        }
    }

    pub fn constant(values: Vec<f64>) -> Self {
        let dim = values.len();
        let desc = format!("const{values:?}");
        Self::new(dim, move |_| values.clone(), move |_| vec![0.0; dim], desc)
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, move |_| vec![0.0; dim], move |_| vec![0.0; dim], "0")
    }

    /// The same scalar function `phi` in every component.
    pub fn broadcast<E, D>(dim: usize, phi: E, dphi: D, description: impl Into<String>) -> Self
    where
        E: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::new(dim, move |t| vec![phi(t); dim], move |t| vec![dphi(t); dim], description)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        (self.eval)(t)
    }

    pub fn deriv(&self, t: f64) -> Vec<f64> {
        (self.deriv)(t)
    }

    /// `self + c * other`.
    pub fn plus_scaled(&self, c: f64, other: &ParamFunction) -> ParamFunction {
        assert_eq!(self.dim, other.dim, "parameter dimensions differ");
        let (a, b) = (self.clone(), other.clone());
        let (da, db) = (self.clone(), other.clone());
        let desc = format!("{} + {c:e}*({})", self.description, other.description);
        Self::new(
            self.dim,
            move |t| a.eval(t).iter().zip(b.eval(t)).map(|(x, y)| x + c * y).collect(),
            move |t| da.deriv(t).iter().zip(db.deriv(t)).map(|(x, y)| x + c * y).collect(),
            desc,
        )
    }

    /// `self - other`.
    pub fn minus(&self, other: &ParamFunction) -> ParamFunction {
        let mut d = self.plus_scaled(-1.0, other);
        d.description = format!("({}) - ({})", self.description, other.description);
        d
    }

    pub fn scaled(&self, c: f64) -> ParamFunction {
        ParamFunction::zero(self.dim).plus_scaled(c, self)
    }

    /// Checks `deriv` against central differences of `eval` at random points
    /// of `[a, b]` (relative tolerance `1e-6`).
    pub fn verify_derivative<R: Rng>(&self, a: f64, b: f64, samples: usize, rng: &mut R) -> Result<()> {
        for _ in 0..samples {
            let t = rng.random_range(a..=b);
            let h = 1e-5 * t.abs().max(1.0);
            let fp = self.eval(t + h);
            let fm = self.eval(t - h);
            let d = self.deriv(t);
            if d.len() != self.dim || fp.len() != self.dim {
                return Err(Error::InvalidInput(format!(
                    "parameter `{}` has inconsistent dimension",
                    self.description
                )));
            }
            for i in 0..self.dim {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                let scale = d[i].abs().max(fd.abs()).max(1.0);
                if (fd - d[i]).abs() > 1e-6 * scale {
                    return Err(Error::InvalidInput(format!(
                        "derivative of parameter `{}` disagrees with finite differences at t = {t}: {} vs {fd}",
                        self.description, d[i]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Solution `x(t, {p})` on `[0, T]`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    grid: TimeGrid,
    states: Vec<Vec<f64>>,
    dense: DenseSolution,
    param: ParamFunction,
    integrator_tol: f64,
}

impl Trajectory {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn param(&self) -> &ParamFunction {
        &self.param
    }

    pub fn integrator_tol(&self) -> f64 {
        self.integrator_tol
    }

    pub fn steps(&self) -> usize {
        self.dense.steps()
    }

    /// Dense-output state at any `t` in `[0, T]`.
    pub fn state_at(&self, t: f64) -> Vec<f64> {
        self.dense.eval(t)
    }

    pub fn end_state(&self) -> &[f64] {
        self.dense.end_state()
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("integrator tolerance must be positive, got {tol}")))
    }
}

/// Integrates `x' = f(t, x, p(t))` from `(t_start, x_start)` to `t_end`.
pub fn integrate_from(
    system: &SystemModel,
    p: &ParamFunction,
    t_start: f64,
    x_start: &[f64],
    t_end: f64,
    tol: f64,
) -> Result<DenseSolution> {
    check_tol(tol)?;
    if p.dim() != system.l() {
        return Err(Error::InvalidInput(format!(
            "parameter has dimension {}, system expects {}",
            p.dim(),
            system.l()
        )));
    }
    dopri::integrate(
        |t, x, dx| {
            let pv = p.eval(t);
            let v = system.rhs(t, x, &pv).map_err(|e| match e {
                Error::DomainViolation { t, reason } => Error::IntegrationFailure { t, reason },
                other => other,
            })?;
            dx.copy_from_slice(&v);
            Ok(())
        },
        t_start,
        x_start,
        t_end,
        &Dopri5Options::with_tol(tol),
    )
}

/// Reference or perturbed trajectory on `[0, T]` sampled onto `grid`.
pub fn integrate_trajectory(system: &SystemModel, p: &ParamFunction, tol: f64, grid: &TimeGrid) -> Result<Trajectory> {
    if (grid.a() - 0.0).abs() > 0.0 || (grid.b() - system.horizon()).abs() > 1e-12 * system.horizon() {
        return Err(Error::InvalidInput(format!(
            "analysis grid must cover [0, {}], got [{}, {}]",
            system.horizon(),
            grid.a(),
            grid.b()
        )));
    }
    let dense = integrate_from(system, p, 0.0, system.x0(), system.horizon(), tol)?;
    let states = grid.points().iter().map(|&t| dense.eval(t)).collect();
    Ok(Trajectory {
        grid: grid.clone(),
        states,
        dense,
        param: p.clone(),
        integrator_tol: tol,
    })
}

/// `Y_τ(t)` on `[τ, T]`, solving `Y' = ∂f/∂x(t, x(t,{p₀}), p₀(t)) Y`, `Y(τ) = I`.
#[derive(Debug, Clone)]
pub struct FundamentalMatrix {
    tau: f64,
    n: usize,
    dense: DenseSolution,
}

impl FundamentalMatrix {
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn t_end(&self) -> f64 {
        self.dense.t_end()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * self.dense.t_end().abs().max(1.0);
        if t < self.tau - slack || t > self.dense.t_end() + slack {
            return Err(Error::InvalidInput(format!(
                "Y_tau with tau = {} queried at t = {t} outside [{}, {}]",
                self.tau,
                self.tau,
                self.dense.t_end()
            )));
        }
        Ok(())
    }

    pub fn at(&self, t: f64) -> Result<Matrix> {
        self.check_time(t)?;
        Matrix::from_row_major(self.n, self.n, self.dense.eval(t))
            .map_err(|_| Error::NumericalDegeneracy(format!("non-finite fundamental matrix at t = {t}")))
    }

    fn lu_at(&self, t: f64) -> Result<Lu> {
        let y = self.at(t)?;
        let sv = singular_values(&y);
        let cond = sv[sv.len() - 1] / sv[0];
        if !(cond <= MAX_CONDITION) {
            return Err(Error::NumericalDegeneracy(format!(
                "fundamental matrix condition number {cond:e} at t = {t}"
            )));
        }
        Lu::new(&y)
    }

    pub fn inverse_at(&self, t: f64) -> Result<Matrix> {
        self.lu_at(t)?.inverse()
    }

    /// `Y_τ(t)⁻¹ M` by LU solve.
    pub fn inverse_times(&self, t: f64, m: &Matrix) -> Result<Matrix> {
        self.lu_at(t)?.solve_matrix(m)
    }
}

/// Integrates the matrix variational equation from `Y(τ) = I` to `T`
/// along `reference`.
pub fn fundamental_matrix(system: &SystemModel, reference: &Trajectory, tau: f64) -> Result<FundamentalMatrix> {
    let horizon = system.horizon();
    if !(0.0..horizon).contains(&tau) {
        return Err(Error::InvalidInput(format!("tau = {tau} must lie in [0, {horizon})")));
    }
    let n = system.n();
    let p0 = reference.param();
    let y0 = Matrix::identity(n).as_slice().to_vec();
    let mut x = vec![0.0; n];
    let dense = dopri::integrate(
        |t, y, dy| {
            reference.dense.eval_into(t, &mut x);
            let a = system.jacobian_x(t, &x, &p0.eval(t)).map_err(|e| match e {
                Error::DomainViolation { t, reason } => Error::IntegrationFailure { t, reason },
                other => other,
            })?;
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for k in 0..n {
                        s += a[(i, k)] * y[k * n + j];
                    }
                    dy[i * n + j] = s;
                }
            }
            Ok(())
        },
        tau,
        &y0,
        horizon,
        &Dopri5Options::with_tol(reference.integrator_tol()),
    )?;
    Ok(FundamentalMatrix { tau, n, dense })
}
