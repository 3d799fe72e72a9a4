//! Sensitivity matrix `𝒟(t) = ∂f/∂p` and Gram matrix `ℬ = 𝒟ᵀ𝒟` along the
//! reference trajectory, the linear map `Ψ_{τ,θ}` and the linearisation
//! remainder `G_{τ,θ}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{euclidean_norm, integrate_scalar, quadrature_weights, TimeGrid};
use crate::linalg::{determinant, spectral_norm, Matrix};
use crate::ode::{fundamental_matrix, integrate_from, integrate_trajectory, FundamentalMatrix, ParamFunction, SystemModel, Trajectory};
use crate::zeros::Mode;

/// Minimum number of panels used to resolve an integral over a subinterval.
pub const MIN_INTERVAL_PANELS: usize = 64;

/// Reference solution with `𝒟` and `ℬ` sampled on the analysis grid.
///
/// Also serves as the evaluation context for everything that needs
/// `x(t, {p₀})` or `𝒟(t)` off the grid.
#[derive(Debug, Clone)]
pub struct SensitivityPath {
    system: SystemModel,
    grid: TimeGrid,
    d_values: Vec<Matrix>,
    b_values: Vec<Matrix>,
    reference: Trajectory,
}

pub fn sensitivity_path(system: &SystemModel, p0: &ParamFunction, grid: &TimeGrid, tol: f64) -> Result<SensitivityPath> {
    let reference = integrate_trajectory(system, p0, tol, grid)?;
    let mut d_values = Vec::with_capacity(grid.len());
    let mut b_values = Vec::with_capacity(grid.len());
    for (&t, x) in grid.points().iter().zip(reference.states()) {
        let d = system.jacobian_p(t, x, &p0.eval(t))?;
        b_values.push(d.gram());
        d_values.push(d);
    }
    Ok(SensitivityPath {
        system: system.clone(),
        grid: grid.clone(),
        d_values,
        b_values,
        reference,
    })
}

impl SensitivityPath {
    pub fn system(&self) -> &SystemModel {
        &self.system
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn d_values(&self) -> &[Matrix] {
        &self.d_values
    }

    pub fn b_values(&self) -> &[Matrix] {
        &self.b_values
    }

    pub fn reference(&self) -> &Trajectory {
        &self.reference
    }

    pub fn p0(&self) -> &ParamFunction {
        self.reference.param()
    }

    pub fn horizon(&self) -> f64 {
        self.system.horizon()
    }

    pub fn integrator_tol(&self) -> f64 {
        self.reference.integrator_tol()
    }

    /// `𝒟(t)` at an arbitrary time via the dense reference solution.
    pub fn sensitivity_at(&self, t: f64) -> Result<Matrix> {
        let x = self.reference.state_at(t);
        self.system.jacobian_p(t, &x, &self.p0().eval(t))
    }

    pub fn gram_at(&self, t: f64) -> Result<Matrix> {
        Ok(self.sensitivity_at(t)?.gram())
    }

    /// `det 𝒟(t)` in 𝒦-mode, `det ℬ(t)` in ℋ-mode.
    pub fn determinant_at(&self, t: f64, mode: Mode) -> Result<f64> {
        match mode {
            Mode::K => {
                let d = self.sensitivity_at(t)?;
                if !d.is_square() {
                    return Err(Error::InvalidInput(format!(
                        "det 𝒟 needs n = l, got {}x{}",
                        d.rows(),
                        d.cols()
                    )));
                }
                determinant(&d)
            }
            Mode::H => determinant(&self.gram_at(t)?),
        }
    }

    /// Determinant values on the analysis grid.
    pub fn determinant_samples(&self, mode: Mode) -> Result<Vec<f64>> {
        match mode {
            Mode::K => self.d_values.iter().map(determinant).collect(),
            Mode::H => self.b_values.iter().map(determinant).collect(),
        }
    }

    /// Uniform grid on `[τ, θ]` with an even number of panels at least as
    /// dense as the analysis grid.
    pub fn interval_grid(&self, tau: f64, theta: f64) -> Result<TimeGrid> {
        self.check_interval(tau, theta)?;
        let density = (self.grid.len() - 1) as f64 / self.horizon();
        let mut panels = ((theta - tau) * density).ceil() as usize;
        panels = panels.max(MIN_INTERVAL_PANELS);
        panels += panels % 2;
        TimeGrid::uniform(tau, theta, panels + 1)
    }

    pub fn check_interval(&self, tau: f64, theta: f64) -> Result<()> {
        let horizon = self.horizon();
        let slack = 1e-12 * horizon;
        if !(tau >= -slack && theta <= horizon + slack && tau < theta) {
            return Err(Error::InvalidInput(format!(
                "interval [{tau}, {theta}] is not a subinterval of [0, {horizon}]"
            )));
        }
        Ok(())
    }

    /// Samples of `Y_τ⁻¹(s)𝒟(s)` on the interval grid of `[τ, θ]`.
    pub fn psi_kernel(&self, y: &FundamentalMatrix, tau: f64, theta: f64) -> Result<PsiKernel> {
        if (y.tau() - tau).abs() > 1e-12 * self.horizon().max(1.0) {
            return Err(Error::InvalidInput(format!(
                "fundamental matrix is based at {}, interval starts at {tau}",
                y.tau()
            )));
        }
        let grid = self.interval_grid(tau, theta)?;
        let mut kernel = Vec::with_capacity(grid.len());
        let mut sens = Vec::with_capacity(grid.len());
        for &s in grid.points() {
            let d = self.sensitivity_at(s)?;
            kernel.push(y.inverse_times(s, &d)?);
            sens.push(d);
        }
        let weights = quadrature_weights(grid.points());
        Ok(PsiKernel {
            tau,
            theta,
            grid,
            weights,
            kernel,
            sens,
        })
    }

    /// Convenience: fundamental matrix based at `τ`.
    pub fn fundamental(&self, tau: f64) -> Result<FundamentalMatrix> {
        fundamental_matrix(&self.system, &self.reference, tau)
    }
}

/// Discretised `Ψ_{τ,θ}`: the integrand kernel `Y_τ⁻¹𝒟` and `𝒟` itself on a
/// fixed quadrature grid, reusable for any number of arguments.
#[derive(Debug, Clone)]
pub struct PsiKernel {
    tau: f64,
    theta: f64,
    grid: TimeGrid,
    weights: Vec<f64>,
    kernel: Vec<Matrix>,
    sens: Vec<Matrix>,
}

impl PsiKernel {
    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn sensitivities(&self) -> &[Matrix] {
        &self.sens
    }

    /// `Ψ_{τ,θ}(q)`.
    pub fn apply(&self, q: &ParamFunction) -> Result<PsiValue> {
        let n = self.kernel[0].rows();
        if q.dim() != self.kernel[0].cols() {
            return Err(Error::InvalidInput(format!(
                "argument has dimension {}, expected {}",
                q.dim(),
                self.kernel[0].cols()
            )));
        }
        let mut value = vec![0.0; n];
        for ((&s, w), k) in self.grid.points().iter().zip(&self.weights).zip(&self.kernel) {
            let v = k.mul_vec(&q.eval(s));
            for (acc, x) in value.iter_mut().zip(v) {
                *acc += w * x;
            }
        }
        Ok(PsiValue {
            tau: self.tau,
            theta: self.theta,
            value,
        })
    }

    /// `max_s ‖Y_τ⁻¹(s)𝒟(s)‖`, an upper bound for `‖Ψ_{τ,θ}‖_i`.
    pub fn operator_norm(&self) -> f64 {
        self.kernel.iter().map(spectral_norm).fold(0.0, f64::max)
    }

    /// `max_s ‖𝒟(s)‖`, an upper bound for `‖𝒟‖_{i,τ,θ}`.
    pub fn sensitivity_norm(&self) -> f64 {
        self.sens.iter().map(spectral_norm).fold(0.0, f64::max)
    }

    /// `‖q‖_{τ,θ}` on the kernel grid.
    pub fn sup_norm(&self, q: &ParamFunction) -> f64 {
        self.grid.points().iter().map(|&s| euclidean_norm(&q.eval(s))).fold(0.0, f64::max)
    }

    /// `‖q‖_{i,τ,θ}` on the kernel grid.
    pub fn int_norm(&self, q: &ParamFunction) -> f64 {
        let mags: Vec<f64> = self.grid.points().iter().map(|&s| euclidean_norm(&q.eval(s))).collect();
        integrate_scalar(self.grid.points(), &mags)
    }

    /// `‖𝒟q‖_{i,τ,θ}` on the kernel grid.
    pub fn sensitivity_int_norm(&self, q: &ParamFunction) -> f64 {
        let mags: Vec<f64> = self
            .grid
            .points()
            .iter()
            .zip(&self.sens)
            .map(|(&s, d)| euclidean_norm(&d.mul_vec(&q.eval(s))))
            .collect();
        integrate_scalar(self.grid.points(), &mags)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiValue {
    pub tau: f64,
    pub theta: f64,
    pub value: Vec<f64>,
}

impl PsiValue {
    pub fn norm(&self) -> f64 {
        euclidean_norm(&self.value)
    }
}

/// `Ψ_{τ,θ}(q)` with the fundamental matrix based at `τ`.
pub fn psi_map(path: &SensitivityPath, y: &FundamentalMatrix, tau: f64, theta: f64, q: &ParamFunction) -> Result<PsiValue> {
    path.psi_kernel(y, tau, theta)?.apply(q)
}

pub fn psi_operator_norm(path: &SensitivityPath, y: &FundamentalMatrix, tau: f64, theta: f64) -> Result<f64> {
    Ok(path.psi_kernel(y, tau, theta)?.operator_norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemainderSample {
    /// `‖Δp‖_{τ,θ}`.
    pub epsilon: f64,
    /// `|G_{τ,θ}(Δp)|`.
    pub g_norm: f64,
    /// `|G| / ‖Δp‖_{τ,θ}`; zero when `Δp ≡ 0`.
    pub ratio: f64,
}

/// Remainder of the linearisation `Δ_p x(θ) = Y_τ(θ)Ψ(Δp) + G(Δp)`, with the
/// perturbed solution restarted on the reference at `τ`.
pub fn remainder(path: &SensitivityPath, p: &ParamFunction, tau: f64, theta: f64) -> Result<RemainderSample> {
    let start = path.reference().state_at(tau);
    remainder_from(path, p, tau, theta, &start)
}

/// As [`remainder`], with an explicit perturbed state at `τ` which must
/// agree with the reference within `10·tol`.
pub fn remainder_from(path: &SensitivityPath, p: &ParamFunction, tau: f64, theta: f64, x_tau: &[f64]) -> Result<RemainderSample> {
    path.check_interval(tau, theta)?;
    let tol = path.integrator_tol();
    let x_ref_tau = path.reference().state_at(tau);
    let gap = euclidean_norm(&x_ref_tau.iter().zip(x_tau).map(|(a, b)| a - b).collect::<Vec<_>>());
    if x_tau.len() != x_ref_tau.len() || gap > 10.0 * tol {
        return Err(Error::InvalidRebase { tau, gap });
    }
    let perturbed = integrate_from(path.system(), p, tau, x_tau, theta, tol)?;
    let x_ref_theta = path.reference().state_at(theta);
    let dx: Vec<f64> = perturbed.end_state().iter().zip(&x_ref_theta).map(|(a, b)| a - b).collect();

    let dp = p.minus(path.p0());
    let y = path.fundamental(tau)?;
    let kernel = path.psi_kernel(&y, tau, theta)?;
    let psi = kernel.apply(&dp)?;
    let lin = y.at(theta)?.mul_vec(&psi.value);
    let g: Vec<f64> = dx.iter().zip(&lin).map(|(a, b)| a - b).collect();
    let g_norm = euclidean_norm(&g);
    let epsilon = kernel.sup_norm(&dp);
    let ratio = if epsilon > 0.0 { g_norm / epsilon } else { 0.0 };
    Ok(RemainderSample { epsilon, g_norm, ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::DEFAULT_GRID_POINTS;

    fn scalar_system(f: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static, x0: f64) -> SystemModel {
        SystemModel::new(1, 1, 1.0, vec![x0], move |t, x, p| vec![f(t, x[0], p[0])]).unwrap()
    }

    fn path_for(sys: &SystemModel, p0: ParamFunction) -> SensitivityPath {
        let grid = TimeGrid::uniform(0.0, sys.horizon(), DEFAULT_GRID_POINTS).unwrap();
        sensitivity_path(sys, &p0, &grid, 1e-10).unwrap()
    }

    fn psi_01(sys: SystemModel) -> f64 {
        let path = path_for(&sys, ParamFunction::zero(1));
        let y = path.fundamental(0.0).unwrap();
        psi_map(&path, &y, 0.0, 1.0, &ParamFunction::constant(vec![1.0])).unwrap().value[0]
    }

    #[test]
    fn sensitivity_examples() {
        let path = path_for(&scalar_system(|t, _, p| t * p, 0.0), ParamFunction::zero(1));
        assert!((path.sensitivity_at(0.5).unwrap()[(0, 0)] - 0.5).abs() < 1e-10);
        assert!((path.gram_at(0.5).unwrap()[(0, 0)] - 0.25).abs() < 1e-10);

        let tall = SystemModel::new(2, 1, 1.0, vec![0.0, 0.0], |t, _, p| vec![(t - 0.5) * p[0], (t - 0.5) * p[0]]).unwrap();
        let path = path_for(&tall, ParamFunction::zero(1));
        assert!((path.gram_at(1.0).unwrap()[(0, 0)] - 0.5).abs() < 1e-10);
        let k = path.grid().len() - 1;
        assert!((path.b_values()[k][(0, 0)] - 0.5).abs() < 1e-10);

        let ident = SystemModel::new(2, 2, 1.0, vec![0.0, 0.0], |_, _, p| p.to_vec()).unwrap();
        let path = path_for(&ident, ParamFunction::zero(2));
        assert!(path.b_values().iter().all(|b| b.sub(&Matrix::identity(2)).max_abs() < 1e-10));
    }

    #[test]
    fn psi_closed_forms() {
        assert!((psi_01(scalar_system(|_, _, p| p, 0.0)) - 1.0).abs() < 1e-8);
        assert!((psi_01(scalar_system(|_, x, p| x + p, 0.0)) - (1.0 - (-1f64).exp())).abs() < 1e-7);
        assert!((psi_01(scalar_system(|t, _, p| t * p, 0.0)) - 0.5).abs() < 1e-8);
    }

    #[test]
    fn psi_interval_validation() {
        let path = path_for(&scalar_system(|_, _, p| p, 0.0), ParamFunction::zero(1));
        let y = path.fundamental(0.0).unwrap();
        let q = ParamFunction::constant(vec![1.0]);
        assert!(psi_map(&path, &y, 0.0, 1.5, &q).is_err());
        assert!(psi_map(&path, &y, 0.5, 0.2, &q).is_err());
        assert!(psi_map(&path, &y, 0.2, 0.5, &q).is_err(), "Y based at 0, interval at 0.2");
    }

    #[test]
    fn psi_operator_norm_examples() {
        for (sys, expected) in [
            (scalar_system(|_, _, p| p, 0.0), 1.0),
            (scalar_system(|_, x, p| x + p, 0.0), 1.0),
            (scalar_system(|t, _, p| t * p, 0.0), 1.0),
        ] {
            let path = path_for(&sys, ParamFunction::zero(1));
            let y = path.fundamental(0.0).unwrap();
            let norm = psi_operator_norm(&path, &y, 0.0, 1.0).unwrap();
            assert!((norm - expected).abs() < 1e-9, "{norm}");
        }
    }

    #[test]
    fn remainder_examples() {
        let path = path_for(&scalar_system(|_, x, p| x + p, 0.0), ParamFunction::zero(1));
        let r = remainder(&path, &ParamFunction::constant(vec![0.1]), 0.0, 1.0).unwrap();
        assert!(r.g_norm <= 1e-7, "{r:?}");

        let path = path_for(&scalar_system(|_, x, p| x * x + p, 0.1), ParamFunction::zero(1));
        let r2 = remainder(&path, &ParamFunction::constant(vec![1e-2]), 0.0, 1.0).unwrap();
        let r3 = remainder(&path, &ParamFunction::constant(vec![1e-3]), 0.0, 1.0).unwrap();
        assert!(r3.ratio / r2.ratio <= 0.2, "{r2:?} {r3:?}");

        let r0 = remainder(&path, &ParamFunction::zero(1), 0.0, 1.0).unwrap();
        assert!(r0.g_norm <= 1e-9 && r0.ratio == 0.0);
    }

    #[test]
    fn remainder_rejects_bad_rebase() {
        let path = path_for(&scalar_system(|_, x, p| x * x + p, 0.1), ParamFunction::zero(1));
        let err = remainder_from(&path, &ParamFunction::constant(vec![0.01]), 0.5, 1.0, &[5.0]).unwrap_err();
        assert!(matches!(err, Error::InvalidRebase { .. }));
    }
}
