//! Per-interval perturbation classes `K(τ,θ)` and `H(τ,θ)`: tight empirical
//! constants α, β, γ, κ, the norm-equivalence bound λ̂, the
//! mininorm slope check at rank drops, and class-preserving perturbations.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{euclidean_norm, integrate_scalar, TimeGrid};
use crate::linalg::{mininorm, sym_eigenvalues};
use crate::ode::ParamFunction;
use crate::sensitivity::{PsiKernel, SensitivityPath};
use crate::zeros::{Mode, ObservationSet};

/// Which endpoints of `[τ, θ]` are zeros of the determinant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    K1,
    K2,
    K3,
    K4,
    H1,
    H2,
    H3,
    H4,
}

impl Variant {
    fn new(mode: Mode, case: u8) -> Self {
        match (mode, case) {
            (Mode::K, 1) => Variant::K1,
            (Mode::K, 2) => Variant::K2,
            (Mode::K, 3) => Variant::K3,
            (Mode::K, _) => Variant::K4,
            (Mode::H, 1) => Variant::H1,
            (Mode::H, 2) => Variant::H2,
            (Mode::H, 3) => Variant::H3,
            (Mode::H, _) => Variant::H4,
        }
    }

    /// Determinant vanishes at `τ`.
    pub fn left_vanishes(self) -> bool {
        matches!(self, Variant::K1 | Variant::K3 | Variant::H1 | Variant::H3)
    }

    /// Determinant vanishes at `θ`.
    pub fn right_vanishes(self) -> bool {
        matches!(self, Variant::K1 | Variant::K2 | Variant::H1 | Variant::H2)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Which end of `[τ, θ]` a vanishing-rate window sits at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// `[τ, τ + γ)`, distance `t − τ`.
    Left,
    /// `(θ − γ, θ]`, distance `θ − t`.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    /// β̂ at or below this counts as a Ψ-kernel direction.
    pub beta_floor: f64,
    /// Explicit γ; default is `min((θ − τ)/2, window_frac·T)`.
    pub gamma: Option<f64>,
    pub window_frac: f64,
    /// Smallest sampled distance to the zero, relative to `θ − τ`.
    pub kappa_min_rel: f64,
    /// Ratio between consecutive geometric sample distances.
    pub kappa_step: f64,
    /// Total growth over the last three samples that signals divergence.
    pub kappa_growth: f64,
    /// Uniform samples across the window, added to the geometric ones.
    pub kappa_uniform: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            beta_floor: 1e-6,
            gamma: None,
            window_frac: 0.05,
            kappa_min_rel: 1e-6,
            kappa_step: 8.0,
            kappa_growth: 10.0,
            kappa_uniform: 64,
        }
    }
}

/// Norms shared between a certificate and the perturbation construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateNorms {
    /// `‖Δp‖_{τ,θ}`.
    pub sup_dp: f64,
    /// `‖Δp‖_{i,τ,θ}`.
    pub int_dp: f64,
    /// `‖𝒟Δp‖_{i,τ,θ}`.
    pub int_d_dp: f64,
    /// `|Ψ_{τ,θ}(Δp)|`.
    pub psi_abs: f64,
    /// Upper bound for `‖Ψ_{τ,θ}‖_i`.
    pub psi_operator_norm: f64,
    /// Upper bound for `‖𝒟‖_{i,τ,θ}`.
    pub sensitivity_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassCertificate {
    pub interval_index: usize,
    pub tau: f64,
    pub theta: f64,
    pub variant: Variant,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: Option<f64>,
    pub kappa: Option<f64>,
    pub nu_used: u32,
    pub passed: bool,
    pub failure_reason: Option<String>,
    pub norms: CertificateNorms,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaCheck {
    pub holds: bool,
    /// Supremum of the sampled ratio; infinite when the ratio diverges.
    pub kappa_hat: f64,
}

/// `α̂ = ‖Δp‖_i / ‖Δp‖` on a uniform grid of `[τ, θ]`.
pub fn estimate_alpha(dp: &ParamFunction, tau: f64, theta: f64, points: usize) -> Result<f64> {
    let grid = TimeGrid::uniform(tau, theta, points.max(3))?;
    let mags: Vec<f64> = grid.points().iter().map(|&s| euclidean_norm(&dp.eval(s))).collect();
    alpha_from(&mags, grid.points(), tau, theta)
}

fn alpha_from(mags: &[f64], t: &[f64], tau: f64, theta: f64) -> Result<f64> {
    let sup = mags.iter().copied().fold(0.0, f64::max);
    if sup == 0.0 {
        return Err(Error::DegeneratePerturbation { tau, theta });
    }
    Ok(integrate_scalar(t, mags) / sup)
}

/// `β̂ = |Ψ(Δp)| / ‖𝒟Δp‖_i` using a precomputed Ψ kernel.
pub fn estimate_beta(kernel: &PsiKernel, dp: &ParamFunction) -> Result<f64> {
    let denom = kernel.sensitivity_int_norm(dp);
    if denom == 0.0 {
        return Err(Error::DegenerateDirection {
            tau: kernel.tau(),
            theta: kernel.theta(),
        });
    }
    Ok(kernel.apply(dp)?.norm() / denom)
}

/// Distances sampled towards the zero: geometric down to the floor, then a
/// uniform sweep of the window. The geometric part comes first.
fn kappa_distances(gamma: f64, span: f64, opts: &CertifyOptions) -> (Vec<f64>, Vec<f64>) {
    let floor = opts.kappa_min_rel * span;
    let mut geo = Vec::new();
    let mut d = gamma;
    while d >= floor {
        geo.push(d);
        d /= opts.kappa_step;
    }
    if geo.last().is_none_or(|&last| last > floor) {
        geo.push(floor.min(gamma));
    }
    let m = opts.kappa_uniform.max(1);
    let uni = (1..=m).map(|i| gamma * i as f64 / m as f64).collect();
    (geo, uni)
}

/// Checks `|𝒟(t)Δp(t)| ≤ κ·dist^ν·scale` on the one-sided window of width
/// `γ` at the given end of `[τ, θ]`. `scale` is normally `‖Δp‖_{τ,θ}`.
#[allow(clippy::too_many_arguments)]
pub fn check_kappa(
    path: &SensitivityPath,
    dp: &ParamFunction,
    tau: f64,
    theta: f64,
    nu: u32,
    gamma: f64,
    side: Side,
    scale: f64,
    opts: &CertifyOptions,
) -> Result<KappaCheck> {
    if !(gamma > 0.0 && gamma <= theta - tau) {
        return Err(Error::InvalidInput(format!("γ = {gamma} outside (0, {}]", theta - tau)));
    }
    let ratio = |d: f64| -> Result<f64> {
        let t = match side {
            Side::Left => tau + d,
            Side::Right => theta - d,
        };
        let v = euclidean_norm(&path.sensitivity_at(t)?.mul_vec(&dp.eval(t)));
        Ok(v / (d.powi(nu as i32) * scale))
    };
    let (geo, uni) = kappa_distances(gamma, theta - tau, opts);
    let geo_r: Vec<f64> = geo.iter().map(|&d| ratio(d)).collect::<Result<_>>()?;
    let uni_r: Vec<f64> = uni.iter().map(|&d| ratio(d)).collect::<Result<_>>()?;
    let finite = geo_r.iter().chain(&uni_r).all(|r| r.is_finite());
    let diverging = geo_r.len() >= 3 && {
        let k = geo_r.len();
        let (a, b, c) = (geo_r[k - 3], geo_r[k - 2], geo_r[k - 1]);
        a < b && b < c && c > opts.kappa_growth * a
    };
    if !finite || diverging {
        return Ok(KappaCheck {
            holds: false,
            kappa_hat: f64::INFINITY,
        });
    }
    let kappa_hat = geo_r.iter().chain(&uni_r).copied().fold(0.0, f64::max);
    Ok(KappaCheck { holds: true, kappa_hat })
}

/// Case analysis on which endpoint determinants vanish.
pub fn classify_interval(det_tau: f64, det_theta: f64, tau: f64, theta: f64, horizon: f64, zero_tol: f64, mode: Mode) -> Result<Variant> {
    let eps = 1e-12 * horizon;
    let at_start = tau.abs() <= eps;
    let at_end = (theta - horizon).abs() <= eps;
    let lv = det_tau.abs() <= zero_tol;
    let rv = det_theta.abs() <= zero_tol;
    let case = match (lv, rv) {
        (true, true) => 1,
        (false, true) if at_start => 2,
        (true, false) if at_end => 3,
        (false, false) if at_start && at_end => 4,
        _ => return Err(Error::PartitionInconsistency { tau, theta }),
    };
    Ok(Variant::new(mode, case))
}

/// Default γ for an interval.
pub fn default_gamma(tau: f64, theta: f64, horizon: f64, opts: &CertifyOptions) -> f64 {
    opts.gamma
        .unwrap_or_else(|| (0.5 * (theta - tau)).min(opts.window_frac * horizon))
        .min(theta - tau)
}

/// Certifies `p` against the class of interval `k` of `obs`.
pub fn certify_membership(path: &SensitivityPath, obs: &ObservationSet, p: &ParamFunction, k: usize, opts: &CertifyOptions) -> Result<ClassCertificate> {
    let (tau, theta) = obs.interval(k)?;
    let y = path.fundamental(tau)?;
    let kernel = path.psi_kernel(&y, tau, theta)?;
    certify_with_kernel(path, obs, &kernel, p, k, opts)
}

/// Certifies `p` on every interval of `obs`.
pub fn certify_all(path: &SensitivityPath, obs: &ObservationSet, p: &ParamFunction, opts: &CertifyOptions) -> Result<Vec<ClassCertificate>> {
    (0..obs.interval_count()).map(|k| certify_membership(path, obs, p, k, opts)).collect()
}

fn certify_with_kernel(
    path: &SensitivityPath,
    obs: &ObservationSet,
    kernel: &PsiKernel,
    p: &ParamFunction,
    k: usize,
    opts: &CertifyOptions,
) -> Result<ClassCertificate> {
    let (tau, theta) = (kernel.tau(), kernel.theta());
    let dp = p.minus(path.p0());
    let sup_dp = kernel.sup_norm(&dp);
    if sup_dp == 0.0 {
        return Err(Error::DegeneratePerturbation { tau, theta });
    }
    let int_dp = kernel.int_norm(&dp);
    let alpha = int_dp / sup_dp;
    let int_d_dp = kernel.sensitivity_int_norm(&dp);
    if int_d_dp == 0.0 {
        return Err(Error::DegenerateDirection { tau, theta });
    }
    let psi_abs = kernel.apply(&dp)?.norm();
    let beta = psi_abs / int_d_dp;
    let norms = CertificateNorms {
        sup_dp,
        int_dp,
        int_d_dp,
        psi_abs,
        psi_operator_norm: kernel.operator_norm(),
        sensitivity_norm: kernel.sensitivity_norm(),
    };

    // Endpoint vanishing is read off the observation set so the case
    // analysis agrees with the zero finder by construction.
    let (left, right) = (&obs.points[k], &obs.points[k + 1]);
    let det_l = if left.vanishes() { 0.0 } else { 1.0 };
    let det_r = if right.vanishes() { 0.0 } else { 1.0 };
    let variant = classify_interval(det_l, det_r, tau, theta, obs.horizon, 0.5, obs.mode)?;
    let nu_used = match obs.mode {
        Mode::K => left.order.max(right.order),
        Mode::H => 1,
    };

    let mut failures = Vec::new();
    if !(alpha > 0.0) {
        failures.push(format!("α̂ = {alpha:e} is not positive"));
    }
    if !(beta > opts.beta_floor) {
        failures.push(format!("β̂ = {beta:e} ≤ {:e}: Δp is close to the kernel of Ψ", opts.beta_floor));
    }

    let sides: Vec<Side> = [(variant.left_vanishes(), Side::Left), (variant.right_vanishes(), Side::Right)]
        .into_iter()
        .filter_map(|(v, s)| v.then_some(s))
        .collect();
    let (gamma, kappa) = if sides.is_empty() {
        (None, None)
    } else {
        let gamma = default_gamma(tau, theta, obs.horizon, opts);
        let mut kappa = 0.0f64;
        let mut holds = true;
        for side in sides {
            let c = check_kappa(path, &dp, tau, theta, nu_used, gamma, side, sup_dp, opts)?;
            if !c.holds {
                holds = false;
                failures.push(format!("|𝒟Δp| / dist^{nu_used} is unbounded at the {side:?} end"));
            }
            kappa = kappa.max(c.kappa_hat);
        }
        (Some(gamma), holds.then_some(kappa))
    };

    let passed = failures.is_empty();
    Ok(ClassCertificate {
        interval_index: k,
        tau,
        theta,
        variant,
        alpha,
        beta,
        gamma,
        kappa,
        nu_used,
        passed,
        failure_reason: (!passed).then(|| failures.join("; ")),
        norms,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaWitness {
    pub name: String,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaBound {
    pub tau: f64,
    pub theta: f64,
    pub lambda_hat: f64,
    pub witnesses: Vec<LambdaWitness>,
}

/// `λ̂ = min_r ‖𝒟r‖_i / ‖r‖_i` over the given witnesses.
pub fn lambda_bound(path: &SensitivityPath, tau: f64, theta: f64, witnesses: &[(String, ParamFunction)]) -> Result<LambdaBound> {
    if witnesses.is_empty() {
        return Err(Error::InvalidInput("lambda_bound needs at least one witness".into()));
    }
    let grid = path.interval_grid(tau, theta)?;
    let sens = grid.points().iter().map(|&s| path.sensitivity_at(s)).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(witnesses.len());
    for (name, r) in witnesses {
        let vals: Vec<Vec<f64>> = grid.points().iter().map(|&s| r.eval(s)).collect();
        let r_mag: Vec<f64> = vals.iter().map(|v| euclidean_norm(v)).collect();
        let dr_mag: Vec<f64> = vals.iter().zip(&sens).map(|(v, d)| euclidean_norm(&d.mul_vec(v))).collect();
        let denom = integrate_scalar(grid.points(), &r_mag);
        if denom == 0.0 {
            return Err(Error::DegeneratePerturbation { tau, theta });
        }
        out.push(LambdaWitness {
            name: name.clone(),
            ratio: integrate_scalar(grid.points(), &dr_mag) / denom,
        });
    }
    let lambda_hat = out.iter().map(|w| w.ratio).fold(f64::INFINITY, f64::min);
    Ok(LambdaBound {
        tau,
        theta,
        lambda_hat,
        witnesses: out,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideSlope {
    pub side: Side,
    /// `+h_c/√Λ_c` to the right of `c`, `−h_c/√Λ_c` to the left.
    pub predicted: f64,
    /// One-sided finite-difference slope of `μA` with Richardson extrapolation.
    pub measured: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankDrop {
    pub c: f64,
    pub h: f64,
    /// Product of the nonzero eigenvalues of `ℬ(c)`.
    pub lambda_c: f64,
    pub kernel_dim: usize,
    pub slopes: Vec<SideSlope>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MininormPath {
    pub times: Vec<f64>,
    pub mu: Vec<f64>,
    pub rank_drops: Vec<RankDrop>,
}

impl MininormPath {
    /// Largest `|measured − predicted| / (1 + |predicted|)` over all rank drops.
    pub fn worst_slope_error(&self) -> f64 {
        self.rank_drops
            .iter()
            .flat_map(|r| &r.slopes)
            .map(|s| (s.measured - s.predicted).abs() / (1.0 + s.predicted.abs()))
            .fold(0.0, f64::max)
    }
}

/// `μA(t) = min_{|v|=1} |𝒟(t)v|` on the analysis grid, and the one-sided
/// slopes at every rank drop of an ℋ-mode observation set.
pub fn mininorm_path(path: &SensitivityPath, obs: &ObservationSet) -> Result<MininormPath> {
    if obs.mode != Mode::H {
        return Err(Error::InvalidInput("mininorm path needs an ℋ-mode observation set".into()));
    }
    let times = path.grid().points().to_vec();
    let mu: Vec<f64> = path.d_values().iter().map(mininorm).collect();
    let b_scale = path
        .b_values()
        .iter()
        .map(|b| sym_eigenvalues(b).map(|e| e.last().copied().unwrap_or(0.0)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let horizon = path.horizon();
    let mu_at = |t: f64| path.sensitivity_at(t).map(|d| mininorm(&d));

    let zeros: Vec<f64> = obs.points.iter().filter(|p| p.vanishes()).map(|p| p.tau).collect();
    let mut rank_drops = Vec::new();
    for pt in obs.points.iter().filter(|p| p.vanishes()) {
        let c = pt.tau;
        let h = pt.coefficient.ok_or_else(|| Error::InvalidInput(format!("zero at {c} has no coefficient")))?;
        let eig = sym_eigenvalues(&path.gram_at(c)?)?;
        let threshold = 1e-10 * b_scale;
        let kernel_dim = eig.iter().filter(|&&e| e <= threshold).count();
        if kernel_dim > 1 {
            return Err(Error::NotInClassH { c, kernel_dim });
        }
        let lambda_c: f64 = eig.iter().skip(1).product();

        let gap = zeros
            .iter()
            .filter(|&&z| z != c)
            .map(|&z| (z - c).abs())
            .fold(f64::INFINITY, f64::min);
        let step = (1e-3 * horizon).min(0.25 * gap);
        let mu_c = mu_at(c)?;
        let mut slopes = Vec::new();
        for side in [Side::Left, Side::Right] {
            let sgn = match side {
                Side::Left => -1.0,
                Side::Right => 1.0,
            };
            let (t1, t2) = (c + sgn * step, c + sgn * 0.5 * step);
            if t1 < 0.0 || t1 > horizon {
                continue;
            }
            let s1 = (mu_at(t1)? - mu_c) / (sgn * step);
            let s2 = (mu_at(t2)? - mu_c) / (sgn * 0.5 * step);
            slopes.push(SideSlope {
                side,
                predicted: sgn * h / lambda_c.sqrt(),
                measured: 2.0 * s2 - s1,
                step,
            });
        }
        rank_drops.push(RankDrop {
            c,
            h,
            lambda_c,
            kernel_dim,
            slopes,
        });
    }
    Ok(MininormPath { times, mu, rank_drops })
}

/// Scales `q_raw` so that `p + c·q_raw` stays in the class certified by
/// `base`, and returns it with the inherited constants `(α/4, β/4, γ, 4κ)`.
pub fn perturb_within_class(
    base: &ClassCertificate,
    path: &SensitivityPath,
    p: &ParamFunction,
    q_raw: &ParamFunction,
    opts: &CertifyOptions,
) -> Result<(ParamFunction, ClassCertificate)> {
    if !base.passed {
        return Err(Error::InvalidInput("base certificate did not pass".into()));
    }
    let inherited = ClassCertificate {
        alpha: base.alpha / 4.0,
        beta: base.beta / 4.0,
        kappa: base.kappa.map(|k| 4.0 * k),
        failure_reason: None,
        ..base.clone()
    };
    let (tau, theta) = (base.tau, base.theta);
    let y = path.fundamental(tau)?;
    let kernel = path.psi_kernel(&y, tau, theta)?;
    let sup_q = kernel.sup_norm(q_raw);
    if sup_q == 0.0 {
        return Ok((p.clone(), inherited));
    }
    let int_q = kernel.int_norm(q_raw);
    let n = base.norms;

    let mut c = 0.5 * n.sup_dp / sup_q;
    let int_cap = (base.beta * n.int_d_dp / (2.0 * n.psi_operator_norm))
        .min(n.int_d_dp / n.sensitivity_norm)
        .min(0.5 * base.alpha * n.sup_dp);
    c = c.min(int_cap / int_q);

    if let (Some(gamma), Some(kappa)) = (base.gamma, base.kappa) {
        for (v, side) in [(base.variant.left_vanishes(), Side::Left), (base.variant.right_vanishes(), Side::Right)] {
            if !v {
                continue;
            }
            let kq = check_kappa(path, q_raw, tau, theta, base.nu_used, gamma, side, 1.0, opts)?;
            if !kq.holds {
                return Err(Error::InadmissibleDirection(format!(
                    "|𝒟q| / dist^{} is unbounded at the {side:?} end of [{tau}, {theta}]",
                    base.nu_used
                )));
            }
            if kq.kappa_hat > 0.0 {
                c = c.min(kappa * n.sup_dp / kq.kappa_hat);
            }
        }
    }
    Ok((p.plus_scaled(c, q_raw), inherited))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::system_from_exprs;
    use crate::grid::DEFAULT_GRID_POINTS;
    use crate::sensitivity::sensitivity_path;
    use crate::zeros::{observation_set, ZeroOptions};
    use std::f64::consts::PI;

    fn path(rhs: &[&str], l: usize, x0: &[f64]) -> SensitivityPath {
        let rhs: Vec<String> = rhs.iter().map(|s| s.to_string()).collect();
        let sys = system_from_exprs("test", &rhs, l, 1.0, x0.to_vec()).unwrap();
        let grid = TimeGrid::uniform(0.0, 1.0, DEFAULT_GRID_POINTS).unwrap();
        sensitivity_path(&sys, &ParamFunction::zero(l), &grid, 1e-10).unwrap()
    }

    fn scalar(f: fn(f64) -> f64, df: fn(f64) -> f64) -> ParamFunction {
        ParamFunction::broadcast(1, f, df, "q")
    }

    #[test]
    fn alpha_examples() {
        let a = estimate_alpha(&ParamFunction::constant(vec![3.0]), 0.0, 1.0, 2001).unwrap();
        assert!((a - 1.0).abs() < 1e-12);
        let a = estimate_alpha(&scalar(|t| t, |_| 1.0), 0.0, 1.0, 2001).unwrap();
        assert!((a - 0.5).abs() < 1e-8);
        let a = estimate_alpha(&scalar(|t| (2.0 * PI * t).sin(), |t| 2.0 * PI * (2.0 * PI * t).cos()), 0.0, 1.0, 2001).unwrap();
        assert!((a - 2.0 / PI).abs() < 1e-6, "{a}");
        assert!(matches!(
            estimate_alpha(&ParamFunction::zero(1), 0.0, 1.0, 101),
            Err(Error::DegeneratePerturbation { .. })
        ));
    }

    fn beta(rhs: &str, q: ParamFunction) -> f64 {
        let path = path(&[rhs], 1, &[0.0]);
        let y = path.fundamental(0.0).unwrap();
        estimate_beta(&path.psi_kernel(&y, 0.0, 1.0).unwrap(), &q).unwrap()
    }

    #[test]
    fn beta_examples() {
        assert!((beta("p0", ParamFunction::constant(vec![1.0])) - 1.0).abs() < 1e-8);
        assert!((beta("x0 + p0", ParamFunction::constant(vec![1.0])) - (1.0 - (-1f64).exp())).abs() < 1e-6);
        let b = beta("p0", scalar(|t| (2.0 * PI * t).sin(), |t| 2.0 * PI * (2.0 * PI * t).cos()));
        assert!(b.abs() < 1e-8, "{b}");
    }

    #[test]
    fn kappa_examples() {
        let path = path(&["t * p0"], 1, &[0.0]);
        let opts = CertifyOptions::default();
        let one = ParamFunction::constant(vec![1.0]);
        let c = check_kappa(&path, &one, 0.0, 1.0, 1, 0.05, Side::Left, 1.0, &opts).unwrap();
        assert!(c.holds && (c.kappa_hat - 1.0).abs() < 1e-9, "{c:?}");
        let c = check_kappa(&path, &scalar(|t| t, |_| 1.0), 0.0, 1.0, 2, 0.05, Side::Left, 1.0, &opts).unwrap();
        assert!(c.holds && (c.kappa_hat - 1.0).abs() < 1e-9, "{c:?}");
        let c = check_kappa(&path, &one, 0.0, 1.0, 2, 0.05, Side::Left, 1.0, &opts).unwrap();
        assert!(!c.holds && c.kappa_hat.is_infinite());
    }

    #[test]
    fn classification_cases() {
        let k = |a, b, tau, theta| classify_interval(a, b, tau, theta, 1.0, 1e-12, Mode::K);
        assert_eq!(k(1.0, 1.0, 0.0, 1.0).unwrap(), Variant::K4);
        assert_eq!(k(1.0, 0.0, 0.0, 0.5).unwrap(), Variant::K2);
        assert_eq!(k(0.0, 1.0, 0.5, 1.0).unwrap(), Variant::K3);
        assert_eq!(k(0.0, 0.0, 0.3, 0.6).unwrap(), Variant::K1);
        assert!(matches!(k(1.0, 0.0, 0.3, 0.6), Err(Error::PartitionInconsistency { .. })));
        assert_eq!(classify_interval(1.0, 1.0, 0.0, 1.0, 1.0, 0.0, Mode::H).unwrap(), Variant::H4);
    }

    fn certify(rhs: &str, q: ParamFunction, k: usize) -> ClassCertificate {
        let path = path(&[rhs], 1, &[0.0]);
        let obs = observation_set(&path, Mode::K, &ZeroOptions::default()).unwrap();
        certify_membership(&path, &obs, &q, k, &CertifyOptions::default()).unwrap()
    }

    #[test]
    fn certificate_examples() {
        let c = certify("p0", ParamFunction::constant(vec![0.1]), 0);
        assert_eq!(c.variant, Variant::K4);
        assert!(c.passed && (c.alpha - 1.0).abs() < 1e-10 && (c.beta - 1.0).abs() < 1e-8);
        assert!(c.gamma.is_none() && c.kappa.is_none());

        let c = certify("(t - 0.5) * p0", scalar(|t| t - 0.5, |_| 1.0), 0);
        assert_eq!((c.variant, c.nu_used), (Variant::K2, 1));
        assert!(c.passed && c.kappa.unwrap().is_finite());

        let c = certify("(t - 0.5) * p0", ParamFunction::constant(vec![0.1]), 1);
        assert_eq!(c.variant, Variant::K3);
        assert!(c.passed, "{c:?}");
    }

    #[test]
    fn kappa_rate_depends_on_order() {
        let opts = CertifyOptions::default();
        let dp = ParamFunction::constant(vec![0.1]);
        // 𝒟Δp = 0.1(t − ½) vanishes only to first order at θ = ½.
        let sz = path(&["(t - 0.5) * p0"], 1, &[0.0]);
        let c = check_kappa(&sz, &dp, 0.0, 0.5, 2, 0.05, Side::Right, 0.1, &opts).unwrap();
        assert!(!c.holds);

        let dz = path(&["(t - 0.5)^2 * p0"], 1, &[0.0]);
        let obs = observation_set(&dz, Mode::K, &ZeroOptions::default()).unwrap();
        assert_eq!(obs.orders(), vec![0, 2, 0]);
        let c = certify_membership(&dz, &obs, &dp, 0, &opts).unwrap();
        assert!(c.passed && c.nu_used == 2, "{c:?}");
    }

    #[test]
    fn kernel_direction_fails_beta() {
        let q = scalar(|t| (2.0 * PI * t).sin(), |t| 2.0 * PI * (2.0 * PI * t).cos());
        let c = certify("p0", q, 0);
        assert!(!c.passed && c.failure_reason.unwrap().contains("β̂"));
    }

    #[test]
    fn lambda_examples() {
        let ident = path(&["p0", "p1"], 2, &[0.0, 0.0]);
        let w = vec![
            ("a".to_string(), ParamFunction::constant(vec![1.0, 2.0])),
            ("b".to_string(), ParamFunction::broadcast(2, |t| t * t, |t| 2.0 * t, "t^2")),
        ];
        let lb = lambda_bound(&ident, 0.0, 1.0, &w).unwrap();
        assert!((lb.lambda_hat - 1.0).abs() < 1e-8);

        let diag = path(&["2 * p0", "3 * p1"], 2, &[0.0, 0.0]);
        let lb = lambda_bound(&diag, 0.0, 1.0, &[("e1".into(), ParamFunction::constant(vec![1.0, 0.0]))]).unwrap();
        assert!((lb.lambda_hat - 2.0).abs() < 1e-8);

        assert!(lambda_bound(&diag, 0.0, 1.0, &[]).is_err());
    }

    #[test]
    fn lambda_matches_quadrature_oracle() {
        let sz = path(&["(t - 0.5) * p0"], 1, &[0.0]);
        let w = vec![
            ("lin".to_string(), scalar(|t| t - 0.5, |_| 1.0)),
            ("cub".to_string(), scalar(|t| (t - 0.5).powi(3), |t| 3.0 * (t - 0.5).powi(2))),
        ];
        let lb = lambda_bound(&sz, 0.0, 1.0, &w).unwrap();
        // ∫(t−½)²/∫|t−½| = 1/3 and ∫(t−½)⁴/∫|t−½|³ = 2/5.
        assert!((lb.witnesses[0].ratio - 1.0 / 3.0).abs() < 1e-8);
        assert!((lb.witnesses[1].ratio - 0.4).abs() < 1e-8);
        assert!((lb.lambda_hat - 1.0 / 3.0).abs() < 1e-8);
    }

    fn slopes(rhs: &[&str], l: usize) -> MininormPath {
        let x0 = vec![0.0; rhs.len()];
        let path = path(rhs, l, &x0);
        let obs = observation_set(&path, Mode::H, &ZeroOptions::default()).unwrap();
        mininorm_path(&path, &obs).unwrap()
    }

    #[test]
    fn mininorm_slope_examples() {
        let m = slopes(&["t * p0", "t * p0"], 1);
        assert_eq!(m.rank_drops.len(), 1);
        let r = &m.rank_drops[0];
        assert_eq!((r.c, r.lambda_c), (0.0, 1.0));
        assert_eq!(r.slopes.len(), 1);
        assert!((r.slopes[0].measured - 2f64.sqrt()).abs() < 1e-3 * (1.0 + 2f64.sqrt()));
        assert!(m.worst_slope_error() < 1e-3);

        let m = slopes(&["t * p0", "p1", "0"], 2);
        assert!((m.rank_drops[0].slopes[0].measured - 1.0).abs() < 2e-3);
        assert!((m.rank_drops[0].lambda_c - 1.0).abs() < 1e-9);

        let m = slopes(&["t * p0", "p1"], 2);
        assert!((m.rank_drops[0].slopes[0].predicted - 1.0).abs() < 1e-6);
        assert!(m.worst_slope_error() < 1e-3);
        assert!(m.mu.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn double_kernel_is_not_in_class_h() {
        // Θ from 𝒟 = (t, t)ᵀ, evaluated against 𝒟 = diag(t, t) where ℬ(0) = 0.
        let obs = observation_set(&path(&["t * p0", "t * p0"], 1, &[0.0, 0.0]), Mode::H, &ZeroOptions::default()).unwrap();
        let wide_kernel = path(&["t * p0", "t * p1"], 2, &[0.0, 0.0]);
        assert!(matches!(mininorm_path(&wide_kernel, &obs), Err(Error::NotInClassH { kernel_dim: 2, .. })));
    }

    #[test]
    fn perturbation_examples() {
        let path = path(&["p0"], 1, &[0.0]);
        let obs = observation_set(&path, Mode::K, &ZeroOptions::default()).unwrap();
        let opts = CertifyOptions::default();
        let p = ParamFunction::constant(vec![1.0]);
        let base = certify_membership(&path, &obs, &p, 0, &opts).unwrap();

        let (same, inh) = perturb_within_class(&base, &path, &p, &ParamFunction::zero(1), &opts).unwrap();
        assert_eq!(same.eval(0.3), p.eval(0.3));
        assert!((inh.alpha - base.alpha / 4.0).abs() < 1e-15);

        let (p2, _) = perturb_within_class(&base, &path, &p, &ParamFunction::constant(vec![1.0]), &opts).unwrap();
        assert!((p2.eval(0.7)[0] - 1.5).abs() < 1e-8, "c = ½");
        let re = certify_membership(&path, &obs, &p2, 0, &opts).unwrap();
        assert!(re.passed && re.alpha >= base.alpha / 4.0 && re.beta >= base.beta / 4.0);
    }

    #[test]
    fn inadmissible_direction_is_rejected() {
        let path = path(&["(t - 0.5)^2 * p0"], 1, &[0.0]);
        let obs = observation_set(&path, Mode::K, &ZeroOptions::default()).unwrap();
        let opts = CertifyOptions::default();
        let p = ParamFunction::constant(vec![0.1]);
        let mut base = certify_membership(&path, &obs, &p, 0, &opts).unwrap();
        // Demand a faster vanishing rate than 𝒟q can provide.
        base.nu_used = 3;
        let err = perturb_within_class(&base, &path, &p, &ParamFunction::constant(vec![1.0]), &opts).unwrap_err();
        assert!(matches!(err, Error::InadmissibleDirection(_)));
    }
}
