//! Distinguishability at observation points and the empirical consistency
//! experiments: every certified perturbation must be distinguished at Θ.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classes::{certify_membership, CertifyOptions, Variant};
use crate::error::{Error, Result};
use crate::expr::param_from_exprs;
use crate::grid::euclidean_norm;
use crate::ode::{integrate_from, ParamFunction, SystemModel};
use crate::sensitivity::SensitivityPath;
use crate::zeros::{Mode, ObservationSet};

/// Separation at or below `SEPARATION_FACTOR · integrator tol` counts as
/// "indistinguishable".
pub const SEPARATION_FACTOR: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinguishVerdict {
    pub distinguished: bool,
    /// First observation point where the states differ by more than `tol_used`.
    pub witness_point: Option<f64>,
    /// `max_{θ ∈ Θ} |Δ_p x(θ)|`.
    pub separation: f64,
    pub tol_used: f64,
    /// `|Δ_p x(θ)|` per observation point.
    pub deltas: Vec<f64>,
}

fn verdict(times: &[f64], deltas: Vec<f64>, tol: f64) -> DistinguishVerdict {
    let separation = deltas.iter().copied().fold(0.0, f64::max);
    let witness_point = times.iter().zip(&deltas).find(|(_, &d)| d > tol).map(|(&t, _)| t);
    DistinguishVerdict {
        distinguished: separation > tol,
        witness_point,
        separation,
        tol_used: tol,
        deltas,
    }
}

fn check_times(times: &[f64], horizon: f64) -> Result<()> {
    if times.is_empty() || times.iter().any(|&t| !(0.0..=horizon).contains(&t)) {
        return Err(Error::InvalidInput(format!(
            "observation points must be a nonempty subset of [0, {horizon}]"
        )));
    }
    Ok(())
}

/// Integrates both parameters from `x₀` and compares the states at `times`.
/// `tol` defaults to `100 · integrator_tol`.
pub fn distinguish(
    system: &SystemModel,
    p0: &ParamFunction,
    p: &ParamFunction,
    times: &[f64],
    integrator_tol: f64,
    tol: Option<f64>,
) -> Result<DistinguishVerdict> {
    check_times(times, system.horizon())?;
    let a = integrate_from(system, p0, 0.0, system.x0(), system.horizon(), integrator_tol)?;
    let b = integrate_from(system, p, 0.0, system.x0(), system.horizon(), integrator_tol)?;
    let deltas = times
        .iter()
        .map(|&t| {
            let (xa, xb) = (a.eval(t), b.eval(t));
            euclidean_norm(&xa.iter().zip(&xb).map(|(u, v)| v - u).collect::<Vec<_>>())
        })
        .collect();
    Ok(verdict(times, deltas, tol.unwrap_or(SEPARATION_FACTOR * integrator_tol)))
}

/// As [`distinguish`], reusing the reference solution held by `path`.
pub fn distinguish_from_path(path: &SensitivityPath, p: &ParamFunction, times: &[f64], tol: Option<f64>) -> Result<DistinguishVerdict> {
    let sys = path.system();
    check_times(times, sys.horizon())?;
    let itol = path.integrator_tol();
    let b = integrate_from(sys, p, 0.0, sys.x0(), sys.horizon(), itol)?;
    let deltas = times
        .iter()
        .map(|&t| {
            let (xa, xb) = (path.reference().state_at(t), b.eval(t));
            euclidean_norm(&xa.iter().zip(&xb).map(|(u, v)| v - u).collect::<Vec<_>>())
        })
        .collect();
    Ok(verdict(times, deltas, tol.unwrap_or(SEPARATION_FACTOR * itol)))
}

/// A named perturbation direction `q`; rows use `p₀ + εq`.
#[derive(Debug, Clone)]
pub struct Direction {
    pub name: String,
    pub q: ParamFunction,
}

impl Direction {
    /// The scalar expression `expr` in `t`, repeated in all `l` components.
    pub fn broadcast(expr: &str, l: usize) -> Result<Self> {
        Ok(Self {
            name: expr.to_string(),
            q: param_from_exprs(&vec![expr.to_string(); l])?,
        })
    }
}

/// `{1, t, t − 0.5, (t − 0.5)²}`.
pub fn standard_directions(l: usize) -> Result<Vec<Direction>> {
    ["1", "t", "t - 0.5", "(t - 0.5)^2"].iter().map(|e| Direction::broadcast(e, l)).collect()
}

pub const STANDARD_EPSILONS: [f64; 3] = [1e-1, 1e-2, 1e-3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    /// Rows with larger ε are reported but never counted as counterexamples.
    pub eps_max: f64,
    /// Separation threshold; `None` means `100 · integrator tol`.
    pub separation_tol: Option<f64>,
    pub certify: CertifyOptions,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            eps_max: 1e-1,
            separation_tol: None,
            certify: CertifyOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub interval_index: usize,
    pub variant: Option<Variant>,
    pub passed: bool,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub kappa: Option<f64>,
    pub failure_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub index: usize,
    pub direction: String,
    pub epsilon: f64,
    /// Passed certification on every interval.
    pub certified: bool,
    pub certificates: Vec<CertificateSummary>,
    pub verdict: DistinguishVerdict,
    pub within_eps_max: bool,
    /// Certified, `ε ≤ ε_max` and not distinguished.
    pub counterexample: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub system: String,
    pub mode: Mode,
    pub theta: Vec<f64>,
    pub orders: Vec<u32>,
    pub rows: Vec<ExperimentRow>,
    /// Rows with `ε = 0`, dropped because identical parameters are never
    /// distinguishable.
    pub excluded_rows: usize,
    pub certified_rows: usize,
    pub distinguished_certified_rows: usize,
    pub fraction_distinguished: Option<f64>,
    pub min_certified_separation: Option<f64>,
    /// Row indices of certified, indistinguishable rows with `ε ≤ ε_max`.
    pub counterexamples: Vec<usize>,
    /// Row indices of certified, indistinguishable rows with `ε > ε_max`.
    pub large_eps_failures: Vec<usize>,
}

fn summarize(path: &SensitivityPath, obs: &ObservationSet, p: &ParamFunction, opts: &CertifyOptions) -> Result<Vec<CertificateSummary>> {
    (0..obs.interval_count())
        .map(|k| match certify_membership(path, obs, p, k, opts) {
            Ok(c) => Ok(CertificateSummary {
                interval_index: k,
                variant: Some(c.variant),
                passed: c.passed,
                alpha: Some(c.alpha),
                beta: Some(c.beta),
                kappa: c.kappa,
                failure_reason: c.failure_reason,
            }),
            Err(
                e @ (Error::DegeneratePerturbation { .. }
                | Error::DegenerateDirection { .. }
                | Error::PartitionInconsistency { .. }),
            ) => Ok(CertificateSummary {
                interval_index: k,
                variant: None,
                passed: false,
                alpha: None,
                beta: None,
                kappa: None,
                failure_reason: Some(e.to_string()),
            }),
            Err(e) => Err(e),
        })
        .collect()
}

/// Certifies and tests every `p₀ + εq` for `q` in `family`, `ε` in `eps_grid`.
/// Rows run in parallel and are assembled in (direction, ε) order.
pub fn identifiability_experiment(
    path: &SensitivityPath,
    obs: &ObservationSet,
    family: &[Direction],
    eps_grid: &[f64],
    opts: &ExperimentOptions,
) -> Result<ExperimentReport> {
    let l = path.system().l();
    if let Some(d) = family.iter().find(|d| d.q.dim() != l) {
        return Err(Error::InvalidInput(format!(
            "direction `{}` has dimension {}, system has l = {l}",
            d.name,
            d.q.dim()
        )));
    }
    let mut jobs = Vec::new();
    let mut excluded_rows = 0;
    for d in family {
        for &eps in eps_grid {
            if eps == 0.0 {
                excluded_rows += 1;
            } else {
                jobs.push((d, eps));
            }
        }
    }
    let times = obs.times();
    let rows: Vec<ExperimentRow> = jobs
        .par_iter()
        .enumerate()
        .map(|(index, &(d, eps))| -> Result<ExperimentRow> {
            let p = path.p0().plus_scaled(eps, &d.q);
            let certificates = summarize(path, obs, &p, &opts.certify)?;
            let certified = certificates.iter().all(|c| c.passed);
            let verdict = distinguish_from_path(path, &p, &times, opts.separation_tol)?;
            let within_eps_max = eps.abs() <= opts.eps_max;
            Ok(ExperimentRow {
                index,
                direction: d.name.clone(),
                epsilon: eps,
                certified,
                certificates,
                counterexample: certified && within_eps_max && !verdict.distinguished,
                verdict,
                within_eps_max,
            })
        })
        .collect::<Result<_>>()?;

    let certified: Vec<&ExperimentRow> = rows.iter().filter(|r| r.certified).collect();
    let distinguished_certified_rows = certified.iter().filter(|r| r.verdict.distinguished).count();
    let counterexamples = rows.iter().filter(|r| r.counterexample).map(|r| r.index).collect();
    let large_eps_failures = rows
        .iter()
        .filter(|r| r.certified && !r.within_eps_max && !r.verdict.distinguished)
        .map(|r| r.index)
        .collect();
    Ok(ExperimentReport {
        system: path.system().name().to_string(),
        mode: obs.mode,
        theta: times,
        orders: obs.orders(),
        excluded_rows,
        certified_rows: certified.len(),
        distinguished_certified_rows,
        fraction_distinguished: (!certified.is_empty()).then(|| distinguished_certified_rows as f64 / certified.len() as f64),
        min_certified_separation: certified.iter().map(|r| r.verdict.separation).reduce(f64::min),
        counterexamples,
        large_eps_failures,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlRow {
    pub direction: String,
    pub epsilon: f64,
    pub reduced: DistinguishVerdict,
    pub full: DistinguishVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativeControlReport {
    pub system: String,
    pub reduced_theta: Vec<f64>,
    pub full_theta: Vec<f64>,
    pub rows: Vec<ControlRow>,
    /// First direction invisible at the reduced set but seen at the full set.
    pub witness: Option<String>,
}

/// Shows that dropping points from `Θ` loses distinguishability: searches
/// `family` for a direction indistinguishable at `reduced` but
/// distinguished at the full set.
pub fn negative_control(
    path: &SensitivityPath,
    full: &ObservationSet,
    reduced: &[f64],
    family: &[Direction],
    eps: f64,
    tol: Option<f64>,
) -> Result<NegativeControlReport> {
    let full_theta = full.times();
    let eq_tol = 1e-9 * full.horizon;
    let contained = reduced.iter().all(|r| full_theta.iter().any(|f| (f - r).abs() <= eq_tol));
    let mut distinct = reduced.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() <= eq_tol);
    if reduced.is_empty() || !contained || distinct.len() >= full_theta.len() {
        return Err(Error::InvalidInput(format!(
            "reduced observation set {reduced:?} is not a proper subset of {full_theta:?}"
        )));
    }
    let rows: Vec<ControlRow> = family
        .par_iter()
        .map(|d| -> Result<ControlRow> {
            let p = path.p0().plus_scaled(eps, &d.q);
            Ok(ControlRow {
                direction: d.name.clone(),
                epsilon: eps,
                reduced: distinguish_from_path(path, &p, reduced, tol)?,
                full: distinguish_from_path(path, &p, &full_theta, tol)?,
            })
        })
        .collect::<Result<_>>()?;
    let witness = rows
        .iter()
        .find(|r| !r.reduced.distinguished && r.full.distinguished)
        .map(|r| r.direction.clone());
    Ok(NegativeControlReport {
        system: path.system().name().to_string(),
        reduced_theta: reduced.to_vec(),
        full_theta,
        rows,
        witness,
    })
}
