//! Zeros of `det 𝒟(t)` (𝒦-mode) or `det ℬ(t)` (ℋ-mode), their asymptotic
//! order and leading coefficient, and the resulting observation set.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::sensitivity::SensitivityPath;

/// Which determinant generates the observation set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Square case: zeros of `det 𝒟`, arbitrary finite order.
    #[serde(rename = "K")]
    K,
    /// `l ≤ n`: zeros of `det ℬ`, second order only.
    #[serde(rename = "H")]
    H,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::K => "K",
            Mode::H => "H",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k" | "K" => Ok(Mode::K),
            "h" | "H" => Ok(Mode::H),
            other => Err(Error::InvalidInput(format!("unknown mode `{other}`"))),
        }
    }
}

/// Numerical thresholds that make "zero of order ν" decidable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroOptions {
    /// Bracket width for bisection and golden-section refinement,
    /// relative to the horizon.
    pub bracket_rel: f64,
    /// Tangential-touch threshold relative to `max |g|` on the grid.
    pub touch_rel: f64,
    /// Order-fit window as a fraction of the horizon.
    pub window_frac: f64,
    /// Number of geometric refinement levels in the order fit.
    pub levels: u32,
    /// Largest accepted distance of the fitted slope from an integer.
    pub max_order_slack: f64,
}

impl Default for ZeroOptions {
    fn default() -> Self {
        Self {
            bracket_rel: 1e-10,
            touch_rel: 1e-8,
            window_frac: 0.05,
            levels: 8,
            max_order_slack: 0.15,
        }
    }
}

/// A certified zero: `g(τ + t) ≈ h t^ν`.
///
/// In ℋ-mode `h` stores `h_τ > 0` of `det ℬ(τ + t) ≈ h_τ² t²` and `ν = 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroRecord {
    pub tau: f64,
    pub nu: u32,
    pub h: f64,
    /// `1 − R²` of the log-log fit, in `[0, 1]`.
    pub residual: f64,
    /// Slope of the log-log fit before rounding.
    pub slope: f64,
}

fn golden_min<F: FnMut(f64) -> Result<f64>>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    let mut iter = 0;
    while (b - a) > tol && iter < 200 {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
        iter += 1;
    }
    Ok(0.5 * (a + b))
}

fn bisect<F: FnMut(f64) -> Result<f64>>(mut f: F, mut a: f64, mut b: f64, mut fa: f64, tol: f64) -> Result<f64> {
    let mut iter = 0;
    while (b - a) > tol && iter < 200 {
        let m = 0.5 * (a + b);
        let fm = f(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
        iter += 1;
    }
    Ok(0.5 * (a + b))
}

/// Locates the zeros of `g` on `grid`.
///
/// 𝒦-mode brackets sign changes and refines them by bisection; tangential
/// zeros show up as local minima of `|g|` below the touch threshold and are
/// refined by golden-section search. ℋ-mode requires `g ≥ −touch` and treats
/// every sufficiently small local minimum as a zero. Endpoints are included
/// when `g` vanishes there.
pub fn find_zeros<F>(g: F, grid: &TimeGrid, mode: Mode, opts: &ZeroOptions) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64>,
{
    let t = grid.points();
    let vals: Vec<f64> = t.iter().map(|&s| g(s)).collect::<Result<_>>()?;
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(Error::ClassMembershipFailure(
            "determinant vanishes identically on the grid".into(),
        ));
    }
    let touch = opts.touch_rel * scale;
    let tol = opts.bracket_rel * grid.span();
    let n = t.len();

    if mode == Mode::H {
        if let Some((k, v)) = vals.iter().enumerate().find(|(_, v)| **v < -touch) {
            return Err(Error::NotPsd { t: t[k], value: *v });
        }
    }

    let abs_g = |s: f64| g(s).map(f64::abs);
    let mut zeros = Vec::new();
    for k in 0..n {
        if vals[k] == 0.0 {
            zeros.push(t[k]);
        }
    }
    if mode == Mode::K {
        for k in 0..n - 1 {
            if vals[k] * vals[k + 1] < 0.0 {
                zeros.push(bisect(&g, t[k], t[k + 1], vals[k], tol)?);
            }
        }
    }
    let same_sign = |a: f64, b: f64| (a > 0.0 && b > 0.0) || (a < 0.0 && b < 0.0);
    for k in 1..n - 1 {
        let (l, c, r) = (vals[k - 1], vals[k], vals[k + 1]);
        if c == 0.0 || c.abs() > l.abs() || c.abs() > r.abs() {
            continue;
        }
        if mode == Mode::K && !(same_sign(l, c) && same_sign(c, r)) {
            continue;
        }
        let s = golden_min(abs_g, t[k - 1], t[k + 1], tol)?;
        if abs_g(s)? <= touch {
            zeros.push(s);
        }
    }
    for (k, nb) in [(0, 1), (n - 1, n - 2)] {
        if vals[k] != 0.0 && vals[k].abs() <= touch && vals[k].abs() <= vals[nb].abs() {
            zeros.push(t[k]);
        }
    }

    zeros.sort_by(f64::total_cmp);
    let merge = 10.0 * tol;
    let mut out: Vec<f64> = Vec::with_capacity(zeros.len());
    for z in zeros {
        match out.last() {
            Some(&last) if z - last <= merge => {}
            _ => out.push(z),
        }
    }
    // Snap refinements that landed next to an endpoint onto it.
    for z in out.iter_mut() {
        if (*z - grid.a()).abs() <= merge {
            *z = grid.a();
        } else if (*z - grid.b()).abs() <= merge {
            *z = grid.b();
        }
    }
    out.dedup();
    Ok(out)
}

/// Fits `g(τ + t) ≈ h t^ν` from geometric samples `t = ±w·2^{−j}`,
/// `j = 0..=levels`, restricted to `[lo, hi]`.
pub fn estimate_order<F>(g: F, tau: f64, window: f64, domain: (f64, f64), mode: Mode, opts: &ZeroOptions) -> Result<ZeroRecord>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(window > 0.0) {
        return Err(Error::WindowTooSmall { tau });
    }
    let (lo, hi) = domain;
    let mut right = Vec::new();
    let mut left = Vec::new();
    for j in 0..=opts.levels {
        let d = window * 0.5f64.powi(j as i32);
        for (side, store) in [(1.0, &mut right), (-1.0, &mut left)] {
            let s = tau + side * d;
            if s < lo || s > hi {
                continue;
            }
            let v = g(s)?;
            if v == 0.0 || !v.is_finite() {
                return Err(Error::WindowTooSmall { tau });
            }
            store.push((j, side * d, v));
        }
    }
    let all: Vec<(u32, f64, f64)> = right.iter().chain(&left).copied().collect();
    if all.len() < 3 {
        return Err(Error::WindowTooSmall { tau });
    }
    let xs: Vec<f64> = all.iter().map(|(_, d, _)| d.abs().ln()).collect();
    let ys: Vec<f64> = all.iter().map(|(_, _, v)| v.abs().ln()).collect();
    let m = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / m;
    let ym = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let syy: f64 = ys.iter().map(|y| (y - ym) * (y - ym)).sum();
    if sxx == 0.0 {
        return Err(Error::WindowTooSmall { tau });
    }
    let slope = sxy / sxx;
    let residual = if syy > 0.0 {
        (1.0 - sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let nu_f = slope.round();
    if nu_f < 1.0 || (slope - nu_f).abs() > opts.max_order_slack {
        return Err(Error::OrderIndeterminate { tau, slope });
    }
    let nu = nu_f as u32;
    if mode == Mode::H && nu != 2 {
        return Err(Error::ClassMembershipFailure(format!(
            "det ℬ has a zero of order {nu} at t = {tau}; only second-order zeros are admissible"
        )));
    }

    // Intercept with the slope pinned to ν, over the finer half of each side.
    let fine = |side: &[(u32, f64, f64)]| -> Vec<(f64, f64)> {
        side.iter()
            .filter(|(j, _, _)| *j >= opts.levels / 2)
            .map(|&(_, d, v)| (d, v))
            .collect()
    };
    let primary = if right.is_empty() { fine(&left) } else { fine(&right) };
    let primary = if primary.is_empty() {
        all.iter().map(|&(_, d, v)| (d, v)).collect()
    } else {
        primary
    };
    let log_h = primary
        .iter()
        .map(|(d, v)| v.abs().ln() - nu as f64 * d.abs().ln())
        .sum::<f64>()
        / primary.len() as f64;
    let (d0, v0) = primary[0];
    let h = match mode {
        Mode::K => {
            // g(τ + d) = h d^ν with signed d.
            let sign = v0.signum() * if d0 < 0.0 && nu % 2 == 1 { -1.0 } else { 1.0 };
            sign * log_h.exp()
        }
        Mode::H => (0.5 * log_h).exp(),
    };
    Ok(ZeroRecord {
        tau,
        nu,
        h,
        residual,
        slope,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointKind {
    Start,
    Interior,
    End,
}

/// One element `τ_k` of the observation set with its order `ν_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationPoint {
    pub tau: f64,
    pub kind: PointKind,
    /// `ν_k`; zero at an endpoint where the determinant does not vanish.
    pub order: u32,
    /// Fitted leading coefficient when the determinant vanishes here.
    pub coefficient: Option<f64>,
    pub residual: Option<f64>,
    /// Set for an endpoint zero, whose order comes from a one-sided fit.
    pub endpoint_fitted: bool,
}

impl ObservationPoint {
    pub fn vanishes(&self) -> bool {
        self.order > 0
    }
}

/// `Θ = {τ₀ = 0 < τ₁ < … < τ_{s+1} = T}` with orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub mode: Mode,
    pub horizon: f64,
    pub points: Vec<ObservationPoint>,
    /// Absolute threshold below which the determinant counts as zero.
    pub zero_threshold: f64,
}

impl ObservationSet {
    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.tau).collect()
    }

    pub fn orders(&self) -> Vec<u32> {
        self.points.iter().map(|p| p.order).collect()
    }

    /// Number of intervals `[τ_k, τ_{k+1}]`, i.e. `s + 1`.
    pub fn interval_count(&self) -> usize {
        self.points.len() - 1
    }

    pub fn interval(&self, k: usize) -> Result<(f64, f64)> {
        if k + 1 >= self.points.len() {
            return Err(Error::InvalidInput(format!(
                "interval index {k} out of range (s + 1 = {})",
                self.interval_count()
            )));
        }
        Ok((self.points[k].tau, self.points[k + 1].tau))
    }

    /// Interior zeros `τ_1, …, τ_s`.
    pub fn interior(&self) -> impl Iterator<Item = &ObservationPoint> {
        self.points.iter().filter(|p| p.kind == PointKind::Interior)
    }
}

/// Builds `Θ` and `ϑ` for the reference in `path`.
pub fn observation_set(path: &SensitivityPath, mode: Mode, opts: &ZeroOptions) -> Result<ObservationSet> {
    let sys = path.system();
    match mode {
        Mode::K if sys.n() != sys.l() => {
            return Err(Error::InvalidInput(format!(
                "𝒦-mode needs n = l, got n = {}, l = {}",
                sys.n(),
                sys.l()
            )))
        }
        Mode::H if sys.l() > sys.n() => {
            return Err(Error::InvalidInput(format!(
                "ℋ-mode needs l ≤ n, got n = {}, l = {}",
                sys.n(),
                sys.l()
            )))
        }
        _ => {}
    }
    let horizon = path.horizon();
    let g = |t: f64| path.determinant_at(t, mode);
    let zeros = find_zeros(g, path.grid(), mode, opts)?;
    let samples = path.determinant_samples(mode)?;
    let scale = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let zero_threshold = opts.touch_rel * scale;

    let max_window = opts.window_frac * horizon;
    let window_for = |i: usize| -> f64 {
        let z = zeros[i];
        let mut w = max_window;
        if i > 0 {
            w = w.min(0.5 * (z - zeros[i - 1]));
        }
        if i + 1 < zeros.len() {
            w = w.min(0.5 * (zeros[i + 1] - z));
        }
        w
    };

    let mut records = Vec::with_capacity(zeros.len());
    for (i, &z) in zeros.iter().enumerate() {
        let rec = estimate_order(g, z, window_for(i), (0.0, horizon), mode, opts).map_err(|e| match e {
            Error::OrderIndeterminate { tau, slope } => Error::ClassMembershipFailure(format!(
                "zero at t = {tau} has non-integer order (fitted slope {slope:.4})"
            )),
            other => other,
        })?;
        records.push(rec);
    }

    let endpoint = |t: f64, kind: PointKind| -> ObservationPoint {
        match records.iter().find(|r| r.tau == t) {
            Some(r) => ObservationPoint {
                tau: t,
                kind,
                order: r.nu,
                coefficient: Some(r.h),
                residual: Some(r.residual),
                endpoint_fitted: true,
            },
            None => ObservationPoint {
                tau: t,
                kind,
                order: 0,
                coefficient: None,
                residual: None,
                endpoint_fitted: false,
            },
        }
    };
    let mut points = vec![endpoint(0.0, PointKind::Start)];
    points.extend(records.iter().filter(|r| r.tau > 0.0 && r.tau < horizon).map(|r| ObservationPoint {
        tau: r.tau,
        kind: PointKind::Interior,
        order: r.nu,
        coefficient: Some(r.h),
        residual: Some(r.residual),
        endpoint_fitted: false,
    }));
    points.push(endpoint(horizon, PointKind::End));
    Ok(ObservationSet {
        mode,
        horizon,
        points,
        zero_threshold,
    })
}
