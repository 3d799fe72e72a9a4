//! Dormand–Prince 5(4) with PI step-size control and the classical
//! fourth-order continuous extension.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];

const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];

const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;

#[derive(Debug, Clone, Copy)]
pub struct Dopri5Options {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Dopri5Options {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            max_steps: 1_000_000,
        }
    }
}

/// One accepted step and its interpolation coefficients.
#[derive(Debug, Clone)]
struct Segment {
    t0: f64,
    h: f64,
    cont: [Vec<f64>; 5],
}

/// Piecewise dense output of an integration over `[t_start, t_end]`.
#[derive(Debug, Clone)]
pub struct DenseSolution {
    t_start: f64,
    t_end: f64,
    y_start: Vec<f64>,
    y_end: Vec<f64>,
    segments: Vec<Segment>,
}

impl DenseSolution {
    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn dim(&self) -> usize {
        self.y_start.len()
    }

    pub fn steps(&self) -> usize {
        self.segments.len()
    }

    pub fn end_state(&self) -> &[f64] {
        &self.y_end
    }

    /// Interpolated state at `t`. Times outside the span are clamped to it.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        if t <= self.t_start || self.segments.is_empty() {
            out.copy_from_slice(&self.y_start);
            return;
        }
        if t >= self.t_end {
            out.copy_from_slice(&self.y_end);
            return;
        }
        let idx = self
            .segments
            .partition_point(|s| s.t0 + s.h <= t)
            .min(self.segments.len() - 1);
        let seg = &self.segments[idx];
        let s = (t - seg.t0) / seg.h;
        let s1 = 1.0 - s;
        let [c0, c1, c2, c3, c4] = &seg.cont;
        for i in 0..out.len() {
            out[i] = c0[i] + s * (c1[i] + s1 * (c2[i] + s * (c3[i] + s1 * c4[i])));
        }
    }
}

/// Integrates `y' = f(t, y)` from `t0` to `t1 > t0`.
///
/// `f` writes the derivative into its output slice and reports evaluation
/// failures as errors. A non-finite derivative or state aborts the run.
pub fn integrate<F>(mut f: F, t0: f64, y0: &[f64], t1: f64, opts: &Dopri5Options) -> Result<DenseSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    if !(t1 > t0) {
        return Err(Error::InvalidInput(format!("integration span [{t0}, {t1}] is empty")));
    }
    if !(opts.rtol > 0.0 && opts.atol > 0.0) {
        return Err(Error::InvalidInput("tolerances must be positive".into()));
    }
    let n = y0.len();
    let mut call = |t: f64, y: &[f64], out: &mut [f64]| -> Result<()> {
        f(t, y, out)?;
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationFailure {
                t,
                reason: "non-finite derivative".into(),
            });
        }
        Ok(())
    };

    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut y = y0.to_vec();
    let mut t = t0;
    call(t, &y, &mut k[0])?;

    let span = t1 - t0;
    let mut h = initial_step(&mut call, t0, &y, &k[0], span, opts)?;
    let h_min = 16.0 * f64::EPSILON * t0.abs().max(t1.abs()).max(1.0);

    let mut segments = Vec::new();
    let mut ystage = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut err_old: f64 = 1e-4;
    let mut rejected_last = false;
    let mut steps = 0usize;

    while t < t1 {
        steps += 1;
        if steps > opts.max_steps {
            return Err(Error::IntegrationFailure {
                t,
                reason: "maximum number of steps exceeded".into(),
            });
        }
        let last = t + h >= t1 - h_min;
        if last {
            h = t1 - t;
        }
        if h < h_min {
            return Err(Error::IntegrationFailure {
                t,
                reason: format!("step size underflow (h = {h:e})"),
            });
        }

        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..s {
                    acc += A[s][j] * k[j][i];
                }
                ystage[i] = y[i] + h * acc;
            }
            if s == 6 {
                ynew.copy_from_slice(&ystage);
            }
            call(t + C[s] * h, &ystage, &mut k[s])?;
        }

        let mut err = 0.0;
        for i in 0..n {
            let e: f64 = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
            let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
            err += (e / sc) * (e / sc);
        }
        let err = if n > 0 { (err / n as f64).sqrt() } else { 0.0 };
        if !err.is_finite() {
            return Err(Error::IntegrationFailure {
                t,
                reason: "non-finite error estimate".into(),
            });
        }

        let expo = 0.2 - BETA * 0.75;
        if err <= 1.0 {
            let mut cont: [Vec<f64>; 5] = Default::default();
            let ydiff: Vec<f64> = (0..n).map(|i| ynew[i] - y[i]).collect();
            let bspl: Vec<f64> = (0..n).map(|i| h * k[0][i] - ydiff[i]).collect();
            cont[3] = (0..n).map(|i| ydiff[i] - h * k[6][i] - bspl[i]).collect();
            cont[4] = (0..n)
                .map(|i| h * (0..7).map(|j| D[j] * k[j][i]).sum::<f64>())
                .collect();
            cont[0] = y.clone();
            cont[1] = ydiff;
            cont[2] = bspl;
            segments.push(Segment { t0: t, h, cont });

            let fac = (err.max(1e-16).powf(expo) / err_old.powf(BETA) / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_next = h / fac;
            if rejected_last {
                h_next = h_next.min(h);
            }
            err_old = err.max(1e-4);
            rejected_last = false;

            t = if last { t1 } else { t + h };
            y.copy_from_slice(&ynew);
            k.swap(0, 6);
            h = h_next;
        } else {
            let fac = (err.powf(expo) / SAFETY).min(1.0 / FAC_MIN);
            h /= fac;
            rejected_last = true;
        }
    }

    Ok(DenseSolution {
        t_start: t0,
        t_end: t1,
        y_start: y0.to_vec(),
        y_end: y,
        segments,
    })
}

fn initial_step<F>(call: &mut F, t0: f64, y0: &[f64], f0: &[f64], span: f64, opts: &Dopri5Options) -> Result<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y0.len();
    let sc: Vec<f64> = y0.iter().map(|y| opts.atol + opts.rtol * y.abs()).collect();
    let rms = |v: &[f64]| -> f64 {
        if n == 0 {
            return 0.0;
        }
        (v.iter().zip(&sc).map(|(x, s)| (x / s) * (x / s)).sum::<f64>() / n as f64).sqrt()
    };
    let d0 = rms(y0);
    let d1 = rms(f0);
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h0 = h0.min(span);
    let y1: Vec<f64> = (0..n).map(|i| y0[i] + h0 * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    call(t0 + h0, &y1, &mut f1)?;
    let diff: Vec<f64> = (0..n).map(|i| f1[i] - f0[i]).collect();
    let d2 = rms(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(span))
}
