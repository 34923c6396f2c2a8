//! Dormand-Prince 5(4) integrator with PI step-size control and the
//! five-coefficient continuous extension for dense output.

use serde::{Deserialize, Serialize};

use crate::error::{OcpError, Result};

/// Right-hand side `y' = f(t, y)`.
pub trait OdeSystem: Sync {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;

    /// Optional upper bound on the next step, evaluated at the start of each step.
    fn max_step(&self, _t: f64, _y: &[f64]) -> Option<f64> {
        None
    }
}

/// Closure adaptor for [`OdeSystem`].
pub struct FnSystem<F> {
    dim: usize,
    f: F,
}

impl<F> FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]) + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> OdeSystem for FnSystem<F>
where
    F: Fn(f64, &[f64], &mut [f64]) + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        (self.f)(t, y, dy);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Initial step; `None` picks one from the local derivatives.
    pub h_init: Option<f64>,
    pub h_min: f64,
    /// Step ceiling; `None` leaves steps unbounded.
    pub h_max: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-8,
            h_init: None,
            h_min: 1e-12,
            h_max: None,
            max_steps: 1_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(OcpError::InvalidParameter(
                "integrator tolerances must be positive".into(),
            ));
        }
        if !(self.h_min >= 0.0 && self.h_min < self.h_max.unwrap_or(f64::INFINITY)) {
            return Err(OcpError::InvalidParameter(
                "integrator requires 0 <= h_min < h_max".into(),
            ));
        }
        if let Some(h) = self.h_init {
            if !(h > 0.0) {
                return Err(OcpError::InvalidParameter("h_init must be positive".into()));
            }
        }
        if self.max_steps == 0 {
            return Err(OcpError::InvalidParameter(
                "max_steps must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Interpolant of one accepted step.
#[derive(Debug, Clone)]
struct Segment {
    t: f64,
    h: f64,
    /// `5 * dim` coefficients, row `k` at `k * dim`.
    coeffs: Vec<f64>,
}

/// Dense solution: accepted step nodes plus the continuous extension.
#[derive(Debug, Clone)]
pub struct DenseTrajectory {
    dim: usize,
    t0: f64,
    y0: Vec<f64>,
    y_end: Vec<f64>,
    segments: Vec<Segment>,
    pub stats: IntegrationStats,
}

impl DenseTrajectory {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t_start(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.segments.last().map_or(self.t0, |s| s.t + s.h)
    }

    /// Times of the accepted step nodes, including both end points.
    pub fn step_times(&self) -> Vec<f64> {
        std::iter::once(self.t0)
            .chain(self.segments.iter().map(|s| s.t + s.h))
            .collect()
    }

    pub fn final_state(&self) -> Vec<f64> {
        self.y_end.clone()
    }

    /// Interpolated state at `t`, clamped to the integration interval.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        if self.segments.is_empty() || t <= self.t0 {
            return self.y0.clone();
        }
        if t >= self.t_end() {
            return self.final_state();
        }
        let idx = self.segments.partition_point(|s| s.t + s.h < t);
        let seg = &self.segments[idx.min(self.segments.len() - 1)];
        let theta = (t - seg.t) / seg.h;
        let theta1 = 1.0 - theta;
        let d = self.dim;
        let c = &seg.coeffs;
        (0..d)
            .map(|i| {
                c[i] + theta
                    * (c[d + i]
                        + theta1 * (c[2 * d + i] + theta * (c[3 * d + i] + theta1 * c[4 * d + i])))
            })
            .collect()
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;
const BETA: f64 = 0.04;

/// Integrates from `t0` to `t1` and keeps the dense interpolant.
pub fn integrate<S: OdeSystem + ?Sized>(
    system: &S,
    t0: f64,
    t1: f64,
    y0: &[f64],
    cfg: &IntegratorConfig,
) -> Result<DenseTrajectory> {
    let mut segments = Vec::new();
    let (stats, y_end) = run(system, t0, t1, y0, cfg, |seg| segments.push(seg))?;
    Ok(DenseTrajectory {
        dim: y0.len(),
        t0,
        y0: y0.to_vec(),
        y_end,
        segments,
        stats,
    })
}

/// Integrates from `t0` to `t1` and returns only the final state.
pub fn propagate<S: OdeSystem + ?Sized>(
    system: &S,
    t0: f64,
    t1: f64,
    y0: &[f64],
    cfg: &IntegratorConfig,
) -> Result<(Vec<f64>, IntegrationStats)> {
    let (stats, y) = run(system, t0, t1, y0, cfg, |_| {})?;
    Ok((y, stats))
}

/// Largest componentwise ratio of the local error estimate to
/// `abs_tol + rel_tol |y|`; a step is accepted when it is at most one. NaN propagates.
fn error_norm(y: &[f64], y_new: &[f64], err: &[f64], cfg: &IntegratorConfig) -> f64 {
    y.iter()
        .zip(y_new)
        .zip(err)
        .map(|((a, b), e)| (e / (cfg.abs_tol + cfg.rel_tol * a.abs().max(b.abs()))).abs())
        .fold(0.0, |m, r| {
            if r.is_nan() || m.is_nan() {
                f64::NAN
            } else {
                m.max(r)
            }
        })
}

#[allow(clippy::too_many_arguments)]
fn initial_step<S: OdeSystem + ?Sized>(
    system: &S,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    span: f64,
    h_max: f64,
    cfg: &IntegratorConfig,
    stats: &mut IntegrationStats,
) -> Result<f64> {
    let d = y0.len();
    let sk: Vec<f64> = y0
        .iter()
        .map(|v| cfg.abs_tol + cfg.rel_tol * v.abs())
        .collect();
    let rms = |v: &[f64]| {
        (v.iter()
            .zip(&sk)
            .map(|(a, s)| (a / s) * (a / s))
            .sum::<f64>()
            / d as f64)
            .sqrt()
    };
    let dnf = rms(f0);
    let dny = rms(y0);
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        0.01 * dny / dnf
    };
    h = h.min(h_max).min(span);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h * f).collect();
    let mut f1 = vec![0.0; d];
    system.rhs(t0 + h, &y1, &mut f1)?;
    stats.evaluations += 1;
    let diff: Vec<f64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
    let der2 = rms(&diff) / h;
    let der12 = dnf.max(der2);
    let h1 = if der12 <= 1e-15 {
        (1e-6f64).max(h * 1e-3)
    } else {
        (0.01 / der12).powf(0.2)
    };
    Ok((100.0 * h).min(h1).min(h_max).min(span))
}

fn run<S, C>(
    system: &S,
    t0: f64,
    t1: f64,
    y0: &[f64],
    cfg: &IntegratorConfig,
    mut on_step: C,
) -> Result<(IntegrationStats, Vec<f64>)>
where
    S: OdeSystem + ?Sized,
    C: FnMut(Segment),
{
    cfg.validate()?;
    let d = system.dim();
    if y0.len() != d {
        return Err(OcpError::Dimension(format!(
            "initial state has length {}, system dim {d}",
            y0.len()
        )));
    }
    if !(t1 > t0) {
        return Err(OcpError::InvalidParameter(format!(
            "integration interval [{t0}, {t1}] is empty"
        )));
    }
    if !y0.iter().all(|v| v.is_finite()) {
        return Err(OcpError::NonFinite { t: t0 });
    }

    let mut stats = IntegrationStats::default();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; d];
    let mut k2 = vec![0.0; d];
    let mut k3 = vec![0.0; d];
    let mut k4 = vec![0.0; d];
    let mut k5 = vec![0.0; d];
    let mut k6 = vec![0.0; d];
    let mut k7 = vec![0.0; d];
    let mut y_stage = vec![0.0; d];
    let mut y_new = vec![0.0; d];
    let mut err = vec![0.0; d];

    system.rhs(t, &y, &mut k1)?;
    stats.evaluations += 1;

    let limit = |t: f64, y: &[f64]| -> f64 {
        let cap = system.max_step(t, y).unwrap_or(f64::INFINITY);
        cfg.h_max.unwrap_or(f64::INFINITY).min(cap)
    };

    let mut h = match cfg.h_init {
        Some(h) => h.min(t1 - t0),
        None => initial_step(system, t, &y, &k1, t1 - t0, limit(t, &y), cfg, &mut stats)?,
    };
    let mut fac_old = 1e-4f64;
    let mut last_rejected = false;
    let mut steps = 0usize;

    loop {
        if steps >= cfg.max_steps {
            return Err(OcpError::MaxStepsExceeded {
                t,
                max_steps: cfg.max_steps,
            });
        }
        steps += 1;
        h = h.min(limit(t, &y));
        if h < cfg.h_min {
            return Err(OcpError::StepUnderflow { t, step: h });
        }
        let last = t + 1.01 * h >= t1;
        if last {
            h = t1 - t;
        }

        for i in 0..d {
            y_stage[i] = y[i] + h * A21 * k1[i];
        }
        system.rhs(t + C2 * h, &y_stage, &mut k2)?;
        for i in 0..d {
            y_stage[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        system.rhs(t + C3 * h, &y_stage, &mut k3)?;
        for i in 0..d {
            y_stage[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        system.rhs(t + C4 * h, &y_stage, &mut k4)?;
        for i in 0..d {
            y_stage[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        system.rhs(t + C5 * h, &y_stage, &mut k5)?;
        for i in 0..d {
            y_stage[i] =
                y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if last { t1 } else { t + h };
        system.rhs(t_new, &y_stage, &mut k6)?;
        for i in 0..d {
            y_new[i] =
                y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        system.rhs(t_new, &y_new, &mut k7)?;
        stats.evaluations += 6;
        for i in 0..d {
            err[i] =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let en = error_norm(&y, &y_new, &err, cfg);
        if !en.is_finite() {
            return Err(OcpError::NonFinite { t });
        }

        let expo = 0.2 - BETA * 0.75;
        let fac11 = en.powf(expo);
        if en <= 1.0 {
            // accepted: build the continuous extension
            let mut coeffs = vec![0.0; 5 * d];
            for i in 0..d {
                let ydiff = y_new[i] - y[i];
                let bspl = h * k1[i] - ydiff;
                coeffs[i] = y[i];
                coeffs[d + i] = ydiff;
                coeffs[2 * d + i] = bspl;
                coeffs[3 * d + i] = ydiff - h * k7[i] - bspl;
                coeffs[4 * d + i] = h
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            on_step(Segment { t, h, coeffs });
            stats.accepted += 1;

            let mut fac = fac11 / fac_old.powf(BETA);
            fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            fac_old = en.max(1e-4);
            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;
            t = t_new;
            y.copy_from_slice(&y_new);
            std::mem::swap(&mut k1, &mut k7);
            if last {
                return Ok((stats, y));
            }
            h = h_new;
        } else {
            stats.rejected += 1;
            last_rejected = true;
            h /= (fac11 / SAFETY).min(1.0 / FAC_MIN);
        }
    }
}
