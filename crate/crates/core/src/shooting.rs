//! Single shooting on the initial costate.
//!
//! The residual integrates the augmented ODE from `(x0, lam0)` over the horizon
//! and evaluates the terminal condition. It is driven to zero by a damped
//! Newton iteration with a forward-difference Jacobian whose columns are
//! integrated in parallel.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::SmoothedSystem;
use crate::error::{OcpError, Result};
use crate::integrator::{propagate, IntegratorConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShootingConfig {
    /// Convergence threshold on `||Psi||_inf`.
    pub fun_tol: f64,
    /// Relative step length below which the iteration is considered stalled.
    pub step_tol: f64,
    pub max_iters: usize,
    /// Relative forward-difference step for Jacobian columns.
    pub fd_step: f64,
    /// Sufficient-decrease factor on `||Psi||_2`.
    pub armijo: f64,
    /// Step shrink factor during backtracking.
    pub shrink: f64,
    pub max_backtracks: usize,
    /// Line-search trials may take at most this multiple of the current
    /// iterate's integration steps; costlier trials count as failures.
    pub trial_step_factor: f64,
    /// Consecutive iterations with less than `stall_reduction` relative
    /// decrease of `||Psi||_2` after which the solve is abandoned.
    pub stall_window: usize,
    pub stall_reduction: f64,
    /// Worker threads for Jacobian columns; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self {
            fun_tol: 1e-8,
            step_tol: 1e-14,
            max_iters: 100,
            fd_step: 1e-7,
            armijo: 1e-4,
            shrink: 0.5,
            max_backtracks: 30,
            trial_step_factor: 20.0,
            stall_window: 3,
            stall_reduction: 1e-2,
            threads: None,
        }
    }
}

impl ShootingConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("fun_tol", self.fun_tol),
            ("step_tol", self.step_tol),
            ("fd_step", self.fd_step),
            ("trial_step_factor", self.trial_step_factor),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(OcpError::InvalidParameter(format!(
                    "{name} must be positive"
                )));
            }
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(OcpError::InvalidParameter(
                "shrink must lie in (0, 1)".into(),
            ));
        }
        if !(self.armijo >= 0.0 && self.armijo < 1.0) {
            return Err(OcpError::InvalidParameter(
                "armijo must lie in [0, 1)".into(),
            ));
        }
        if !(self.stall_reduction >= 0.0 && self.stall_reduction < 1.0) {
            return Err(OcpError::InvalidParameter(
                "stall_reduction must lie in [0, 1)".into(),
            ));
        }
        if self.max_iters == 0 || self.stall_window == 0 || self.threads == Some(0) {
            return Err(OcpError::InvalidParameter(
                "max_iters, stall_window and threads must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Iteration record of one shooting solve.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ShootingReport {
    pub iterations: usize,
    /// `||Psi||_inf` at every iterate, starting with the guess.
    pub residual_history: Vec<f64>,
    /// Jacobian condition number at every Newton step.
    pub condition_estimates: Vec<f64>,
    /// Accepted step fractions.
    pub step_fractions: Vec<f64>,
    pub residual_evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct ShootingSolution {
    pub lam0: DVector<f64>,
    pub residual: DVector<f64>,
    pub report: ShootingReport,
}

impl ShootingSolution {
    pub fn residual_norm(&self) -> f64 {
        self.residual.amax()
    }
}

/// `Psi(lam0) = psi(x(0), x(T), T)` after integrating the augmented ODE.
pub fn shooting_residual(
    system: &SmoothedSystem<'_>,
    lam0: &DVector<f64>,
    integrator: &IntegratorConfig,
) -> Result<DVector<f64>> {
    residual_and_steps(system, lam0, integrator).map(|(r, _)| r)
}

/// Residual together with the number of attempted integration steps.
fn residual_and_steps(
    system: &SmoothedSystem<'_>,
    lam0: &DVector<f64>,
    integrator: &IntegratorConfig,
) -> Result<(DVector<f64>, usize)> {
    let boundary = system.problem.boundary();
    let n = system.state_dim();
    if lam0.len() != n {
        return Err(OcpError::Dimension(format!(
            "costate guess has length {}, expected {n}",
            lam0.len()
        )));
    }
    if !lam0.iter().all(|v| v.is_finite()) {
        return Err(OcpError::NonFinite { t: 0.0 });
    }
    let mut y0 = Vec::with_capacity(2 * n);
    y0.extend_from_slice(boundary.initial_state.as_slice());
    y0.extend_from_slice(lam0.as_slice());
    let (y_end, stats) = propagate(system, 0.0, boundary.horizon, &y0, integrator)?;
    let x_final = DVector::from_column_slice(&y_end[..n]);
    let residual = boundary
        .terminal
        .evaluate(&boundary.initial_state, &x_final, boundary.horizon);
    Ok((residual, stats.accepted + stats.rejected))
}

/// Forward-difference Jacobian of the residual, one column per costate component.
pub fn shooting_jacobian(
    system: &SmoothedSystem<'_>,
    lam0: &DVector<f64>,
    residual: &DVector<f64>,
    integrator: &IntegratorConfig,
    config: &ShootingConfig,
) -> Result<DMatrix<f64>> {
    let n = lam0.len();
    let column = |j: usize| -> Result<DVector<f64>> {
        let step = config.fd_step * lam0[j].abs().max(1.0);
        let mut probe = lam0.clone();
        probe[j] += step;
        match shooting_residual(system, &probe, integrator) {
            Ok(r) => Ok((r - residual) / step),
            Err(_) => {
                probe[j] = lam0[j] - step;
                Ok((residual - shooting_residual(system, &probe, integrator)?) / step)
            }
        }
    };
    let columns: Vec<Result<DVector<f64>>> = match config.threads {
        Some(threads) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| OcpError::InvalidParameter(format!("thread pool: {e}")))?;
            pool.install(|| (0..n).into_par_iter().map(column).collect())
        }
        None => (0..n).into_par_iter().map(column).collect(),
    };
    let columns = columns.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_columns(&columns))
}

/// Newton step and condition number. Square systems use LU; otherwise
/// the least-squares step from the SVD.
fn newton_direction(
    jacobian: &DMatrix<f64>,
    residual: &DVector<f64>,
) -> Result<(DVector<f64>, f64)> {
    let svd = jacobian.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let rcond = if smax > 0.0 { smin / smax } else { 0.0 };
    if !(rcond > 1e-14) || jacobian.nrows() < jacobian.ncols() {
        return Err(OcpError::SingularJacobian { rcond });
    }
    let rhs = -residual;
    let step = if jacobian.is_square() {
        jacobian
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or(OcpError::SingularJacobian { rcond })?
    } else {
        svd.solve(&rhs, 0.0)
            .map_err(|_| OcpError::SingularJacobian { rcond })?
    };
    Ok((step, 1.0 / rcond))
}

/// Solves `Psi(lam0) = 0` by damped Newton from `guess`.
pub fn solve_shooting(
    system: &SmoothedSystem<'_>,
    guess: &DVector<f64>,
    integrator: &IntegratorConfig,
    config: &ShootingConfig,
) -> Result<ShootingSolution> {
    config.validate()?;
    let mut report = ShootingReport::default();
    let mut lam = guess.clone();
    let (mut residual, mut steps) = residual_and_steps(system, &lam, integrator)?;
    report.residual_evaluations += 1;
    let mut stalled = 0;

    loop {
        let inf = residual.amax();
        report.residual_history.push(inf);
        if inf <= config.fun_tol {
            return Ok(ShootingSolution {
                lam0: lam,
                residual,
                report,
            });
        }
        if report.iterations >= config.max_iters || stalled >= config.stall_window {
            return Err(OcpError::NoConvergence {
                iterations: report.iterations,
                residual: inf,
            });
        }

        let jacobian = shooting_jacobian(system, &lam, &residual, integrator, config)?;
        report.residual_evaluations += lam.len();
        let (direction, cond) = newton_direction(&jacobian, &residual)?;
        report.condition_estimates.push(cond);

        let budget = (config.trial_step_factor * steps as f64).ceil() as usize;
        let trial_integrator = IntegratorConfig {
            max_steps: integrator.max_steps.min(budget.max(1)),
            ..*integrator
        };
        let norm = residual.norm();
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=config.max_backtracks {
            let trial = &lam + alpha * &direction;
            report.residual_evaluations += 1;
            if let Ok((r, n)) = residual_and_steps(system, &trial, &trial_integrator) {
                if r.norm() <= (1.0 - config.armijo * alpha) * norm {
                    accepted = Some((trial, r, n));
                    break;
                }
            }
            alpha *= config.shrink;
        }
        report.iterations += 1;
        let Some((trial, r, n)) = accepted else {
            return Err(OcpError::NoConvergence {
                iterations: report.iterations,
                residual: inf,
            });
        };
        let step_len = (&trial - &lam).norm();
        stalled = if r.norm() > (1.0 - config.stall_reduction) * norm {
            stalled + 1
        } else {
            0
        };
        report.step_fractions.push(alpha);
        lam = trial;
        residual = r;
        steps = n;
        if step_len <= config.step_tol * (1.0 + lam.norm()) && residual.amax() > config.fun_tol {
            report.residual_history.push(residual.amax());
            return Err(OcpError::NoConvergence {
                iterations: report.iterations,
                residual: residual.amax(),
            });
        }
    }
}
