//! Continuation over a decreasing sequence of sharpness levels, each level
//! warm-started from the converged initial costate of the previous one.

use std::fmt;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dynamics::{JumpCoefficient, SmoothedSystem};
use crate::error::{OcpError, Result};
use crate::integrator::IntegratorConfig;
use crate::problem::{ProblemDefinition, QuadraticCost};
use crate::shooting::{solve_shooting, ShootingConfig, ShootingReport, ShootingSolution};
use crate::smoothing::SharpnessParams;
use crate::trajectory::{compute_cost, sample_trajectory, TrajectorySolution};

/// Sharpness levels in solve order.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationSchedule {
    levels: Vec<SharpnessParams>,
}

impl ContinuationSchedule {
    /// Tied schedule `rho1 = rho2 = rho3 = rho`, strictly decreasing.
    pub fn uniform(rhos: &[f64]) -> Result<Self> {
        if rhos.is_empty() {
            return Err(OcpError::InvalidParameter(
                "schedule must not be empty".into(),
            ));
        }
        if rhos.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(OcpError::InvalidParameter(
                "schedule must be strictly decreasing".into(),
            ));
        }
        let levels = rhos
            .iter()
            .map(|&r| SharpnessParams::uniform(r))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { levels })
    }

    /// Independent per-parameter levels; each parameter must be non-increasing.
    pub fn from_params(levels: Vec<SharpnessParams>) -> Result<Self> {
        if levels.is_empty() {
            return Err(OcpError::InvalidParameter(
                "schedule must not be empty".into(),
            ));
        }
        let increasing = levels
            .windows(2)
            .any(|w| w[1].rho1 > w[0].rho1 || w[1].rho2 > w[0].rho2 || w[1].rho3 > w[0].rho3);
        if increasing {
            return Err(OcpError::InvalidParameter(
                "sharpness parameters must not increase".into(),
            ));
        }
        Ok(Self { levels })
    }

    pub fn levels(&self) -> &[SharpnessParams] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// Integrator, shooting and sampling settings shared by every level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub integrator: IntegratorConfig,
    pub shooting: ShootingConfig,
    pub jump: JumpCoefficient,
    /// Uniform sampling intervals of the recorded trajectories.
    pub sample_intervals: usize,
    /// Depth of geometric-midpoint refinement tried when a level fails to
    /// converge from the previous level's costate.
    pub max_refinements: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig::default(),
            shooting: ShootingConfig::default(),
            jump: JumpCoefficient::default(),
            sample_intervals: 2000,
            max_refinements: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub rho: f64,
    pub params: SharpnessParams,
    pub lam0: Vec<f64>,
    pub residual_norm: f64,
    pub cost: f64,
    #[serde(rename = "max_S")]
    pub max_constraint: f64,
    pub iterations: usize,
    pub wall_time: f64,
    pub converged: bool,
    /// Intermediate sharpness levels solved on the way to this one.
    #[serde(default)]
    pub refinements: Vec<f64>,
    pub shooting: ShootingReport,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContinuationReport {
    pub initial_guess: Vec<f64>,
    pub levels: Vec<LevelRecord>,
}

impl ContinuationReport {
    /// `|lam0(i+1) - lam0(i)|` along the schedule.
    pub fn costate_deltas(&self) -> Vec<f64> {
        self.levels
            .windows(2)
            .map(|w| {
                w[0].lam0
                    .iter()
                    .zip(&w[1].lam0)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    pub fn cost_deltas(&self) -> Vec<f64> {
        self.levels
            .windows(2)
            .map(|w| (w[1].cost - w[0].cost).abs())
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct ContinuationOutcome {
    pub report: ContinuationReport,
    /// One sampled trajectory per converged level.
    pub trajectories: Vec<TrajectorySolution>,
}

impl ContinuationOutcome {
    pub fn empty() -> Self {
        Self {
            report: ContinuationReport::default(),
            trajectories: Vec::new(),
        }
    }

    pub fn final_trajectory(&self) -> Option<&TrajectorySolution> {
        self.trajectories.last()
    }
}

/// A level failed; earlier levels are kept in `partial`.
#[derive(Debug, Clone)]
pub struct ContinuationFailure {
    pub rho: f64,
    pub partial: ContinuationOutcome,
    pub source: OcpError,
}

impl fmt::Display for ContinuationFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "continuation level rho = {} failed after {} converged level(s): {}",
            self.rho,
            self.partial.report.levels.len(),
            self.source
        )
    }
}

impl std::error::Error for ContinuationFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

/// Unconstrained extremal (activations off).
#[derive(Debug, Clone)]
pub struct UnconstrainedSolution {
    pub lam0: DVector<f64>,
    pub shooting: ShootingReport,
    pub trajectory: TrajectorySolution,
    pub cost: f64,
}

pub fn solve_unconstrained(
    problem: &dyn ProblemDefinition,
    cost: &QuadraticCost,
    guess: &DVector<f64>,
    settings: &SolverSettings,
) -> Result<UnconstrainedSolution> {
    let system = SmoothedSystem::unconstrained(problem, cost);
    let solution = solve_shooting(&system, guess, &settings.integrator, &settings.shooting)?;
    let trajectory = sample_trajectory(
        &system,
        &solution.lam0,
        &settings.integrator,
        settings.sample_intervals,
    )?;
    let cost = compute_cost(&trajectory);
    Ok(UnconstrainedSolution {
        lam0: solution.lam0,
        shooting: solution.report,
        trajectory,
        cost,
    })
}

/// Runs the schedule from `lam0_init`; each converged level seeds the next.
pub fn run_continuation(
    problem: &dyn ProblemDefinition,
    cost: &QuadraticCost,
    schedule: &ContinuationSchedule,
    lam0_init: &DVector<f64>,
    settings: &SolverSettings,
) -> std::result::Result<ContinuationOutcome, ContinuationFailure> {
    run_continuation_with(problem, cost, schedule, lam0_init, settings, |_| {})
}

/// As [`run_continuation`], calling `on_level` after each converged level.
pub fn run_continuation_with<C>(
    problem: &dyn ProblemDefinition,
    cost: &QuadraticCost,
    schedule: &ContinuationSchedule,
    lam0_init: &DVector<f64>,
    settings: &SolverSettings,
    mut on_level: C,
) -> std::result::Result<ContinuationOutcome, ContinuationFailure>
where
    C: FnMut(&LevelRecord),
{
    let mut outcome = ContinuationOutcome {
        report: ContinuationReport {
            initial_guess: lam0_init.as_slice().to_vec(),
            levels: Vec::new(),
        },
        trajectories: Vec::new(),
    };
    let mut guess = lam0_init.clone();
    let mut previous = None;
    for params in schedule.levels() {
        let started = Instant::now();
        let system = SmoothedSystem::new(problem, cost, *params).with_jump(settings.jump);
        let mut refinements = Vec::new();
        let level = LevelSolve {
            problem,
            cost,
            settings,
        };
        let solved = level
            .solve(previous, *params, &guess, 0, &mut refinements)
            .and_then(|s| {
                let traj = sample_trajectory(
                    &system,
                    &s.lam0,
                    &settings.integrator,
                    settings.sample_intervals,
                )?;
                Ok((s, traj))
            });
        let (solution, trajectory) = match solved {
            Ok(v) => v,
            Err(source) => {
                return Err(ContinuationFailure {
                    rho: params.rho1,
                    partial: outcome,
                    source,
                })
            }
        };
        let record = LevelRecord {
            rho: params.rho1,
            params: *params,
            lam0: solution.lam0.as_slice().to_vec(),
            residual_norm: solution.residual_norm(),
            cost: compute_cost(&trajectory),
            max_constraint: trajectory.max_constraint(),
            iterations: solution.report.iterations,
            wall_time: started.elapsed().as_secs_f64(),
            converged: true,
            refinements,
            shooting: solution.report,
        };
        on_level(&record);
        guess = solution.lam0;
        previous = Some(*params);
        outcome.report.levels.push(record);
        outcome.trajectories.push(trajectory);
    }
    Ok(outcome)
}

struct LevelSolve<'a> {
    problem: &'a dyn ProblemDefinition,
    cost: &'a QuadraticCost,
    settings: &'a SolverSettings,
}

impl LevelSolve<'_> {
    /// Solves at `target` from `guess`; on failure, first solves at the
    /// geometric midpoint between `previous` and `target`.
    fn solve(
        &self,
        previous: Option<SharpnessParams>,
        target: SharpnessParams,
        guess: &DVector<f64>,
        depth: usize,
        refinements: &mut Vec<f64>,
    ) -> Result<ShootingSolution> {
        let system =
            SmoothedSystem::new(self.problem, self.cost, target).with_jump(self.settings.jump);
        let err = match solve_shooting(
            &system,
            guess,
            &self.settings.integrator,
            &self.settings.shooting,
        ) {
            Ok(solution) => return Ok(solution),
            Err(err) => err,
        };
        let Some(previous) = previous.filter(|_| depth < self.settings.max_refinements) else {
            return Err(err);
        };
        let mid = SharpnessParams::new(
            (previous.rho1 * target.rho1).sqrt(),
            (previous.rho2 * target.rho2).sqrt(),
            (previous.rho3 * target.rho3).sqrt(),
        )?;
        let halfway = self.solve(Some(previous), mid, guess, depth + 1, refinements)?;
        refinements.push(mid.rho1);
        self.solve(Some(mid), target, &halfway.lam0, depth + 1, refinements)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_validation() {
        assert!(ContinuationSchedule::uniform(&[]).is_err());
        assert!(ContinuationSchedule::uniform(&[0.1, 0.1]).is_err());
        assert!(ContinuationSchedule::uniform(&[0.1, 0.5]).is_err());
        assert!(ContinuationSchedule::uniform(&[0.5, -0.1]).is_err());
        let s = ContinuationSchedule::uniform(&[0.5, 0.1, 5e-2, 1e-2, 5e-3, 1e-3]).unwrap();
        assert_eq!(s.len(), 6);
        assert_eq!(s.levels()[5], SharpnessParams::uniform(1e-3).unwrap());

        let p = |a, b, c| SharpnessParams::new(a, b, c).unwrap();
        assert!(
            ContinuationSchedule::from_params(vec![p(0.5, 0.5, 0.1), p(0.1, 0.5, 0.05)]).is_ok()
        );
        assert!(
            ContinuationSchedule::from_params(vec![p(0.5, 0.5, 0.1), p(0.1, 0.6, 0.05)]).is_err()
        );
        assert!(ContinuationSchedule::from_params(vec![]).is_err());
    }

    #[test]
    fn report_deltas() {
        let rec = |lam: Vec<f64>, cost: f64| LevelRecord {
            rho: 0.1,
            params: SharpnessParams::uniform(0.1).unwrap(),
            lam0: lam,
            residual_norm: 0.0,
            cost,
            max_constraint: -1.0,
            iterations: 0,
            wall_time: 0.0,
            converged: true,
            refinements: Vec::new(),
            shooting: ShootingReport::default(),
        };
        let report = ContinuationReport {
            initial_guess: vec![0.0, 0.0],
            levels: vec![
                rec(vec![0.0, 0.0], 1.0),
                rec(vec![3.0, 4.0], 1.5),
                rec(vec![3.0, 4.0], 1.25),
            ],
        };
        assert_eq!(report.costate_deltas(), vec![5.0, 0.0]);
        assert_eq!(report.cost_deltas(), vec![0.5, 0.25]);
    }
}
