//! Densely sampled trajectories and quantities derived from them.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dynamics::{SmoothedSystem, TrajectoryPoint};
use crate::error::{OcpError, Result};
use crate::integrator::{integrate, DenseTrajectory, IntegratorConfig};

/// Time-ordered samples of `x`, `lam`, `u`, `mu`, `S`, `S1` and `H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySolution {
    /// Uniform sharpness of the level, `None` for the unconstrained extremal.
    pub rho: Option<f64>,
    pub state_dim: usize,
    pub control_dim: usize,
    pub points: Vec<TrajectoryPoint>,
}

impl TrajectorySolution {
    pub fn empty(state_dim: usize, control_dim: usize) -> Self {
        Self {
            rho: None,
            state_dim,
            control_dim,
            points: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    /// `max_t S(x(t), t)` over the samples.
    pub fn max_constraint(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p.s)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn series<F: Fn(&TrajectoryPoint) -> f64>(&self, f: F) -> Vec<f64> {
        self.points.iter().map(f).collect()
    }
}

/// Integrates from `(x0, lam0)` with dense output.
pub fn integrate_extremal(
    system: &SmoothedSystem<'_>,
    lam0: &DVector<f64>,
    integrator: &IntegratorConfig,
) -> Result<DenseTrajectory> {
    let boundary = system.problem.boundary();
    let mut y0 = boundary.initial_state.as_slice().to_vec();
    y0.extend_from_slice(lam0.as_slice());
    integrate(system, 0.0, boundary.horizon, &y0, integrator)
}

/// Re-evaluates the system on a uniform grid of `intervals + 1` points.
pub fn sample_dense(
    system: &SmoothedSystem<'_>,
    dense: &DenseTrajectory,
    intervals: usize,
) -> Result<TrajectorySolution> {
    if intervals == 0 {
        return Err(OcpError::InvalidParameter(
            "sampling grid needs at least one interval".into(),
        ));
    }
    let (t0, t1) = (dense.t_start(), dense.t_end());
    let points = (0..=intervals)
        .map(|k| {
            let t = if k == intervals {
                t1
            } else {
                t0 + (t1 - t0) * k as f64 / intervals as f64
            };
            system.trajectory_point(t, &dense.eval(t))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectorySolution {
        rho: system.params().map(|p| p.rho1),
        state_dim: system.state_dim(),
        control_dim: system.problem.control_dim(),
        points,
    })
}

/// Integrates from `lam0` and samples on a uniform grid.
pub fn sample_trajectory(
    system: &SmoothedSystem<'_>,
    lam0: &DVector<f64>,
    integrator: &IntegratorConfig,
    intervals: usize,
) -> Result<TrajectorySolution> {
    let dense = integrate_extremal(system, lam0, integrator)?;
    sample_dense(system, &dense, intervals)
}

/// `J = int_0^T L dt` by composite Simpson on the (uniform) samples; a
/// trailing trapezoid closes an odd number of intervals.
pub fn compute_cost(solution: &TrajectorySolution) -> f64 {
    let pts = &solution.points;
    if pts.len() < 2 {
        return 0.0;
    }
    let intervals = pts.len() - 1;
    let even = intervals - intervals % 2;
    let mut total = 0.0;
    for k in (0..even).step_by(2) {
        let h = pts[k + 2].t - pts[k].t;
        total += h / 6.0
            * (pts[k].running_cost + 4.0 * pts[k + 1].running_cost + pts[k + 2].running_cost);
    }
    if even < intervals {
        let (a, b) = (&pts[intervals - 1], &pts[intervals]);
        total += 0.5 * (b.t - a.t) * (a.running_cost + b.running_cost);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(t: f64, l: f64) -> TrajectoryPoint {
        TrajectoryPoint {
            t,
            x: vec![0.0],
            lam: vec![0.0],
            u: vec![0.0],
            mu: 0.0,
            s: -1.0,
            s1: 0.0,
            hamiltonian: 0.0,
            multiplier: 0.0,
            constraint_gradient: vec![0.0],
            running_cost: l,
            jump_weight: 0.0,
        }
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        let pts = (0..=10).map(|k| {
            let t = k as f64 * 0.2;
            point(t, t * t * t - t)
        });
        let sol = TrajectorySolution {
            rho: None,
            state_dim: 1,
            control_dim: 1,
            points: pts.collect(),
        };
        // int_0^2 t^3 - t dt = 4 - 2
        assert!((compute_cost(&sol) - 2.0).abs() < 1e-13);
        assert_eq!(sol.max_constraint(), -1.0);
    }

    #[test]
    fn odd_interval_count_and_trivial_cases() {
        let pts: Vec<_> = (0..=3).map(|k| point(k as f64, 1.0)).collect();
        let sol = TrajectorySolution {
            rho: None,
            state_dim: 1,
            control_dim: 1,
            points: pts,
        };
        assert!((compute_cost(&sol) - 3.0).abs() < 1e-15);
        assert_eq!(compute_cost(&TrajectorySolution::empty(1, 1)), 0.0);
        let zero: Vec<_> = (0..=4).map(|k| point(k as f64, 0.0)).collect();
        assert_eq!(
            compute_cost(&TrajectorySolution {
                rho: None,
                state_dim: 1,
                control_dim: 1,
                points: zero
            }),
            0.0
        );
    }
}
