//! Planar two-body transfer with a floor on the semilatus rectum.
//!
//! State `x = [r1, r2, v1, v2]`, control is an acceleration on the velocity,
//! `L = |u|^2 / 2`, and the path constraint is `S = p_min - p(x)` with
//! `p = (r1 v2 - r2 v1)^2 / mu_g`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{OcpError, Result};
use crate::problem::{BoundaryConditions, ProblemDefinition, QuadraticCost, TerminalCondition};

const MIN_RADIUS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitConfig {
    pub mu_g: f64,
    pub p_min: f64,
    pub x0: [f64; 4],
    #[serde(rename = "x_t")]
    pub x_target: [f64; 4],
    /// Transfer time `T`.
    pub horizon: f64,
}

impl Default for OrbitConfig {
    /// Canonical units: unit circular orbit to a radius-3 circular orbit in `3 pi`.
    fn default() -> Self {
        let s3 = 3f64.sqrt();
        Self {
            mu_g: 1.0,
            p_min: 0.9,
            x0: [1.0, 0.0, 0.0, 1.0],
            x_target: [3.0 * s3 / 2.0, 1.5, -1.0 / (2.0 * s3), 0.5],
            horizon: 3.0 * PI,
        }
    }
}

impl OrbitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_g > 0.0 && self.mu_g.is_finite()) {
            return Err(OcpError::InvalidParameter(format!(
                "mu_g must be positive, got {}",
                self.mu_g
            )));
        }
        if !(self.p_min > 0.0 && self.p_min.is_finite()) {
            return Err(OcpError::InvalidParameter(format!(
                "p_min must be positive, got {}",
                self.p_min
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(OcpError::InvalidParameter(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if !self.x0.iter().chain(&self.x_target).all(|v| v.is_finite()) {
            return Err(OcpError::InvalidParameter(
                "boundary states must be finite".into(),
            ));
        }
        if self.x0[0].hypot(self.x0[1]) <= MIN_RADIUS {
            return Err(OcpError::InvalidParameter(
                "initial radius must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Two-body drift `[v; -mu_g r / |r|^3]`.
pub fn orbit_f0(x: &[f64], mu_g: f64) -> Result<[f64; 4]> {
    let rn = x[0].hypot(x[1]);
    if !(rn >= MIN_RADIUS) {
        return Err(OcpError::Singularity(format!(
            "|r| = {rn:e} in two-body drift"
        )));
    }
    let k = -mu_g / (rn * rn * rn);
    Ok([x[2], x[3], k * x[0], k * x[1]])
}

/// Specific angular momentum `r1 v2 - r2 v1`.
pub fn angular_momentum(x: &[f64]) -> f64 {
    x[0] * x[3] - x[1] * x[2]
}

/// Semilatus rectum `l^2 / mu_g`.
pub fn semilatus(x: &[f64], mu_g: f64) -> f64 {
    let l = angular_momentum(x);
    l * l / mu_g
}

/// Specific orbital energy `|v|^2 / 2 - mu_g / |r|`.
pub fn orbital_energy(x: &[f64], mu_g: f64) -> f64 {
    0.5 * (x[2] * x[2] + x[3] * x[3]) - mu_g / x[0].hypot(x[1])
}

/// Gradient of the angular momentum.
fn angular_momentum_gradient(x: &[f64]) -> [f64; 4] {
    [x[3], -x[2], -x[1], x[0]]
}

#[derive(Debug, Clone)]
pub struct OrbitProblem {
    config: OrbitConfig,
    boundary: BoundaryConditions,
}

impl OrbitProblem {
    pub fn new(config: OrbitConfig) -> Result<Self> {
        config.validate()?;
        let boundary = BoundaryConditions {
            initial_state: DVector::from_column_slice(&config.x0),
            terminal: TerminalCondition::FixedState(DVector::from_column_slice(&config.x_target)),
            horizon: config.horizon,
        };
        Ok(Self { config, boundary })
    }

    pub fn config(&self) -> &OrbitConfig {
        &self.config
    }

    /// `B = [0; I2]`.
    pub fn input_matrix() -> DMatrix<f64> {
        DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0])
    }
}

impl ProblemDefinition for OrbitProblem {
    fn state_dim(&self) -> usize {
        4
    }

    fn control_dim(&self) -> usize {
        2
    }

    fn drift(&self, x: &DVector<f64>, _t: f64) -> Result<DVector<f64>> {
        Ok(DVector::from_column_slice(&orbit_f0(
            x.as_slice(),
            self.config.mu_g,
        )?))
    }

    fn control_matrix(&self, _x: &DVector<f64>, _t: f64) -> DMatrix<f64> {
        Self::input_matrix()
    }

    fn constraint(&self, x: &DVector<f64>, _t: f64) -> f64 {
        self.config.p_min - semilatus(x.as_slice(), self.config.mu_g)
    }

    fn constraint_gradient(&self, x: &DVector<f64>, _t: f64) -> DVector<f64> {
        let l = angular_momentum(x.as_slice());
        let scale = -2.0 * l / self.config.mu_g;
        DVector::from_iterator(
            4,
            angular_momentum_gradient(x.as_slice())
                .into_iter()
                .map(|g| scale * g),
        )
    }

    fn running_cost(&self, _x: &DVector<f64>, u: &DVector<f64>, _t: f64) -> f64 {
        0.5 * u.norm_squared()
    }

    fn boundary(&self) -> &BoundaryConditions {
        &self.boundary
    }

    fn hamiltonian_state_gradient(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        lam: &DVector<f64>,
        mu: f64,
        _t: f64,
    ) -> Option<DVector<f64>> {
        let mu_g = self.config.mu_g;
        let (r1, r2) = (x[0], x[1]);
        let rn2 = r1 * r1 + r2 * r2;
        let rn = rn2.sqrt();
        let inv3 = 1.0 / (rn2 * rn);
        let inv5 = inv3 / rn2;
        let lv_dot_r = lam[2] * r1 + lam[3] * r2;

        // lam^T f0
        let mut g = [
            -mu_g * (lam[2] * inv3 - 3.0 * lv_dot_r * r1 * inv5),
            -mu_g * (lam[3] * inv3 - 3.0 * lv_dot_r * r2 * inv5),
            lam[0],
            lam[1],
        ];
        // mu S1 = mu (S_x f0 + S_x B u); S_x f0 vanishes identically because
        // the angular momentum is conserved under the central field.
        let l = angular_momentum(x.as_slice());
        let w = r1 * u[1] - r2 * u[0];
        let dl = angular_momentum_gradient(x.as_slice());
        let dw = [u[1], -u[0], 0.0, 0.0];
        for i in 0..4 {
            g[i] += mu * (-2.0 / mu_g) * (w * dl[i] + l * dw[i]);
        }
        Some(DVector::from_column_slice(&g))
    }
}

/// Assembles the benchmark: `F = B`, `S_t = 0`, `c = 0`, `R = I/2`, `P = 0`.
pub fn build_orbit_problem(config: OrbitConfig) -> Result<(OrbitProblem, QuadraticCost)> {
    let problem = OrbitProblem::new(config)?;
    let cost = QuadraticCost::new(DMatrix::identity(2, 2) * 0.5, DMatrix::zeros(4, 2))?;
    Ok((problem, cost))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{check_first_order, g_unconstrained, h_multiplier, u_constrained};
    use approx::assert_relative_eq;

    fn v(a: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(a)
    }

    #[test]
    fn drift_values() {
        assert_eq!(
            orbit_f0(&[1.0, 0.0, 0.0, 1.0], 1.0).unwrap(),
            [0.0, 1.0, -1.0, 0.0]
        );
        assert_eq!(
            orbit_f0(&[2.0, 0.0, 0.0, 0.0], 1.0).unwrap(),
            [0.0, 0.0, -0.25, 0.0]
        );
        assert!(matches!(
            orbit_f0(&[0.0, 1e-9, 1.0, 0.0], 1.0),
            Err(OcpError::Singularity(_))
        ));
    }

    #[test]
    fn drift_is_rotation_equivariant() {
        let x = [1.3, -0.4, 0.2, 0.9];
        for angle in [0.3, 1.7, -2.2] {
            let (c, s) = (f64::cos(angle), f64::sin(angle));
            let rot = |a: f64, b: f64| (c * a - s * b, s * a + c * b);
            let (r1, r2) = rot(x[0], x[1]);
            let (v1, v2) = rot(x[2], x[3]);
            let f_rot = orbit_f0(&[r1, r2, v1, v2], 1.0).unwrap();
            let f = orbit_f0(&x, 1.0).unwrap();
            let (a, b) = rot(f[0], f[1]);
            let (cc, d) = rot(f[2], f[3]);
            for (lhs, rhs) in f_rot.iter().zip([a, b, cc, d]) {
                assert_relative_eq!(*lhs, rhs, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn constraint_values_at_initial_state() {
        let (p, _) = build_orbit_problem(OrbitConfig::default()).unwrap();
        let x0 = v(&[1.0, 0.0, 0.0, 1.0]);
        assert_relative_eq!(p.constraint(&x0, 0.0), -0.1, epsilon = 1e-15);
        assert_eq!(p.constraint_gradient(&x0, 0.0), v(&[-2.0, 0.0, 0.0, -2.0]));
        let sxb = OrbitProblem::input_matrix().tr_mul(&p.constraint_gradient(&x0, 0.0));
        assert_eq!(sxb, v(&[0.0, -2.0]));
        assert_relative_eq!(check_first_order(&p, &x0, 0.0), 2.0, epsilon = 1e-15);
        // zero angular momentum: infeasible
        assert_relative_eq!(p.constraint(&v(&[1.0, 0.0, 0.0, 0.0]), 0.0), 0.9);
    }

    #[test]
    fn first_order_at_target() {
        let cfg = OrbitConfig::default();
        let (p, _) = build_orbit_problem(cfg.clone()).unwrap();
        let xt = v(&cfg.x_target);
        assert!(check_first_order(&p, &xt, cfg.horizon) > 1.0);
        assert_relative_eq!(semilatus(&cfg.x_target, 1.0), 3.0, epsilon = 1e-14);
    }

    #[test]
    fn control_laws_at_initial_state() {
        let (p, cost) = build_orbit_problem(OrbitConfig::default()).unwrap();
        let x0 = v(&[1.0, 0.0, 0.0, 1.0]);
        let zero = DVector::zeros(4);
        assert_eq!(
            g_unconstrained(&cost, &p, &x0, &zero, 0.0).unwrap(),
            DVector::zeros(2)
        );
        let g = g_unconstrained(&cost, &p, &x0, &v(&[0.0, 0.0, 1.0, 0.0]), 0.0).unwrap();
        assert!((g - v(&[-1.0, 0.0])).amax() < 1e-15);
        assert_eq!(h_multiplier(&cost, &p, &x0, &zero, 0.0).unwrap(), 0.0);
        let u = u_constrained(&cost, &p, &x0, &zero, 1.0, 0.0).unwrap();
        assert!((u - v(&[0.0, 2.0])).amax() < 1e-15);
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let (p, cost) = build_orbit_problem(OrbitConfig::default()).unwrap();
        let sys = crate::dynamics::SmoothedSystem::new(
            &p,
            &cost,
            crate::smoothing::SharpnessParams::uniform(0.1).unwrap(),
        );
        let x = v(&[1.1, 0.3, -0.2, 0.95]);
        let u = v(&[0.3, -0.7]);
        let lam = v(&[0.2, -0.1, 0.4, 0.5]);
        let analytic = p
            .hamiltonian_state_gradient(&x, &u, &lam, 0.8, 0.0)
            .unwrap();
        let fd = sys
            .hamiltonian_state_gradient_fd(&x, &u, &lam, 0.8, 0.0)
            .unwrap();
        for i in 0..4 {
            assert_relative_eq!(analytic[i], fd[i], epsilon = 1e-8, max_relative = 1e-6);
        }
    }

    #[test]
    fn config_validation() {
        let bad = OrbitConfig {
            p_min: -1.0,
            ..Default::default()
        };
        assert!(build_orbit_problem(bad).is_err());
        let bad = OrbitConfig {
            x0: [0.0, 0.0, 1.0, 0.0],
            ..Default::default()
        };
        assert!(OrbitProblem::new(bad).is_err());
    }
}
