//! Smoothed augmented dynamics `X = [x; lam]`.
//!
//! The state follows the control-affine dynamics under the smoothed control.
//! The costate follows `-[grad_x H]^T` with `u` and `mu` frozen, plus the
//! Gaussian-spread corner jump `-2 c delta(S) S1 S_x^T`, where `c` is `h` by
//! default (or the smoothed multiplier, see [`JumpCoefficient`]).

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{OcpError, Result};
use crate::integrator::OdeSystem;
use crate::problem::{LocalTerms, ProblemDefinition, QuadraticCost};
use crate::smoothing::{dirac_tilde, multiplier_terms, SharpnessParams};

/// Coefficient multiplying the Gaussian jump term of the costate dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum JumpCoefficient {
    /// Unactivated multiplier `h(x, lam, t)`.
    #[default]
    #[serde(rename = "h")]
    Multiplier,
    /// Smoothed multiplier `h phi1 phi2`.
    #[serde(rename = "mu_tilde")]
    SmoothedMultiplier,
}

/// Whether the state constraint is enforced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstraintMode {
    /// Smoothed constraint handling with the given sharpness.
    Smoothed(SharpnessParams),
    /// Activations forced to zero: the plain unconstrained extremal.
    Ignored,
}

/// Concatenated state and costate.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedState {
    data: DVector<f64>,
    n: usize,
}

impl AugmentedState {
    pub fn new(x: &DVector<f64>, lam: &DVector<f64>) -> Result<Self> {
        if x.len() != lam.len() {
            return Err(OcpError::Dimension(format!(
                "state {} vs costate {}",
                x.len(),
                lam.len()
            )));
        }
        let n = x.len();
        let mut data = DVector::zeros(2 * n);
        data.rows_mut(0, n).copy_from(x);
        data.rows_mut(n, n).copy_from(lam);
        Ok(Self { data, n })
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        if !values.len().is_multiple_of(2) {
            return Err(OcpError::Dimension(format!(
                "augmented state of odd length {}",
                values.len()
            )));
        }
        Ok(Self {
            data: DVector::from_column_slice(values),
            n: values.len() / 2,
        })
    }

    pub fn state(&self) -> DVector<f64> {
        self.data.rows(0, self.n).into_owned()
    }

    pub fn costate(&self) -> DVector<f64> {
        self.data.rows(self.n, self.n).into_owned()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.data.as_slice()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Every quantity of the smoothed system at one `(t, x, lam)`.
#[derive(Debug, Clone)]
pub struct PointEvaluation {
    pub terms: LocalTerms,
    /// `h(x, lam, t)`; zero when the constraint is ignored.
    pub h: f64,
    pub mu: f64,
    pub control: DVector<f64>,
    /// `S1` under the smoothed control.
    pub constraint_rate: f64,
    pub hamiltonian: f64,
    pub running_cost: f64,
    /// `x'`.
    pub state_rate: DVector<f64>,
    /// `lam'`, including the jump term.
    pub costate_rate: DVector<f64>,
    /// Scalar jump weight `2 c delta(S) S1`; the costate receives `-weight * S_x^T`.
    pub jump_weight: f64,
}

/// One dense sample of a trajectory, re-evaluated at `(t, x, lam)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub lam: Vec<f64>,
    pub u: Vec<f64>,
    pub mu: f64,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "S1")]
    pub s1: f64,
    #[serde(rename = "H")]
    pub hamiltonian: f64,
    /// Unsmoothed multiplier `h(x, lam, t)`.
    pub multiplier: f64,
    /// `S_x^T`.
    pub constraint_gradient: Vec<f64>,
    /// `L(x, u, t)`.
    pub running_cost: f64,
    /// `2 c delta(S) S1`.
    pub jump_weight: f64,
}

/// Smoothed problem at a fixed sharpness: the right-hand side of the
/// shooting ODE.
#[derive(Clone, Copy)]
pub struct SmoothedSystem<'a> {
    pub problem: &'a dyn ProblemDefinition,
    pub cost: &'a QuadraticCost,
    pub mode: ConstraintMode,
    pub jump: JumpCoefficient,
}

const FD_EPS: f64 = 2.2e-16;

impl<'a> SmoothedSystem<'a> {
    pub fn new(
        problem: &'a dyn ProblemDefinition,
        cost: &'a QuadraticCost,
        params: SharpnessParams,
    ) -> Self {
        Self {
            problem,
            cost,
            mode: ConstraintMode::Smoothed(params),
            jump: JumpCoefficient::default(),
        }
    }

    pub fn unconstrained(problem: &'a dyn ProblemDefinition, cost: &'a QuadraticCost) -> Self {
        Self {
            problem,
            cost,
            mode: ConstraintMode::Ignored,
            jump: JumpCoefficient::default(),
        }
    }

    pub fn with_jump(mut self, jump: JumpCoefficient) -> Self {
        self.jump = jump;
        self
    }

    pub fn state_dim(&self) -> usize {
        self.problem.state_dim()
    }

    pub fn params(&self) -> Option<SharpnessParams> {
        match self.mode {
            ConstraintMode::Smoothed(p) => Some(p),
            ConstraintMode::Ignored => None,
        }
    }

    /// `H(x, u, lam, mu, t) = L + lam^T f + mu S1` at explicit arguments.
    pub fn hamiltonian_at(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        lam: &DVector<f64>,
        mu: f64,
        t: f64,
    ) -> Result<f64> {
        let terms = LocalTerms::evaluate(self.problem, x, t)?;
        Ok(self.problem.running_cost(x, u, t)
            + lam.dot(&terms.dynamics(u))
            + mu * terms.constraint_rate(u))
    }

    /// `[grad_x H]^T` with `u` and `mu` frozen: the analytic hook when the
    /// problem supplies one, otherwise central differences.
    pub fn hamiltonian_state_gradient(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        lam: &DVector<f64>,
        mu: f64,
        t: f64,
    ) -> Result<DVector<f64>> {
        if let Some(g) = self.problem.hamiltonian_state_gradient(x, u, lam, mu, t) {
            return Ok(g);
        }
        self.hamiltonian_state_gradient_fd(x, u, lam, mu, t)
    }

    /// Central-difference `[grad_x H]^T`, step `eps^(1/3) max(1, |x_i|)`.
    pub fn hamiltonian_state_gradient_fd(
        &self,
        x: &DVector<f64>,
        u: &DVector<f64>,
        lam: &DVector<f64>,
        mu: f64,
        t: f64,
    ) -> Result<DVector<f64>> {
        let n = x.len();
        let base = FD_EPS.cbrt();
        let mut grad = DVector::zeros(n);
        let mut probe = x.clone();
        for i in 0..n {
            let step = base * x[i].abs().max(1.0);
            probe[i] = x[i] + step;
            let up = self.hamiltonian_at(&probe, u, lam, mu, t)?;
            probe[i] = x[i] - step;
            let down = self.hamiltonian_at(&probe, u, lam, mu, t)?;
            probe[i] = x[i];
            grad[i] = (up - down) / (2.0 * step);
        }
        Ok(grad)
    }

    pub fn evaluate(
        &self,
        t: f64,
        x: &DVector<f64>,
        lam: &DVector<f64>,
    ) -> Result<PointEvaluation> {
        let terms = LocalTerms::evaluate(self.problem, x, t)?;
        let (h, mu, jump_coef) = match &self.mode {
            ConstraintMode::Ignored => (0.0, 0.0, 0.0),
            ConstraintMode::Smoothed(params) => {
                let m = multiplier_terms(self.cost, &terms, x, lam, params)?;
                let c = match self.jump {
                    JumpCoefficient::Multiplier => m.h,
                    JumpCoefficient::SmoothedMultiplier => m.mu,
                };
                (m.h, m.mu, c)
            }
        };
        let shifted = lam + mu * &terms.constraint_gradient;
        let control = self.cost.control_law(&terms, x, &shifted);
        let constraint_rate = terms.constraint_rate(&control);
        let state_rate = terms.dynamics(&control);
        let running_cost = self.problem.running_cost(x, &control, t);
        let hamiltonian = running_cost + lam.dot(&state_rate) + mu * constraint_rate;

        let jump_weight = match &self.mode {
            ConstraintMode::Ignored => 0.0,
            ConstraintMode::Smoothed(params) => {
                2.0 * jump_coef * dirac_tilde(terms.constraint, params.rho3) * constraint_rate
            }
        };
        let grad = self.hamiltonian_state_gradient(x, &control, lam, mu, t)?;
        let costate_rate = -grad - jump_weight * &terms.constraint_gradient;

        if !(state_rate
            .iter()
            .chain(costate_rate.iter())
            .all(|v| v.is_finite()))
        {
            return Err(OcpError::NonFinite { t });
        }
        Ok(PointEvaluation {
            terms,
            h,
            mu,
            control,
            constraint_rate,
            hamiltonian,
            running_cost,
            state_rate,
            costate_rate,
            jump_weight,
        })
    }

    pub fn state_rhs(&self, t: f64, x: &DVector<f64>, lam: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.evaluate(t, x, lam)?.state_rate)
    }

    pub fn costate_rhs(
        &self,
        t: f64,
        x: &DVector<f64>,
        lam: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        Ok(self.evaluate(t, x, lam)?.costate_rate)
    }

    pub fn augmented_rhs(&self, t: f64, state: &AugmentedState) -> Result<DVector<f64>> {
        if !state.is_finite() {
            return Err(OcpError::NonFinite { t });
        }
        let e = self.evaluate(t, &state.state(), &state.costate())?;
        let n = self.state_dim();
        let mut out = DVector::zeros(2 * n);
        out.rows_mut(0, n).copy_from(&e.state_rate);
        out.rows_mut(n, n).copy_from(&e.costate_rate);
        Ok(out)
    }

    /// `H(x, u~, lam, mu~, t)`.
    pub fn hamiltonian(&self, t: f64, x: &DVector<f64>, lam: &DVector<f64>) -> Result<f64> {
        Ok(self.evaluate(t, x, lam)?.hamiltonian)
    }

    pub fn trajectory_point(&self, t: f64, augmented: &[f64]) -> Result<TrajectoryPoint> {
        let n = self.state_dim();
        let x = DVector::from_column_slice(&augmented[..n]);
        let lam = DVector::from_column_slice(&augmented[n..2 * n]);
        let e = self.evaluate(t, &x, &lam)?;
        Ok(TrajectoryPoint {
            t,
            x: x.as_slice().to_vec(),
            lam: lam.as_slice().to_vec(),
            u: e.control.as_slice().to_vec(),
            mu: e.mu,
            s: e.terms.constraint,
            s1: e.constraint_rate,
            hamiltonian: e.hamiltonian,
            multiplier: e.h,
            constraint_gradient: e.terms.constraint_gradient.as_slice().to_vec(),
            running_cost: e.running_cost,
            jump_weight: e.jump_weight,
        })
    }
}

impl OdeSystem for SmoothedSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.state_dim()
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        if !y.iter().all(|v| v.is_finite()) {
            return Err(OcpError::NonFinite { t });
        }
        let n = self.state_dim();
        let x = DVector::from_column_slice(&y[..n]);
        let lam = DVector::from_column_slice(&y[n..]);
        let e = self.evaluate(t, &x, &lam)?;
        dy[..n].copy_from_slice(e.state_rate.as_slice());
        dy[n..].copy_from_slice(e.costate_rate.as_slice());
        Ok(())
    }

    /// Caps the step at `rho3 / 2` while `|S| < 6 rho3` so the Gaussian jump
    /// is resolved.
    fn max_step(&self, t: f64, y: &[f64]) -> Option<f64> {
        let params = self.params()?;
        let n = self.state_dim();
        let x = DVector::from_column_slice(&y[..n]);
        let s = self.problem.constraint(&x, t);
        (s.abs() < 6.0 * params.rho3).then_some(0.5 * params.rho3)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::tests::ScalarProblem;
    use nalgebra::DMatrix;

    #[test]
    fn augmented_state_roundtrip() {
        let x = DVector::from_vec(vec![1.0, 2.0]);
        let lam = DVector::from_vec(vec![3.0, 4.0]);
        let a = AugmentedState::new(&x, &lam).unwrap();
        assert_eq!(a.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(a.state(), x);
        assert_eq!(a.costate(), lam);
        assert!(AugmentedState::from_slice(&[1.0, 2.0, 3.0]).is_err());
        assert!(AugmentedState::new(&x, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn non_finite_state_is_rejected() {
        let p = ScalarProblem::new();
        let cost = QuadraticCost::new(DMatrix::identity(1, 1), DMatrix::zeros(1, 1)).unwrap();
        let sys = SmoothedSystem::new(&p, &cost, SharpnessParams::uniform(0.1).unwrap());
        let bad = AugmentedState::from_slice(&[f64::NAN, 0.0]).unwrap();
        assert!(matches!(
            sys.augmented_rhs(0.0, &bad),
            Err(OcpError::NonFinite { .. })
        ));
    }

    #[test]
    fn scalar_on_arc_holds_the_boundary() {
        // At S = 0 with S1_o > 0 the smoothed control stops the state exactly.
        let p = ScalarProblem::new();
        let cost = QuadraticCost::new(DMatrix::identity(1, 1), DMatrix::zeros(1, 1)).unwrap();
        let sys = SmoothedSystem::new(&p, &cost, SharpnessParams::uniform(0.3).unwrap());
        let e = sys
            .evaluate(
                0.0,
                &DVector::from_element(1, 1.0),
                &DVector::from_element(1, -4.0),
            )
            .unwrap();
        assert!(e.control[0].abs() < 1e-15);
        assert!(e.constraint_rate.abs() < 1e-15);
        assert!((e.mu - e.h).abs() < 1e-15);
    }
}
