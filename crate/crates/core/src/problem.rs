//! Problem interface for control-affine optimal control with a scalar,
//! first-order state constraint, plus the closed-form control and multiplier
//! laws of the quadratic running-cost family.
//!
//! Dynamics are `x' = f0(x, t) + F(x, t) u`, the running cost is `L(x, u, t)`
//! and the path constraint is `S(x, t) <= 0`. Its total time derivative
//! `S1 = S_x (f0 + F u) + S_t` must depend on `u` (`S_x F != 0`).

use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{OcpError, Result};

/// `(x(0), x(T), T)` to a residual vector.
pub type TerminalEval =
    Arc<dyn Fn(&DVector<f64>, &DVector<f64>, f64) -> DVector<f64> + Send + Sync>;

/// Terminal map `psi(x(0), x(T), T)` whose zero defines the boundary conditions.
#[derive(Clone)]
pub enum TerminalCondition {
    /// `x(T) - target = 0`.
    FixedState(DVector<f64>),
    /// Arbitrary evaluator returning a residual vector.
    Custom { dim: usize, eval: TerminalEval },
}

impl TerminalCondition {
    pub fn dim(&self) -> usize {
        match self {
            TerminalCondition::FixedState(target) => target.len(),
            TerminalCondition::Custom { dim, .. } => *dim,
        }
    }

    pub fn evaluate(
        &self,
        x_initial: &DVector<f64>,
        x_final: &DVector<f64>,
        horizon: f64,
    ) -> DVector<f64> {
        match self {
            TerminalCondition::FixedState(target) => x_final - target,
            TerminalCondition::Custom { eval, .. } => eval(x_initial, x_final, horizon),
        }
    }
}

impl fmt::Debug for TerminalCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TerminalCondition::FixedState(target) => f
                .debug_tuple("FixedState")
                .field(&target.as_slice())
                .finish(),
            TerminalCondition::Custom { dim, .. } => f
                .debug_struct("Custom")
                .field("dim", dim)
                .finish_non_exhaustive(),
        }
    }
}

/// Fixed initial state, terminal condition and fixed horizon `[0, T]`.
#[derive(Debug, Clone)]
pub struct BoundaryConditions {
    pub initial_state: DVector<f64>,
    pub terminal: TerminalCondition,
    pub horizon: f64,
}

/// Hooks describing a control-affine problem with a scalar state constraint.
///
/// All hooks must be deterministic and free of side effects; they are called
/// concurrently from the shooting Jacobian.
pub trait ProblemDefinition: Send + Sync {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;

    /// Drift `f0(x, t)`.
    fn drift(&self, x: &DVector<f64>, t: f64) -> Result<DVector<f64>>;

    /// Control influence matrix `F(x, t)`, `n x m`.
    fn control_matrix(&self, x: &DVector<f64>, t: f64) -> DMatrix<f64>;

    /// Constraint value `S(x, t)`; feasible when `<= 0`.
    fn constraint(&self, x: &DVector<f64>, t: f64) -> f64;

    /// `S_x` returned as a column vector.
    fn constraint_gradient(&self, x: &DVector<f64>, t: f64) -> DVector<f64>;

    /// `S_t`.
    fn constraint_time_partial(&self, _x: &DVector<f64>, _t: f64) -> f64 {
        0.0
    }

    /// Running cost `L(x, u, t)`.
    fn running_cost(&self, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> f64;

    fn boundary(&self) -> &BoundaryConditions;

    /// Optional analytic `[grad_x H(x, u, lam, mu, t)]^T` with `u` and `mu` held
    /// fixed. When `None`, central finite differences of the Hamiltonian are used.
    fn hamiltonian_state_gradient(
        &self,
        _x: &DVector<f64>,
        _u: &DVector<f64>,
        _lam: &DVector<f64>,
        _mu: f64,
        _t: f64,
    ) -> Option<DVector<f64>> {
        None
    }
}

/// Quantities of the problem that depend only on `(x, t)`.
#[derive(Debug, Clone)]
pub struct LocalTerms {
    pub drift: DVector<f64>,
    pub control_matrix: DMatrix<f64>,
    pub constraint: f64,
    pub constraint_gradient: DVector<f64>,
    pub constraint_time_partial: f64,
}

impl LocalTerms {
    pub fn evaluate(problem: &dyn ProblemDefinition, x: &DVector<f64>, t: f64) -> Result<Self> {
        let n = problem.state_dim();
        if x.len() != n {
            return Err(OcpError::Dimension(format!(
                "state has length {}, expected {n}",
                x.len()
            )));
        }
        Ok(Self {
            drift: problem.drift(x, t)?,
            control_matrix: problem.control_matrix(x, t),
            constraint: problem.constraint(x, t),
            constraint_gradient: problem.constraint_gradient(x, t),
            constraint_time_partial: problem.constraint_time_partial(x, t),
        })
    }

    /// `S_x F` as a row of length `m` (stored as a column vector).
    pub fn constraint_control_gain(&self) -> DVector<f64> {
        self.control_matrix.tr_mul(&self.constraint_gradient)
    }

    /// `S1(x, u, t) = S_x (f0 + F u) + S_t`.
    pub fn constraint_rate(&self, u: &DVector<f64>) -> f64 {
        self.constraint_gradient.dot(&self.drift)
            + self.constraint_control_gain().dot(u)
            + self.constraint_time_partial
    }

    /// `f0 + F u`.
    pub fn dynamics(&self, u: &DVector<f64>) -> DVector<f64> {
        &self.drift + &self.control_matrix * u
    }
}

type StateCost = Arc<dyn Fn(&DVector<f64>, f64) -> f64 + Send + Sync>;

/// Running cost `L = c(x, t) + u^T R u + x^T P u` with `R` symmetric positive definite.
#[derive(Clone)]
pub struct QuadraticCost {
    weight: DMatrix<f64>,
    factor: Cholesky<f64, Dyn>,
    cross: DMatrix<f64>,
    state_cost: StateCost,
}

impl fmt::Debug for QuadraticCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QuadraticCost")
            .field("weight", &self.weight)
            .field("cross", &self.cross)
            .finish_non_exhaustive()
    }
}

impl QuadraticCost {
    /// Builds the cost from `R` (`m x m`) and `P` (`n x m`), with `c = 0`.
    pub fn new(weight: DMatrix<f64>, cross: DMatrix<f64>) -> Result<Self> {
        let m = weight.nrows();
        if weight.ncols() != m || m == 0 {
            return Err(OcpError::Dimension(format!(
                "R must be square and non-empty, got {}x{}",
                weight.nrows(),
                weight.ncols()
            )));
        }
        if cross.ncols() != m {
            return Err(OcpError::Dimension(format!(
                "P must have {m} columns, got {}",
                cross.ncols()
            )));
        }
        let scale = weight.amax().max(1.0);
        if (&weight - weight.transpose()).amax() > 1e-12 * scale {
            return Err(OcpError::SingularCostWeight("R is not symmetric".into()));
        }
        let factor = Cholesky::new(weight.clone())
            .ok_or_else(|| OcpError::SingularCostWeight("Cholesky factorization failed".into()))?;
        Ok(Self {
            weight,
            factor,
            cross,
            state_cost: Arc::new(|_, _| 0.0),
        })
    }

    /// Replaces the state-only term `c(x, t)`.
    pub fn with_state_cost<C>(mut self, c: C) -> Self
    where
        C: Fn(&DVector<f64>, f64) -> f64 + Send + Sync + 'static,
    {
        self.state_cost = Arc::new(c);
        self
    }

    pub fn weight(&self) -> &DMatrix<f64> {
        &self.weight
    }

    pub fn cross(&self) -> &DMatrix<f64> {
        &self.cross
    }

    pub fn control_dim(&self) -> usize {
        self.weight.nrows()
    }

    /// `R^-1 b`.
    pub fn solve_weight(&self, b: &DVector<f64>) -> DVector<f64> {
        self.factor.solve(b)
    }

    pub fn evaluate(&self, x: &DVector<f64>, u: &DVector<f64>, t: f64) -> f64 {
        (self.state_cost)(x, t) + u.dot(&(&self.weight * u)) + x.dot(&(&self.cross * u))
    }

    /// `grad_u L = 2 R u + P^T x`.
    pub fn control_gradient(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        2.0 * &self.weight * u + self.cross.tr_mul(x)
    }

    fn check_dims(&self, terms: &LocalTerms, x: &DVector<f64>) -> Result<()> {
        let f = &terms.control_matrix;
        if f.ncols() != self.control_dim() || self.cross.nrows() != x.len() {
            return Err(OcpError::Dimension(format!(
                "F is {}x{}, P is {}x{}, state length {}",
                f.nrows(),
                f.ncols(),
                self.cross.nrows(),
                self.cross.ncols(),
                x.len()
            )));
        }
        Ok(())
    }

    /// Minimizer of the Hamiltonian for a given (possibly shifted) costate:
    /// `-1/2 R^-1 (P^T x + F^T lam)`.
    pub fn control_law(
        &self,
        terms: &LocalTerms,
        x: &DVector<f64>,
        lam: &DVector<f64>,
    ) -> DVector<f64> {
        let rhs = self.cross.tr_mul(x) + terms.control_matrix.tr_mul(lam);
        -0.5 * self.solve_weight(&rhs)
    }

    /// Multiplier that zeroes `S1` under `g(x, lam + mu S_x^T, t)`.
    pub fn multiplier_law(
        &self,
        terms: &LocalTerms,
        x: &DVector<f64>,
        lam: &DVector<f64>,
    ) -> Result<f64> {
        let gain = terms.constraint_control_gain();
        let denominator = gain.dot(&self.solve_weight(&gain));
        let threshold = 1e-12 * (1.0 + lam.norm());
        if !(denominator.abs() >= threshold) {
            return Err(OcpError::DegenerateConstraint {
                denominator,
                threshold,
            });
        }
        let shifted = self.cross.tr_mul(x) + terms.control_matrix.tr_mul(lam);
        let numerator = 2.0 * terms.constraint_gradient.dot(&terms.drift)
            + 2.0 * terms.constraint_time_partial
            - gain.dot(&self.solve_weight(&shifted));
        Ok(numerator / denominator)
    }
}

/// Unconstrained-arc control `u_o = g(x, lam, t)`.
pub fn g_unconstrained(
    cost: &QuadraticCost,
    problem: &dyn ProblemDefinition,
    x: &DVector<f64>,
    lam: &DVector<f64>,
    t: f64,
) -> Result<DVector<f64>> {
    let terms = LocalTerms::evaluate(problem, x, t)?;
    cost.check_dims(&terms, x)?;
    Ok(cost.control_law(&terms, x, lam))
}

/// Constrained-arc multiplier `h(x, lam, t)`. Not clamped: negative values
/// are returned off the constrained arc.
pub fn h_multiplier(
    cost: &QuadraticCost,
    problem: &dyn ProblemDefinition,
    x: &DVector<f64>,
    lam: &DVector<f64>,
    t: f64,
) -> Result<f64> {
    let terms = LocalTerms::evaluate(problem, x, t)?;
    cost.check_dims(&terms, x)?;
    cost.multiplier_law(&terms, x, lam)
}

/// `g(x, lam + mu S_x^T, t)`.
pub fn u_constrained(
    cost: &QuadraticCost,
    problem: &dyn ProblemDefinition,
    x: &DVector<f64>,
    lam: &DVector<f64>,
    mu: f64,
    t: f64,
) -> Result<DVector<f64>> {
    let terms = LocalTerms::evaluate(problem, x, t)?;
    cost.check_dims(&terms, x)?;
    let shifted = lam + mu * &terms.constraint_gradient;
    Ok(cost.control_law(&terms, x, &shifted))
}

/// `||S_x F||_2`; values near zero mean the constraint is not first order at `(x, t)`.
pub fn check_first_order(problem: &dyn ProblemDefinition, x: &DVector<f64>, t: f64) -> f64 {
    let f = problem.control_matrix(x, t);
    f.tr_mul(&problem.constraint_gradient(x, t)).norm()
}

/// `S1(x, u, t)`.
pub fn constraint_rate(
    problem: &dyn ProblemDefinition,
    x: &DVector<f64>,
    u: &DVector<f64>,
    t: f64,
) -> Result<f64> {
    Ok(LocalTerms::evaluate(problem, x, t)?.constraint_rate(u))
}
