//! Smooth activation functions and the smoothed multiplier / control.
//!
//! The constraint multiplier switches on when `S = 0` and `S1_o >= 0`. Both
//! conditions are replaced by smooth activations: a shifted `tanh` in `S`
//! that equals one exactly at `S = 0`, and a one-sided bump in `S1_o` that is
//! one for every non-negative argument. The corner jump of the costate is
//! spread with a Gaussian kernel of width `rho3`.

use std::f64::consts::{E, PI};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{OcpError, Result};
use crate::problem::{LocalTerms, ProblemDefinition, QuadraticCost};

/// `(e^2 + 1) / (2 e^2)`, which equals `1 / (1 + tanh 1)`.
pub const PHI1_SCALE: f64 = (E * E + 1.0) / (2.0 * E * E);

/// Below this exponent `exp` underflows to subnormals; the bump returns zero.
const EXP_UNDERFLOW: f64 = -745.0;

/// Sharpness parameters; smaller values give sharper activations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SharpnessParams {
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
}

impl SharpnessParams {
    pub fn new(rho1: f64, rho2: f64, rho3: f64) -> Result<Self> {
        for (name, v) in [("rho1", rho1), ("rho2", rho2), ("rho3", rho3)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(OcpError::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self { rho1, rho2, rho3 })
    }

    /// `rho1 = rho2 = rho3 = rho`.
    pub fn uniform(rho: f64) -> Result<Self> {
        Self::new(rho, rho, rho)
    }
}

/// `tanh` activation on the constraint value.
pub fn phi1(x: f64, rho1: f64) -> f64 {
    PHI1_SCALE * (1.0 + ((x + rho1) / rho1).tanh())
}

pub fn phi1_derivative(x: f64, rho1: f64) -> f64 {
    let th = ((x + rho1) / rho1).tanh();
    PHI1_SCALE * (1.0 - th * th) / rho1
}

/// Bump activation on `S1_o`: one for `x > 0`, zero for `x <= -1`.
pub fn phi2(x: f64, rho2: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x <= -1.0 {
        0.0
    } else {
        // 1 - 1/(1 - x^2) == -x^2/(1 - x^2)
        let exponent = -x * x / ((1.0 - x * x) * rho2 * rho2);
        if exponent < EXP_UNDERFLOW {
            0.0
        } else {
            exponent.exp()
        }
    }
}

pub fn phi2_derivative(x: f64, rho2: f64) -> f64 {
    if x > 0.0 || x <= -1.0 {
        return 0.0;
    }
    let value = phi2(x, rho2);
    if value == 0.0 {
        return 0.0;
    }
    let d = 1.0 - x * x;
    value * (-2.0 * x) / (d * d * rho2 * rho2)
}

/// Gaussian approximation of the Dirac delta with standard deviation `rho3`.
pub fn dirac_tilde(x: f64, rho3: f64) -> f64 {
    (-0.5 * (x / rho3) * (x / rho3)).exp() / (rho3 * (2.0 * PI).sqrt())
}

pub fn dirac_tilde_derivative(x: f64, rho3: f64) -> f64 {
    -x / (rho3 * rho3) * dirac_tilde(x, rho3)
}

/// Breakdown of the smoothed multiplier at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierTerms {
    /// `h(x, lam, t)`.
    pub h: f64,
    /// `S1` under the unconstrained control.
    pub rate_unconstrained: f64,
    pub phi1: f64,
    pub phi2: f64,
    /// `h * phi1(S) * phi2(S1_o)`.
    pub mu: f64,
}

pub(crate) fn multiplier_terms(
    cost: &QuadraticCost,
    terms: &LocalTerms,
    x: &DVector<f64>,
    lam: &DVector<f64>,
    params: &SharpnessParams,
) -> Result<MultiplierTerms> {
    let h = cost.multiplier_law(terms, x, lam)?;
    let u_o = cost.control_law(terms, x, lam);
    let rate_unconstrained = terms.constraint_rate(&u_o);
    let a1 = phi1(terms.constraint, params.rho1);
    let a2 = phi2(rate_unconstrained, params.rho2);
    Ok(MultiplierTerms {
        h,
        rate_unconstrained,
        phi1: a1,
        phi2: a2,
        mu: h * a1 * a2,
    })
}

/// Smoothed multiplier `h(x, lam, t) phi1(S) phi2(S1_o)`.
pub fn mu_smooth(
    cost: &QuadraticCost,
    problem: &dyn ProblemDefinition,
    x: &DVector<f64>,
    lam: &DVector<f64>,
    t: f64,
    params: &SharpnessParams,
) -> Result<f64> {
    let terms = LocalTerms::evaluate(problem, x, t)?;
    Ok(multiplier_terms(cost, &terms, x, lam, params)?.mu)
}

/// Control evaluated with the smoothed multiplier, `g(x, lam + mu S_x^T, t)`.
pub fn u_smooth(
    cost: &QuadraticCost,
    problem: &dyn ProblemDefinition,
    x: &DVector<f64>,
    lam: &DVector<f64>,
    t: f64,
    params: &SharpnessParams,
) -> Result<DVector<f64>> {
    let terms = LocalTerms::evaluate(problem, x, t)?;
    let mu = multiplier_terms(cost, &terms, x, lam, params)?.mu;
    let shifted = lam + mu * &terms.constraint_gradient;
    Ok(cost.control_law(&terms, x, &shifted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn phi1_anchor_values() {
        for rho in [0.5, 0.1, 5e-2, 1e-2, 5e-3, 1e-3, 7.3] {
            assert_relative_eq!(phi1(0.0, rho), 1.0, epsilon = 4.0 * f64::EPSILON);
            assert_relative_eq!(phi1(-rho, rho), PHI1_SCALE, epsilon = 1e-15);
        }
        assert_relative_eq!(PHI1_SCALE, 0.567_667_641_618_306_3, epsilon = 1e-15);
        assert!(phi1(-10.0, 0.01) < 1e-300);
    }

    #[test]
    fn phi2_anchor_values() {
        assert_eq!(phi2(0.0, 0.3), 1.0);
        assert_eq!(phi2(5.3, 0.3), 1.0);
        assert_eq!(phi2(-1.0, 0.3), 0.0);
        assert_eq!(phi2(-2.0, 0.3), 0.0);
        assert_relative_eq!(phi2(-0.5, 1.0), (-1.0f64 / 3.0).exp(), epsilon = 1e-15);
        assert_relative_eq!(phi2(-0.5, 1.0), 0.716_531_310_573_789_3, epsilon = 1e-15);
        // deep underflow is flushed to an exact zero
        assert_eq!(phi2(-0.9, 1e-3), 0.0);
    }

    #[test]
    fn dirac_anchor_values() {
        assert_relative_eq!(
            dirac_tilde(0.0, 0.1),
            3.989_422_804_014_327,
            epsilon = 1e-12
        );
        assert_eq!(dirac_tilde(0.37, 0.2), dirac_tilde(-0.37, 0.2));
    }

    #[test]
    fn sharpness_params_validation() {
        assert!(SharpnessParams::new(0.1, 0.0, 0.1).is_err());
        assert!(SharpnessParams::new(0.1, 0.1, f64::NAN).is_err());
        assert!(SharpnessParams::uniform(-1.0).is_err());
        let p = SharpnessParams::uniform(0.05).unwrap();
        assert_eq!((p.rho1, p.rho2, p.rho3), (0.05, 0.05, 0.05));
    }

    #[test]
    fn sharpness_limit() {
        let mut prev = f64::INFINITY;
        for rho in [1.0, 0.5, 0.1, 0.05, 0.01] {
            let v = phi1(-0.2, rho);
            assert!(v < prev);
            prev = v;
        }
        assert!(phi1(-0.2, 1e-3) < 1e-100);
        assert!(phi2(-0.3, 1e-2) < 1e-100);
    }
}
