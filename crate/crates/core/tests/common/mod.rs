//! Strategies and checks shared by the property suites and the acceptance run.
#![allow(dead_code)]

use nalgebra::DVector;
use proptest::prelude::*;
use smooth_ocp::orbit::angular_momentum;
use smooth_ocp::problem::{
    constraint_rate, g_unconstrained, h_multiplier, u_constrained, ProblemDefinition,
};
use smooth_ocp::smoothing::{
    dirac_tilde, dirac_tilde_derivative, phi1, phi1_derivative, phi2, phi2_derivative,
};
use smooth_ocp::{build_orbit_problem, OrbitConfig, OrbitProblem, QuadraticCost};

pub const SCHEDULE: [f64; 6] = [0.5, 0.1, 5e-2, 1e-2, 5e-3, 1e-3];

pub type Check = Result<(), TestCaseError>;

pub fn benchmark() -> (OrbitProblem, QuadraticCost) {
    build_orbit_problem(OrbitConfig::default()).unwrap()
}

/// Random state with radius in `[0.5, 4]` and angular momentum bounded away
/// from zero (so that `S_x B != 0`), plus a random costate and time.
pub fn orbit_point() -> impl Strategy<Value = (DVector<f64>, DVector<f64>, f64)> {
    (
        0.5..4.0f64,
        -3.2..3.2f64,
        prop::array::uniform2(-1.5..1.5f64),
        prop::array::uniform4(-2.0..2.0f64),
        0.0..10.0f64,
    )
        .prop_map(|(radius, angle, v, lam, t)| {
            let x = DVector::from_vec(vec![radius * angle.cos(), radius * angle.sin(), v[0], v[1]]);
            (x, DVector::from_column_slice(&lam), t)
        })
        .prop_filter("first-order constraint", |(x, _, _)| {
            angular_momentum(x.as_slice()).abs() > 0.05
        })
}

pub fn schedule_rho() -> impl Strategy<Value = f64> {
    prop::sample::select(SCHEDULE.to_vec())
}

fn rate_at(
    problem: &OrbitProblem,
    cost: &QuadraticCost,
    x: &DVector<f64>,
    lam: &DVector<f64>,
    mu: f64,
    t: f64,
) -> f64 {
    let u = u_constrained(cost, problem, x, lam, mu, t).unwrap();
    constraint_rate(problem, x, &u, t).unwrap()
}

/// `S1` vanishes under the constrained control with `mu = h`.
pub fn constrained_rate_vanishes(x: &DVector<f64>, lam: &DVector<f64>, t: f64) -> Check {
    let (problem, cost) = benchmark();
    let h = h_multiplier(&cost, &problem, x, lam, t).unwrap();
    let rate = rate_at(&problem, &cost, x, lam, h, t);
    prop_assert!(rate.abs() <= 1e-9, "S1 = {rate:e} at h = {h}");
    Ok(())
}

/// `S1` under `g(x, lam + mu S_x^T, t)` is strictly decreasing on a grid of `mu`.
pub fn rate_decreases_in_multiplier(x: &DVector<f64>, lam: &DVector<f64>, t: f64) -> Check {
    let (problem, cost) = benchmark();
    let rates: Vec<f64> = (0..=40)
        .map(|k| rate_at(&problem, &cost, x, lam, -2.0 + 0.1 * k as f64, t))
        .collect();
    for w in rates.windows(2) {
        prop_assert!(w[1] < w[0], "{} !< {}", w[1], w[0]);
    }
    Ok(())
}

/// `h >= 0` exactly when the unconstrained control would leave the boundary.
pub fn multiplier_sign_follows_rate(x: &DVector<f64>, lam: &DVector<f64>, t: f64) -> Check {
    let (problem, cost) = benchmark();
    let h = h_multiplier(&cost, &problem, x, lam, t).unwrap();
    let u_o = g_unconstrained(&cost, &problem, x, lam, t).unwrap();
    let rate_o = constraint_rate(&problem, x, &u_o, t).unwrap();
    prop_assert_eq!(h >= 0.0, rate_o >= 0.0, "h = {}, S1_o = {}", h, rate_o);
    Ok(())
}

/// The general multiplier equals the benchmark's closed form
/// `(S_x f0 - S_x B B^T lam) / (S_x B B^T S_x^T)`.
pub fn multiplier_reduces_to_orbit_formula(x: &DVector<f64>, lam: &DVector<f64>, t: f64) -> Check {
    let (problem, cost) = benchmark();
    let h = h_multiplier(&cost, &problem, x, lam, t).unwrap();
    let sx = problem.constraint_gradient(x, t);
    let b = OrbitProblem::input_matrix();
    let gain = b.tr_mul(&sx);
    let f0 = problem.drift(x, t).unwrap();
    let reduced = (sx.dot(&f0) - gain.dot(&b.tr_mul(lam))) / gain.norm_squared();
    prop_assert!(
        (h - reduced).abs() <= 1e-12 * (1.0 + reduced.abs()),
        "{} vs {}",
        h,
        reduced
    );
    Ok(())
}

/// Central difference with step `step`; truncation error is `O(step^2)`.
fn central(f: impl Fn(f64) -> f64, x: f64, step: f64) -> f64 {
    (f(x + step) - f(x - step)) / (2.0 * step)
}

/// `d` agrees with a central difference on the variation scale `scale`.
pub fn check_agreement(
    f: impl Fn(f64) -> f64,
    d: f64,
    x: f64,
    scale: f64,
) -> Result<f64, TestCaseError> {
    let error = (central(f, x, 5e-5 * scale) - d).abs();
    prop_assert!(
        error <= 1e-5 * (d.abs() + 1.0 / scale),
        "x = {x}: derivative {d}, fd error {error:e}"
    );
    Ok(error)
}

/// As [`check_agreement`], and the discrepancy shrinks at the second-order
/// rate when the step is halved (unless it is already at roundoff).
pub fn check_derivative(f: impl Fn(f64) -> f64 + Copy, d: f64, x: f64, scale: f64) -> Check {
    let fine = check_agreement(f, d, x, scale)?;
    let coarse = (central(f, x, 1e-4 * scale) - d).abs();
    prop_assert!(
        fine <= 0.3 * coarse + 1e-9 / scale,
        "x = {x}: fd error {coarse:e} -> {fine:e} is not second order"
    );
    Ok(())
}

/// `z` is the constraint value in units of `rho`.
pub fn phi1_derivative_check(z: f64, rho: f64) -> Check {
    let x = z * rho;
    check_derivative(|s| phi1(s, rho), phi1_derivative(x, rho), x, rho)
}

/// `y` in `(-1, 0)`.
pub fn phi2_derivative_check(y: f64, rho: f64) -> Check {
    // The bump varies on the scale rho (1 - y^2) near y and faster towards -1.
    let scale = (rho * (1.0 - y * y)).min(-y) * 0.5;
    check_derivative(|s| phi2(s, rho), phi2_derivative(y, rho), y, scale)
}

/// `z` is the argument in units of `rho`.
pub fn dirac_derivative_check(z: f64, rho: f64) -> Check {
    // In units of rho the kernel is the standard normal density.
    let d = dirac_tilde_derivative(z * rho, rho) * rho * rho;
    check_derivative(|s| dirac_tilde(s * rho, rho) * rho, d, z, 1.0)
}

/// Values and derivatives at the branch points `y = 0` and `y = -1`.
pub fn phi2_branch_check(rho: f64) -> Check {
    prop_assert_eq!(phi2(0.0, rho), 1.0);
    prop_assert_eq!(phi2(-1.0, rho), 0.0);
    prop_assert_eq!(phi2_derivative(0.0, rho), 0.0);
    prop_assert_eq!(phi2_derivative(-1.0, rho), 0.0);
    // Only C1 at zero, so the difference error is first order there.
    check_agreement(|y| phi2(y, rho), 0.0, 0.0, 0.5 * rho)?;
    check_derivative(|y| phi2(y, rho), 0.0, -1.0, 1e-2)
}

pub fn phi1_anchor_check(rho: f64) -> Check {
    let value = phi1(0.0, rho);
    prop_assert!(
        (value - 1.0).abs() <= 4.0 * f64::EPSILON,
        "phi1(0) = {} at rho = {}",
        value,
        rho
    );
    Ok(())
}

/// Trapezoid rule over +-12 sigma; exponentially accurate for a Gaussian.
pub fn dirac_mass(rho: f64) -> f64 {
    let n = 4800;
    let (a, b) = (-12.0 * rho, 12.0 * rho);
    let dx = (b - a) / n as f64;
    let interior: f64 = (1..n).map(|k| dirac_tilde(a + k as f64 * dx, rho)).sum();
    dx * (interior + 0.5 * (dirac_tilde(a, rho) + dirac_tilde(b, rho)))
}
