//! Resolution of the marking parameter into estimator parameters, and the
//! two optimality thresholds.
//!
//! Given a Dörfler parameter `theta` in (0,1), a target rate `s0 > 0`, and a
//! gap `epsilon > 0`, the solver produces `(alpha, beta, K, M, gamma)` such
//! that the cyclic marking trajectory satisfies optimal Dörfler marking with
//! exactly parameter `theta`, while `1/K < theta < 1/K + epsilon`.

use crate::error::{Error, Result};
use crate::estimator::EstimatorParams;
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

/// Iteration cap for the monotone search over `M`.
const MAX_M_SEARCH: u32 = 1_000_000;

/// `1 - 2^(-x)` for `x > 0`, accurate near zero.
fn one_minus_exp2_neg(x: f64) -> f64 {
    -(-x * LN_2).exp_m1()
}

/// The geometric sum `S(beta, M) = sum_{j=1}^{M} 2^(-beta (j-1)/M)`, via its
/// closed form `(1 - 2^-beta) / (1 - 2^(-beta/M))`.
///
/// `S(beta, 1) = 1` for every `beta > 0`; the sum is strictly increasing and
/// unbounded in `M`.
pub fn share_sum(beta: f64, m: u32) -> f64 {
    assert!(beta > 0.0 && m >= 1, "share_sum needs beta > 0, M >= 1");
    if m == 1 {
        return 1.0;
    }
    one_minus_exp2_neg(beta) / one_minus_exp2_neg(beta / f64::from(m))
}

/// A resolved parameter set. Invariants: `theta = 1/K + gamma`,
/// `S(beta, M) = (1 - theta + gamma)/gamma`, `0 < gamma < min(epsilon, theta)`,
/// and `0 < alpha < s0/M`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSolution {
    pub theta: f64,
    pub s0: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub m: u32,
    pub gamma: f64,
    pub k: f64,
    pub alpha: f64,
    pub s_value: f64,
}

impl ParamSolution {
    pub fn estimator_params(&self) -> EstimatorParams {
        EstimatorParams::new(self.alpha, self.beta, self.k, self.m)
            .expect("solved parameters are valid")
    }
}

/// Solve for `(beta, M, gamma, K, alpha)` given `(theta, s0, epsilon)`.
///
/// `beta = s0`; `M` is the smallest integer whose induced
/// `gamma(M) = (1 - theta)/(S(beta, M) - 1)` lies in `(0, min(epsilon, theta))`
/// (`M = 1` is excluded since `S = 1` there); `K = 1/(theta - gamma)`; and
/// `alpha = s0/(2M)`, the midpoint of the admissible interval `(0, s0/M)`.
pub fn solve_params(theta: f64, s0: f64, epsilon: f64) -> Result<ParamSolution> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "theta must lie in (0, 1), got {theta}"
        )));
    }
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(Error::InvalidParameter(format!("s0 must be > 0, got {s0}")));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "epsilon must be > 0, got {epsilon}"
        )));
    }
    let beta = s0;
    let bound = epsilon.min(theta);
    let mut m = 2u32;
    loop {
        let s_value = share_sum(beta, m);
        let gamma = (1.0 - theta) / (s_value - 1.0);
        if gamma > 0.0 && gamma < bound {
            let k = 1.0 / (theta - gamma);
            let alpha = s0 / (2.0 * f64::from(m));
            return Ok(ParamSolution {
                theta,
                s0,
                epsilon,
                beta,
                m,
                gamma,
                k,
                alpha,
                s_value,
            });
        }
        m += 1;
        if m > MAX_M_SEARCH {
            // S diverges, so this is unreachable for valid inputs; guard
            // against non-finite surprises anyway.
            return Err(Error::InvalidParameter(format!(
                "no admissible M below {MAX_M_SEARCH} for theta={theta}, s0={s0}, eps={epsilon}"
            )));
        }
    }
}

/// The two threshold formulas: `theta_star = 1/(1 + C3)` and
/// `theta_tilde_star = C1/C3`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub theta_star: f64,
    pub theta_tilde_star: f64,
}

pub fn thresholds(c1: f64, c3: f64) -> Result<Thresholds> {
    if c1.is_nan() || c3.is_nan() || c1 <= 0.0 || c3 <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "threshold constants must be positive, got C1={c1}, C3={c3}"
        )));
    }
    Ok(Thresholds {
        theta_star: 1.0 / (1.0 + c3),
        theta_tilde_star: c1 / c3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn share_sum_examples() {
        assert_eq!(share_sum(0.3, 1), 1.0);
        assert_eq!(share_sum(17.0, 1), 1.0);
        assert!((share_sum(1.0, 2) - (1.0 + 2f64.powf(-0.5))).abs() < 1e-15);
        // Closed form against the direct sum.
        for (beta, m) in [(1.0, 8u32), (0.05, 5), (2.0, 3), (0.7, 64)] {
            let direct: f64 = (1..=m)
                .map(|j| 2f64.powf(-beta * f64::from(j - 1) / f64::from(m)))
                .sum();
            let closed = share_sum(beta, m);
            assert!(
                (closed - direct).abs() <= 1e-14 * direct,
                "beta={beta}, M={m}: {closed} vs {direct}"
            );
        }
        assert!((share_sum(1.0, 8) - 6.024389853508397).abs() < 1e-14);
    }

    #[test]
    fn share_sum_is_increasing_in_m() {
        let mut prev = share_sum(0.8, 1);
        for m in 2..64 {
            let next = share_sum(0.8, m);
            assert!(next > prev);
            prev = next;
        }
    }

    #[test]
    fn reference_solution() {
        let sol = solve_params(0.5, 1.0, 0.1).unwrap();
        assert_eq!(sol.beta, 1.0);
        assert_eq!(sol.m, 8);
        assert!(sol.gamma > 0.0995 && sol.gamma < 0.0996);
        assert!(sol.k > 2.4969 && sol.k < 2.4970);
        assert_eq!(sol.alpha, 0.0625);
        // M = 7 is inadmissible: its gamma exceeds epsilon.
        let gamma7 = 0.5 / (share_sum(1.0, 7) - 1.0);
        assert!(gamma7 > 0.1);
    }

    #[test]
    fn wide_epsilon_solution() {
        let sol = solve_params(0.9, 1.0, 0.85).unwrap();
        assert_eq!(sol.m, 2);
        assert!((sol.gamma - 0.1 / (share_sum(1.0, 2) - 1.0)).abs() < 1e-15);
        assert!((sol.k - 1.3182548813130497).abs() < 1e-12);
    }

    #[test]
    fn huge_epsilon_limits_gamma_by_theta() {
        // With epsilon effectively unbounded, gamma < theta drives the search:
        // M = 2 gives gamma ~ 0.707 > 0.5, M = 3 is the first admissible.
        let sol = solve_params(0.5, 1.0, 1e9).unwrap();
        assert_eq!(sol.m, 3);
        assert!(sol.gamma < 0.5);
    }

    #[test]
    fn solution_invariants() {
        for (theta, s0, eps) in [
            (0.5, 1.0, 0.1),
            (0.9, 1.0, 0.85),
            (0.3, 0.25, 0.02),
            (0.05, 2.0, 0.01),
            (0.99, 4.0, 0.5),
        ] {
            let sol = solve_params(theta, s0, eps).unwrap();
            assert!((sol.theta - (1.0 / sol.k + sol.gamma)).abs() <= 1e-14);
            let rhs = (1.0 - sol.theta + sol.gamma) / sol.gamma;
            assert!(
                (sol.s_value - rhs).abs() <= 1e-12 * sol.s_value,
                "S identity: {} vs {rhs}",
                sol.s_value
            );
            assert!(sol.gamma > 0.0 && sol.gamma < eps.min(theta));
            assert!(1.0 / sol.k < theta && theta < 1.0 / sol.k + eps);
            assert!(sol.alpha > 0.0 && sol.alpha < sol.s0 / f64::from(sol.m));
            // Round trip: the k = 0 Dörfler share reproduces theta.
            let share = 1.0 / sol.k + (1.0 - 1.0 / sol.k) / sol.s_value;
            assert!((share - theta).abs() <= 1e-12);
        }
    }

    #[test]
    fn shrinking_epsilon_never_decreases_m() {
        let mut prev_m = 0;
        for eps in [1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01] {
            let sol = solve_params(0.5, 1.0, eps).unwrap();
            assert!(sol.m >= prev_m, "eps={eps}");
            prev_m = sol.m;
        }
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(solve_params(1.5, 1.0, 0.1).is_err());
        assert!(solve_params(0.0, 1.0, 0.1).is_err());
        assert!(solve_params(0.5, 0.0, 0.1).is_err());
        assert!(solve_params(0.5, 1.0, 0.0).is_err());
    }

    #[test]
    fn threshold_formulas() {
        let t = thresholds(1.0, 1.0).unwrap();
        assert_eq!(t.theta_star, 0.5);
        assert_eq!(t.theta_tilde_star, 1.0);

        let k = 2.496969745179243;
        let t = thresholds(1.0, k).unwrap();
        assert!((t.theta_star - 0.28596186780813665).abs() < 1e-15);
        assert!((t.theta_tilde_star - 0.4004854291609431).abs() < 1e-15);
        assert!(t.theta_tilde_star >= t.theta_star);

        assert!(thresholds(0.0, 1.0).is_err());
        assert!(thresholds(1.0, -2.0).is_err());
    }
}
