//! Centralized proximal-gradient oracle that supplies `u*` (and `x*`).

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::linesearch::{ACCEPT_SLACK, LADDER_FLOOR};
use crate::problems::CompositeProblem;

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub x: Array1<f64>,
    pub u_star: f64,
    pub iterations: u64,
    /// False when `max_iter` ran out before the step-norm test fired; the
    /// iterate returned is still the best one seen.
    pub converged: bool,
    pub final_step_norm: f64,
}

/// Proximal gradient on `u = f + r` with backtracking: candidates are
/// `x⁺(α) = prox_{αr}(x − α∇f(x))` on the same halving ladder and
/// sufficient-decrease condition as the decentralized solvers, seeded at
/// the previously accepted stepsize.
///
/// Stops when `‖x⁺ − x‖/α ≤ tol`. Tolerances below `1e-16·(1 + ‖x‖_∞)` are
/// clamped up to that floor — tighter requests are below double rounding
/// and would just spin until `max_iter`.
pub fn centralized_proxgrad(
    prob: &CompositeProblem,
    delta: f64,
    tol: f64,
    max_iter: u64,
) -> Result<OracleOutcome> {
    if !(delta.is_finite() && delta > 0.0 && delta <= 1.0) {
        return Err(Error::Config(format!(
            "contraction δ must lie in (0, 1] (got {delta})"
        )));
    }
    if tol.is_nan() || tol < 0.0 {
        return Err(Error::Config(format!("tolerance must be nonnegative (got {tol})")));
    }
    let d = prob.dim();
    // Domain-respecting start: the prox of r at the origin lands inside
    // the regularizer's feasible set (e.g. the spectral box pins it to a
    // positive definite matrix), which the losses' domains contain.
    let mut x = prob.reg().prox(Array1::zeros(d).view(), 1.0);
    if !prob.f_value(x.view()).is_finite() {
        return Err(Error::Numerical(
            "oracle start point lies outside the loss domain".into(),
        ));
    }

    let mut alpha = 10.0;
    let mut step_norm = f64::INFINITY;
    for it in 0..max_iter {
        let fx = prob.f_value(x.view());
        let gx = prob.f_gradient(x.view());
        let slack = ACCEPT_SLACK * (1.0 + fx.abs());
        let candidate = loop {
            let arg = &x - &(&gx * alpha);
            let cand = prob.reg().prox(arg.view(), alpha);
            let f_cand = prob.f_value(cand.view());
            if f_cand.is_finite() {
                let diff = &cand - &x;
                let quad = diff.dot(&diff) * delta / (2.0 * alpha);
                if f_cand <= fx + gx.dot(&diff) + quad + slack {
                    break cand;
                }
            }
            alpha *= 0.5;
            if alpha < LADDER_FLOOR {
                return Err(Error::StepsizeUnderflow { alpha, trials: 0 });
            }
        };
        let diff = &candidate - &x;
        step_norm = diff.dot(&diff).sqrt() / alpha;
        x = candidate;
        let scale = 1.0 + x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if step_norm <= tol.max(1e-16 * scale) {
            return Ok(OracleOutcome {
                u_star: prob.u_value(x.view()),
                x,
                iterations: it + 1,
                converged: true,
                final_step_norm: step_norm,
            });
        }
    }
    Ok(OracleOutcome {
        u_star: prob.u_value(x.view()),
        x,
        iterations: max_iter,
        converged: false,
        final_step_norm: step_norm,
    })
}

/// Fixed-point residual of the prox-gradient map at unit stepsize,
/// `‖x − prox_r(x − ∇f(x))‖₂`: zero exactly at minimizers of `f + r`.
pub fn kkt_residual(prob: &CompositeProblem, x: &Array1<f64>) -> f64 {
    let gx = prob.f_gradient(x.view());
    let inner = x - &gx;
    let mapped = prob.reg().prox(inner.view(), 1.0);
    let diff = x - &mapped;
    diff.dot(&diff).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cholesky, chol_solve};
    use crate::problems::{gen_regression_instance, QuadraticRidgeLoss, SmoothLoss, L1};
    use ndarray::{array, Array2};

    #[test]
    fn soft_threshold_closed_form() {
        // f(x) = ½(x − 2)², r = |x|: optimality 0 ∈ x − 2 + ∂|x| gives
        // x* = 1, u* = ½ + 1.
        let s = 0.5f64.sqrt();
        let a = Array2::from_shape_vec((1, 1), vec![s]).unwrap();
        let loss = QuadraticRidgeLoss::new(a, array![2.0 * s], 0.0).unwrap();
        let prob = CompositeProblem::new(
            vec![Box::new(loss) as Box<dyn SmoothLoss>],
            Box::new(L1::new(1.0).unwrap()),
        )
        .unwrap();
        let out = centralized_proxgrad(&prob, 0.9, 1e-14, 100_000).unwrap();
        assert!(out.converged);
        assert!((out.x[0] - 1.0).abs() <= 1e-12, "x* = {}", out.x[0]);
        assert!((out.u_star - 1.5).abs() <= 1e-12);
    }

    #[test]
    fn unregularized_quadratic_matches_direct_solve() {
        // Three quadratic agents, r ≡ 0: the minimizer solves the normal
        // equations H x = rhs with H = (1/m)Σ (2/n)AᵢᵀAᵢ + γ̄ I.
        // λ = 0 keeps the L1 term but with zero weight — identical to r ≡ 0.
        let inst = gen_regression_instance(3, 5, 4, 0.2, 0.1, 0.0, 8).unwrap();
        let out = centralized_proxgrad(&inst.problem, 0.9, 1e-15, 200_000).unwrap();
        assert!(out.converged);

        let prob = &inst.problem;
        let d = prob.dim();
        // Independent route: assemble H and rhs from the gradient's action,
        // ∇f(x) = Hx − rhs, probed at 0 and the unit vectors.
        let g0 = prob.f_gradient(Array1::zeros(d).view());
        let rhs = g0.mapv(|v| -v);
        let mut h = Array2::zeros((d, d));
        for j in 0..d {
            let mut e = Array1::zeros(d);
            e[j] = 1.0;
            let gj = prob.f_gradient(e.view());
            for i in 0..d {
                h[[i, j]] = gj[i] - g0[i];
            }
        }
        let l = cholesky(h.view()).expect("H is positive definite");
        let x_direct = chol_solve(&l, &rhs);
        for i in 0..d {
            assert!(
                (out.x[i] - x_direct[i]).abs() <= 1e-10 * (1.0 + x_direct[i].abs()),
                "coordinate {i}: {} vs {}",
                out.x[i],
                x_direct[i]
            );
        }
    }

    #[test]
    fn lasso_kkt_residual_is_tiny() {
        let inst = gen_regression_instance(5, 4, 10, 0.0, 0.0, 0.1, 3).unwrap();
        let out = centralized_proxgrad(&inst.problem, 0.9, 1e-14, 500_000).unwrap();
        assert!(out.converged);
        let norm = out.x.dot(&out.x).sqrt();
        let res = kkt_residual(&inst.problem, &out.x);
        assert!(res <= 1e-12 * (1.0 + norm), "KKT residual {res}");
    }

    #[test]
    fn iteration_budget_exhaustion_is_flagged() {
        let inst = gen_regression_instance(3, 4, 6, 0.0, 0.0, 0.05, 5).unwrap();
        let out = centralized_proxgrad(&inst.problem, 0.9, 0.0, 3).unwrap();
        assert!(!out.converged);
        assert_eq!(out.iterations, 3);
        assert!(out.final_step_norm > 0.0);
    }
}
