//! Fixed-stepsize baseline with the one-round-per-iteration exchange.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::exec::{map_rows, stack_rows};
use crate::mixing::MixingMatrix;
use crate::problems::CompositeProblem;

use super::{consensus_error, gossip, AlphaUsed, CommCounts, StepMetrics};

#[derive(Debug, Clone)]
pub struct PgExtraState {
    pub x_prev: Array2<f64>,
    pub x: Array2<f64>,
    pub z: Array2<f64>,
    /// Cached `W·x_prev` — the correction term reuses last round's
    /// exchange, which is what keeps the schedule at one vector round.
    wx_prev: Array2<f64>,
    grad_prev: Array2<f64>,
    pub alpha: f64,
    pub k: u64,
}

fn check(x0: &Array2<f64>, prob: &CompositeProblem, mix: &MixingMatrix, alpha: f64) -> Result<()> {
    if x0.nrows() != prob.m() || x0.nrows() != mix.m() || x0.ncols() != prob.dim() {
        return Err(Error::Data(format!(
            "state is {}×{}, problem wants {}×{}, mixing matrix has {} agents",
            x0.nrows(),
            x0.ncols(),
            prob.m(),
            prob.dim(),
            mix.m()
        )));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::Config(format!(
            "stepsize must be positive and finite (got {alpha})"
        )));
    }
    Ok(())
}

/// First iteration: `z¹ = W·x⁰ − α∇F(x⁰)`, `x¹ = prox_{αR}(z¹)`. Costs one
/// vector round, like every later step.
pub fn pg_extra_init(
    x0: Array2<f64>,
    prob: &CompositeProblem,
    mix: &MixingMatrix,
    alpha: f64,
) -> Result<(PgExtraState, StepMetrics)> {
    check(&x0, prob, mix, alpha)?;
    let wx0 = gossip(mix.w(), &x0);
    let grad0 = prob.grad_rows(&x0);
    let z = &wx0 - &(&grad0 * alpha);
    let x_rows = map_rows(prob.m(), |i| prob.reg().prox(z.row(i), alpha));
    let x = stack_rows(prob.dim(), x_rows);
    let metrics = step_metrics(prob, &x, alpha);
    let state = PgExtraState { x_prev: x0, x, z, wx_prev: wx0, grad_prev: grad0, alpha, k: 1 };
    Ok((state, metrics))
}

/// One iteration of the corrected consensus recursion:
/// `z⁺ = z + W·x − (x_prev + W·x_prev)/2 − α(∇F(x) − ∇F(x_prev))`,
/// then the row-wise prox.
pub fn pg_extra_step(
    state: &PgExtraState,
    prob: &CompositeProblem,
    mix: &MixingMatrix,
) -> Result<(PgExtraState, StepMetrics)> {
    check(&state.x, prob, mix, state.alpha)?;
    let wx = gossip(mix.w(), &state.x);
    let grad = prob.grad_rows(&state.x);
    let w_bar_prev = (&state.x_prev + &state.wx_prev) * 0.5;
    let z_next = &(&(&state.z + &wx) - &w_bar_prev)
        - &(&(&grad - &state.grad_prev) * state.alpha);
    let x_rows = map_rows(prob.m(), |i| prob.reg().prox(z_next.row(i), state.alpha));
    let x_next = stack_rows(prob.dim(), x_rows);
    let metrics = step_metrics(prob, &x_next, state.alpha);
    let next = PgExtraState {
        x_prev: state.x.clone(),
        x: x_next,
        z: z_next,
        wx_prev: wx,
        grad_prev: grad,
        alpha: state.alpha,
        k: state.k + 1,
    };
    Ok((next, metrics))
}

fn step_metrics(prob: &CompositeProblem, x: &Array2<f64>, alpha: f64) -> StepMetrics {
    StepMetrics {
        alpha_used: AlphaUsed::Shared(alpha),
        linesearch_trials: vec![0; prob.m()],
        objective_per_agent: prob.objective_per_agent(x),
        consensus_error: consensus_error(x),
        comm: CommCounts { vector_rounds: 1, scalar_rounds: 0, broadcasts: 0 },
    }
}
