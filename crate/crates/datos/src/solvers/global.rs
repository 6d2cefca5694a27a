//! Network-wide min-consensus variant: one shared stepsize per iteration.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::exec::{map_rows, stack_rows};
use crate::linesearch::backtrack;
use crate::mixing::MixingMatrix;
use crate::problems::CompositeProblem;

use super::{consensus_error, gossip, AlphaUsed, CommCounts, StepMetrics};

#[derive(Debug, Clone)]
pub struct GlobalState {
    /// Primal iterates, one agent per row.
    pub x: Array2<f64>,
    /// Dual iterates (first dual block).
    pub s: Array2<f64>,
    /// Gradient-tracking variable; stays in the range of `I − W`, so its
    /// columns sum to zero for all k.
    pub d: Array2<f64>,
    /// Stepsize accepted at the previous iteration; next ladder seed.
    pub alpha_prev: f64,
    pub k: u64,
}

impl GlobalState {
    /// Fresh state with `D = 0` (required: the tracking argument needs
    /// `D⁰ ∈ range(I − W)`, and zero is the only value a cold start can
    /// certify).
    pub fn new(x: Array2<f64>, s: Array2<f64>, alpha_init: f64) -> Result<Self> {
        if x.dim() != s.dim() {
            return Err(Error::Data(format!(
                "X is {:?} but S is {:?}",
                x.dim(),
                s.dim()
            )));
        }
        if !(alpha_init.is_finite() && alpha_init > 0.0) {
            return Err(Error::Config(format!(
                "initial stepsize must be positive and finite (got {alpha_init})"
            )));
        }
        let d = Array2::zeros(x.dim());
        Ok(GlobalState { x, s, d, alpha_prev: alpha_init, k: 0 })
    }
}

fn check_shapes(x: &Array2<f64>, prob: &CompositeProblem, mix: &MixingMatrix) -> Result<()> {
    if x.nrows() != prob.m() || x.nrows() != mix.m() || x.ncols() != prob.dim() {
        return Err(Error::Data(format!(
            "state is {}×{}, problem wants {}×{}, mixing matrix has {} agents",
            x.nrows(),
            x.ncols(),
            prob.m(),
            prob.dim(),
            mix.m()
        )));
    }
    Ok(())
}

/// One synchronous iteration: gossip, per-agent line search, network-wide
/// min-consensus on the stepsize, then the primal/dual updates.
pub fn global_datos_step(
    state: &GlobalState,
    prob: &CompositeProblem,
    mix: &MixingMatrix,
    delta: f64,
) -> Result<(GlobalState, StepMetrics)> {
    check_shapes(&state.x, prob, mix)?;
    let m = prob.m();
    let w = mix.w();

    // Communication: X½ = W X and D½ = W(∇F(X) + S + D). Two vector rounds.
    let x_half = gossip(w, &state.x);
    let grads = prob.grad_rows(&state.x);
    let d_half = gossip(w, &(&grads + &state.s + &state.d));

    // Per-agent line search from the shared previous stepsize, along -d½.
    let searches = map_rows(m, |i| {
        let dir = d_half.row(i).mapv(|v| -v);
        backtrack(
            state.alpha_prev,
            prob.loss(i),
            state.x.row(i),
            x_half.row(i),
            dir.view(),
            delta,
        )
    });
    let mut trials = Vec::with_capacity(m);
    let mut alpha = f64::INFINITY;
    for res in searches {
        let ls = res?;
        alpha = alpha.min(ls.alpha);
        trials.push(ls.trials);
    }

    // Min-consensus costs one network-wide scalar broadcast.
    // Updates: X⁺ = prox_{αR}(X½ − αD½ + αS), then the dual pair in the
    // factored forms S + (X½ − X⁺)/α − D½ and D½ + (X − X½)/α − ∇F − S.
    let prox_arg = &(&x_half - &(&d_half * alpha)) + &(&state.s * alpha);
    let x_rows = map_rows(m, |i| prob.reg().prox(prox_arg.row(i), alpha));
    let x_next = stack_rows(prob.dim(), x_rows);
    let s_next = &(&state.s + &(&(&x_half - &x_next) / alpha)) - &d_half;
    let d_next = &(&(&d_half + &(&(&state.x - &x_half) / alpha)) - &grads) - &state.s;

    let metrics = StepMetrics {
        alpha_used: AlphaUsed::Shared(alpha),
        linesearch_trials: trials,
        objective_per_agent: prob.objective_per_agent(&x_next),
        consensus_error: consensus_error(&x_next),
        comm: CommCounts { vector_rounds: 2, scalar_rounds: 0, broadcasts: 1 },
    };
    let next = GlobalState {
        x: x_next,
        s: s_next,
        d: d_next,
        alpha_prev: alpha,
        k: state.k + 1,
    };
    Ok((next, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::problems::{gen_regression_instance, QuadraticRidgeLoss, SmoothLoss, Zero};
    use ndarray::{array, Array1};

    /// `f(x) = ½(x − c)²` in one variable.
    fn shifted_quadratic(c: f64) -> QuadraticRidgeLoss {
        let s = 0.5f64.sqrt();
        let a = Array2::from_shape_vec((1, 1), vec![s]).unwrap();
        QuadraticRidgeLoss::new(a, Array1::from(vec![c * s]), 0.0).unwrap()
    }

    fn two_agent_problem() -> CompositeProblem {
        CompositeProblem::new(
            vec![Box::new(shifted_quadratic(0.0)), Box::new(shifted_quadratic(2.0))],
            Box::new(Zero),
        )
        .unwrap()
    }

    #[test]
    fn single_agent_fixed_point_at_minimizer() {
        let prob = CompositeProblem::new(
            vec![Box::new(shifted_quadratic(0.0)) as Box<dyn SmoothLoss>],
            Box::new(Zero),
        )
        .unwrap();
        let mix = MixingMatrix::metropolis(Graph::complete(1).unwrap(), 1.0 / 3.0).unwrap();
        let state = GlobalState::new(Array2::zeros((1, 1)), Array2::zeros((1, 1)), 1.0).unwrap();
        let (next, metrics) = global_datos_step(&state, &prob, &mix, 0.9).unwrap();
        assert_eq!(next.x[[0, 0]], 0.0);
        assert_eq!(next.s[[0, 0]], 0.0);
        assert_eq!(next.d[[0, 0]], 0.0);
        // At the minimizer the step direction is zero, so the first ladder
        // candidate is accepted and the stepsize never shrinks.
        assert_eq!(next.alpha_prev, 1.0);
        assert_eq!(metrics.linesearch_trials, vec![1]);
    }

    /// Straight-line transcription of the update formulas for m = 2, d = 1,
    /// f_i(x) = ½(x − c_i)², r ≡ 0 — plain scalar arithmetic, sharing no
    /// code with the implementation.
    fn hand_step(
        w: [[f64; 2]; 2],
        c: [f64; 2],
        x: [f64; 2],
        s: [f64; 2],
        d: [f64; 2],
        alpha_prev: f64,
        delta: f64,
    ) -> ([f64; 2], [f64; 2], [f64; 2], f64) {
        let grad = [x[0] - c[0], x[1] - c[1]];
        let mut x_half = [0.0; 2];
        let mut d_half = [0.0; 2];
        for i in 0..2 {
            for j in 0..2 {
                x_half[i] += w[i][j] * x[j];
                d_half[i] += w[i][j] * (grad[j] + s[j] + d[j]);
            }
        }
        let mut alpha = f64::INFINITY;
        for i in 0..2 {
            let f = |v: f64| 0.5 * (v - c[i]) * (v - c[i]);
            let mut a = alpha_prev;
            loop {
                let cand = x_half[i] - a * d_half[i];
                let diff = cand - x[i];
                let rhs = f(x[i]) + grad[i] * diff + delta / (2.0 * a) * diff * diff;
                if f(cand) <= rhs + 1e-12 * (1.0 + f(x[i]).abs()) {
                    break;
                }
                a /= 2.0;
            }
            alpha = alpha.min(a);
        }
        let mut xn = [0.0; 2];
        let mut sn = [0.0; 2];
        let mut dn = [0.0; 2];
        for i in 0..2 {
            xn[i] = x_half[i] - alpha * d_half[i] + alpha * s[i]; // prox of r≡0 is identity
            sn[i] = s[i] + (x_half[i] - xn[i] - alpha * d_half[i]) / alpha;
            dn[i] = d_half[i] + (x[i] - x_half[i] - alpha * grad[i] - alpha * s[i]) / alpha;
        }
        (xn, sn, dn, alpha)
    }

    #[test]
    fn two_agent_step_matches_hand_transcription() {
        let prob = two_agent_problem();
        let mix = MixingMatrix::metropolis(Graph::complete(2).unwrap(), 1.0 / 3.0).unwrap();
        // Metropolis on K₂ with c = 1/3 gives W = [[5/6, 1/6], [1/6, 5/6]].
        assert!((mix.w()[[0, 0]] - 5.0 / 6.0).abs() < 1e-15);
        assert!((mix.w()[[0, 1]] - 1.0 / 6.0).abs() < 1e-15);

        let x0 = [0.0, 2.0];
        let s0 = [0.5, -0.25];
        let state = GlobalState::new(array![[x0[0]], [x0[1]]], array![[s0[0]], [s0[1]]], 1.0).unwrap();
        let (next, metrics) = global_datos_step(&state, &prob, &mix, 0.9).unwrap();

        let w = [[5.0 / 6.0, 1.0 / 6.0], [1.0 / 6.0, 5.0 / 6.0]];
        let (xn, sn, dn, alpha) = hand_step(w, [0.0, 2.0], x0, s0, [0.0, 0.0], 1.0, 0.9);
        assert!((next.x[[0, 0]] - xn[0]).abs() < 1e-14);
        assert!((next.x[[1, 0]] - xn[1]).abs() < 1e-14);
        assert!((next.s[[0, 0]] - sn[0]).abs() < 1e-14);
        assert!((next.s[[1, 0]] - sn[1]).abs() < 1e-14);
        assert!((next.d[[0, 0]] - dn[0]).abs() < 1e-14);
        assert!((next.d[[1, 0]] - dn[1]).abs() < 1e-14);
        assert_eq!(next.alpha_prev, alpha);
        assert_eq!(metrics.comm, CommCounts { vector_rounds: 2, scalar_rounds: 0, broadcasts: 1 });
    }

    #[test]
    fn tracking_variable_keeps_zero_column_sums() {
        let inst = gen_regression_instance(4, 3, 6, 0.0, 0.0, 1e-3, 21).unwrap();
        let graph = Graph::erdos_renyi(4, 0.9, 3).unwrap();
        let mix = MixingMatrix::metropolis(graph, 1.0 / 3.0).unwrap();
        let mut rng_x = 0.7f64;
        // Small deterministic non-random fill is enough here.
        let x0 = Array2::from_shape_fn((4, 6), |_| {
            rng_x = (rng_x * 1.3).sin();
            rng_x
        });
        let s0 = x0.mapv(|v| 0.5 - v);
        let mut state = GlobalState::new(x0, s0, 10.0).unwrap();
        let mut last_alpha = f64::INFINITY;
        for _ in 0..25 {
            let (next, metrics) = global_datos_step(&state, &inst.problem, &mix, 0.9).unwrap();
            let scale = 1.0 + next.d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for j in 0..6 {
                let colsum: f64 = next.d.column(j).sum();
                assert!(colsum.abs() <= 1e-10 * scale, "column {j} sums to {colsum}");
            }
            // Shared stepsize never grows: the ladder seeds at the previous
            // value and only halves, and min-consensus only shrinks it.
            assert!(metrics.alpha_used.min() <= last_alpha);
            last_alpha = metrics.alpha_used.min();
            state = next;
        }
    }
}
