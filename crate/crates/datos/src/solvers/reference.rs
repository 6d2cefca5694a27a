//! Stacked Davis–Yin splitting with explicit matrix square roots.
//!
//! This solver carries the full two-block variables (T_B, S, Y) and the
//! dense matrices Ł = √(I − W), M = √W, so it is not decentralized — it
//! exists as an independently-derived oracle for the gossip
//! implementation: from matched initial states the first-block pair
//! (T_B1, S1) must track (X, S) of the global variant.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::exec::{map_rows, stack_rows};
use crate::linalg::{sym_sqrt_psd, sym_sqrt_psd_biased};
use crate::linesearch::{ACCEPT_SLACK, LADDER_FLOOR};
use crate::mixing::MixingMatrix;
use crate::problems::CompositeProblem;

use super::{consensus_error, AlphaUsed, CommCounts, StepMetrics};

#[derive(Debug, Clone)]
pub struct ReferenceState {
    /// First primal block; corresponds to X in the gossip variant.
    pub t_b1: Array2<f64>,
    /// Second primal block; the prox of the consensus indicator pins it to
    /// zero after every step.
    pub t_b2: Array2<f64>,
    /// First dual block; corresponds to S.
    pub s1: Array2<f64>,
    /// Second dual block; self-corrects onto −M·Y.
    pub s2: Array2<f64>,
    /// Auxiliary variable with D = Ł·Y.
    pub y: Array2<f64>,
    pub alpha_prev: f64,
    pub k: u64,
    ell: Array2<f64>,
    msqrt: Array2<f64>,
}

impl ReferenceState {
    pub fn new(
        x0: Array2<f64>,
        s0: Array2<f64>,
        alpha_init: f64,
        mix: &MixingMatrix,
    ) -> Result<Self> {
        Self::build(x0, s0, alpha_init, mix, None)
    }

    /// Diagnostic constructor that corrupts the eigenvalue clamp inside
    /// both square roots by `bias`. Exists solely so the self-test can
    /// demonstrate that the equivalence check has teeth; never use it for
    /// actual experiments.
    pub fn with_biased_roots(
        x0: Array2<f64>,
        s0: Array2<f64>,
        alpha_init: f64,
        mix: &MixingMatrix,
        bias: f64,
    ) -> Result<Self> {
        Self::build(x0, s0, alpha_init, mix, Some(bias))
    }

    fn build(
        x0: Array2<f64>,
        s0: Array2<f64>,
        alpha_init: f64,
        mix: &MixingMatrix,
        bias: Option<f64>,
    ) -> Result<Self> {
        if x0.dim() != s0.dim() {
            return Err(Error::Data(format!(
                "X is {:?} but S is {:?}",
                x0.dim(),
                s0.dim()
            )));
        }
        if x0.nrows() != mix.m() {
            return Err(Error::Data(format!(
                "state has {} rows, mixing matrix has {} agents",
                x0.nrows(),
                mix.m()
            )));
        }
        if !(alpha_init.is_finite() && alpha_init > 0.0) {
            return Err(Error::Config(format!(
                "initial stepsize must be positive and finite (got {alpha_init})"
            )));
        }
        let m = mix.m();
        let i_minus_w = Array2::eye(m) - mix.w();
        let (ell, msqrt) = match bias {
            None => (sym_sqrt_psd(i_minus_w.view())?, sym_sqrt_psd(mix.w().view())?),
            Some(b) => (
                sym_sqrt_psd_biased(i_minus_w.view(), b)?,
                sym_sqrt_psd_biased(mix.w().view(), b)?,
            ),
        };
        let dim = x0.dim();
        Ok(ReferenceState {
            t_b1: x0,
            t_b2: Array2::zeros(dim),
            s1: s0,
            // Y⁰ = 0 keeps D⁰ = ŁY⁰ = 0, and S2 = −M·Y forces S2⁰ = 0.
            s2: Array2::zeros(dim),
            y: Array2::zeros(dim),
            alpha_prev: alpha_init,
            k: 0,
            ell,
            msqrt,
        })
    }

    pub fn ell(&self) -> &Array2<f64> {
        &self.ell
    }

    pub fn msqrt(&self) -> &Array2<f64> {
        &self.msqrt
    }
}

/// One stacked step. The stepsize descends a shared halving ladder from
/// `alpha_prev` until the sufficient-decrease condition holds on every
/// first-block row simultaneously; by downward closure of the per-row
/// conditions this is the same value the gossip variant reaches through
/// per-agent searches plus min-consensus.
pub fn davis_yin_reference_step(
    state: &ReferenceState,
    prob: &CompositeProblem,
    delta: f64,
) -> Result<(ReferenceState, StepMetrics)> {
    let m = prob.m();
    let d = prob.dim();
    if state.t_b1.nrows() != m || state.t_b1.ncols() != d {
        return Err(Error::Data(format!(
            "state is {}×{}, problem wants {}×{}",
            state.t_b1.nrows(),
            state.t_b1.ncols(),
            m,
            d
        )));
    }
    if !(delta.is_finite() && delta > 0.0 && delta <= 1.0) {
        return Err(Error::Config(format!(
            "line search contraction δ must lie in (0, 1] (got {delta})"
        )));
    }

    let grads = prob.grad_rows(&state.t_b1);
    let anchors = map_rows(m, |i| prob.loss(i).value(state.t_b1.row(i)));
    for (i, f) in anchors.iter().enumerate() {
        if !f.is_finite() {
            return Err(Error::Numerical(format!(
                "row {i} of the anchor lies outside the loss domain"
            )));
        }
    }
    let sum_sg = &state.s1 + &grads;
    let ell_y = state.ell.dot(&state.y);

    let mut alpha = state.alpha_prev;
    let mut first_accept = vec![0u32; m];
    let mut level: u32 = 0;
    let (alpha, y_next, t_a1) = loop {
        level += 1;
        let inner = &state.t_b1 - &(&(&sum_sg + &ell_y) * alpha);
        let y_next = &state.y + &(state.ell.dot(&inner) / alpha);
        let t_a1 = &(&state.t_b1 - &(&sum_sg * alpha)) - &(state.ell.dot(&y_next) * alpha);
        let mut all = true;
        for i in 0..m {
            let cand = t_a1.row(i);
            let f_cand = prob.loss(i).value(cand);
            let ok = if f_cand.is_finite() {
                let diff = &cand - &state.t_b1.row(i);
                let linear = grads.row(i).dot(&diff);
                let quad = diff.dot(&diff) * delta / (2.0 * alpha);
                f_cand <= anchors[i] + linear + quad + ACCEPT_SLACK * (1.0 + anchors[i].abs())
            } else {
                false
            };
            if ok {
                if first_accept[i] == 0 {
                    first_accept[i] = level;
                }
            } else {
                all = false;
                // A previously accepted row that fails deeper in the ladder
                // would break downward closure; restart its count.
                first_accept[i] = 0;
            }
        }
        if all {
            break (alpha, y_next, t_a1);
        }
        alpha *= 0.5;
        if alpha < LADDER_FLOOR {
            return Err(Error::StepsizeUnderflow { alpha, trials: level });
        }
    };

    let t_a2 = &(&state.t_b2 - &(&state.s2 * alpha)) - &(state.msqrt.dot(&y_next) * alpha);
    let prox_arg = &t_a1 + &(&state.s1 * alpha);
    let rows = map_rows(m, |i| prob.reg().prox(prox_arg.row(i), alpha));
    let t_b1_next = stack_rows(d, rows);
    let s1_next = &state.s1 + &(&(&t_a1 - &t_b1_next) / alpha);
    // T_B2⁺ = 0, so the second dual block gets the whole of T_A2 / α.
    let s2_next = &state.s2 + &(&t_a2 / alpha);

    let metrics = StepMetrics {
        alpha_used: AlphaUsed::Shared(alpha),
        linesearch_trials: first_accept,
        objective_per_agent: prob.objective_per_agent(&t_b1_next),
        consensus_error: consensus_error(&t_b1_next),
        // Mirrors the schedule of the gossip variant it stands in for.
        comm: CommCounts { vector_rounds: 2, scalar_rounds: 0, broadcasts: 1 },
    };
    let next = ReferenceState {
        t_b1: t_b1_next,
        t_b2: Array2::zeros((m, d)),
        s1: s1_next,
        s2: s2_next,
        y: y_next,
        alpha_prev: alpha,
        k: state.k + 1,
        ell: state.ell.clone(),
        msqrt: state.msqrt.clone(),
    };
    Ok((next, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::problems::{gen_regression_instance, QuadraticRidgeLoss, SmoothLoss, Zero};
    use crate::solvers::{centralized_proxgrad, global_datos_step, GlobalState};
    use ndarray::Array1;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn randn(rng: &mut ChaCha8Rng, m: usize, d: usize) -> Array2<f64> {
        Array2::from_shape_fn((m, d), |_| rng.sample(StandardNormal))
    }

    #[test]
    fn single_agent_matches_centralized_proxgrad() {
        // m = 1 collapses Ł to 0 and M to 1: with r ≡ 0 the step is exactly
        // backtracked gradient descent, which is what the centralized
        // oracle runs.
        let s = 0.5f64.sqrt();
        let a = Array2::from_shape_vec((1, 1), vec![s]).unwrap();
        let loss = QuadraticRidgeLoss::new(a, Array1::from(vec![3.0 * s]), 0.0).unwrap();
        let prob =
            CompositeProblem::new(vec![Box::new(loss) as Box<dyn SmoothLoss>], Box::new(Zero))
                .unwrap();
        let mix = MixingMatrix::metropolis(Graph::complete(1).unwrap(), 1.0 / 3.0).unwrap();

        let mut state =
            ReferenceState::new(Array2::zeros((1, 1)), Array2::zeros((1, 1)), 10.0, &mix).unwrap();
        for _ in 0..20 {
            let (next, _) = davis_yin_reference_step(&state, &prob, 0.9).unwrap();
            state = next;
        }
        let oracle = centralized_proxgrad(&prob, 0.9, 0.0, 20).unwrap();
        assert!(
            (state.t_b1[[0, 0]] - oracle.x[0]).abs() <= 1e-12,
            "reference {} vs centralized {}",
            state.t_b1[[0, 0]],
            oracle.x[0]
        );
    }

    #[test]
    fn hundred_step_equivalence_with_global_variant() {
        let inst = gen_regression_instance(5, 4, 10, 0.0, 0.0, 0.1, 3).unwrap();
        let graph = Graph::erdos_renyi(5, 0.6, 7).unwrap();
        let mix = MixingMatrix::metropolis(graph, 1.0 / 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let x0 = randn(&mut rng, 5, 10);
        let s0 = randn(&mut rng, 5, 10);

        let mut g = GlobalState::new(x0.clone(), s0.clone(), 10.0).unwrap();
        let mut r = ReferenceState::new(x0, s0, 10.0, &mix).unwrap();
        for k in 0..100 {
            let (gn, _) = global_datos_step(&g, &inst.problem, &mix, 0.9).unwrap();
            let (rn, _) = davis_yin_reference_step(&r, &inst.problem, 0.9).unwrap();
            assert_eq!(gn.alpha_prev, rn.alpha_prev, "stepsize diverged at k={k}");

            let scale = 1.0 + gn.x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for (a, b) in gn.x.iter().zip(rn.t_b1.iter()) {
                assert!((a - b).abs() <= 1e-8 * scale, "X diverged at k={k}");
            }
            let sscale = 1.0 + gn.s.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for (a, b) in gn.s.iter().zip(rn.s1.iter()) {
                assert!((a - b).abs() <= 1e-8 * sscale, "S diverged at k={k}");
            }

            // Structural invariants of the stacked form.
            assert!(rn.t_b2.iter().all(|&v| v == 0.0));
            let my = rn.msqrt().dot(&rn.y);
            let s2_scale = 1.0 + rn.s2.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for (a, b) in rn.s2.iter().zip(my.iter()) {
                assert!((a + b).abs() <= 1e-10 * s2_scale, "S2 ≠ -M·Y at k={k}");
            }
            // D = Ł·Y tracks the gossip variant's D.
            let d_ref = rn.ell().dot(&rn.y);
            let dscale = 1.0 + gn.d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for (a, b) in gn.d.iter().zip(d_ref.iter()) {
                assert!((a - b).abs() <= 1e-8 * dscale, "D diverged at k={k}");
            }
            g = gn;
            r = rn;
        }
    }

    #[test]
    fn biased_square_roots_break_the_equivalence() {
        let inst = gen_regression_instance(5, 4, 10, 0.0, 0.0, 0.1, 3).unwrap();
        let graph = Graph::erdos_renyi(5, 0.6, 7).unwrap();
        let mix = MixingMatrix::metropolis(graph, 1.0 / 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let x0 = randn(&mut rng, 5, 10);
        let s0 = randn(&mut rng, 5, 10);

        let mut g = GlobalState::new(x0.clone(), s0.clone(), 10.0).unwrap();
        let mut r = ReferenceState::with_biased_roots(x0, s0, 10.0, &mix, 1e-3).unwrap();
        let mut max_diff = 0.0f64;
        for _ in 0..10 {
            let (gn, _) = global_datos_step(&g, &inst.problem, &mix, 0.9).unwrap();
            let (rn, _) = davis_yin_reference_step(&r, &inst.problem, 0.9).unwrap();
            for (a, b) in gn.x.iter().zip(rn.t_b1.iter()) {
                max_diff = max_diff.max((a - b).abs());
            }
            g = gn;
            r = rn;
        }
        assert!(max_diff > 1e-8, "fault injection had no visible effect ({max_diff:.3e})");
    }
}
