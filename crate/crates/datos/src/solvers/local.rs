//! Neighborhood min-consensus variant: per-agent stepsizes λ_i.
//!
//! Differs from the global variant in three places: each agent seeds its
//! line search with its own previous stepsize, the min-consensus only
//! reaches the (closed) neighborhood, and the tracking update goes through
//! `D_Λ = (I − W)Λ^{-1}X` because a non-scalar Λ no longer commutes with
//! the mixing matrix.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::exec::{map_rows, stack_rows};
use crate::linesearch::backtrack;
use crate::mixing::MixingMatrix;
use crate::problems::CompositeProblem;

use super::{consensus_error, gossip, AlphaUsed, CommCounts, StepMetrics};

#[derive(Debug, Clone, Copy)]
pub struct LocalOptions {
    /// Take the stepsize min over `{i} ∪ N_i` (an agent never discards its
    /// own accepted stepsize). The printed update reads the open
    /// neighborhood; both are available, closed is the default.
    pub min_over_closed_neighborhood: bool,
    /// Use the S-update exactly as printed, `S⁺ = S + Λ^{-1}(X½ − X⁺ − D½)`.
    /// The default divides only the primal residual by λ_i — the form that
    /// reduces to the global update when Λ = αI.
    pub printed_s_update: bool,
}

impl Default for LocalOptions {
    fn default() -> Self {
        LocalOptions { min_over_closed_neighborhood: true, printed_s_update: false }
    }
}

#[derive(Debug, Clone)]
pub struct LocalState {
    pub x: Array2<f64>,
    pub s: Array2<f64>,
    pub d: Array2<f64>,
    /// Diagonal of Λ^{k−1}: each agent's previous stepsize, its next
    /// ladder seed.
    pub lambda_prev: Array1<f64>,
    pub k: u64,
}

impl LocalState {
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
        let m = x.nrows();
        let d = Array2::zeros(x.dim());
        Ok(LocalState {
            x,
            s,
            d,
            lambda_prev: Array1::from_elem(m, alpha_init),
            k: 0,
        })
    }
}

pub fn local_datos_step(
    state: &LocalState,
    prob: &CompositeProblem,
    mix: &MixingMatrix,
    delta: f64,
    opts: &LocalOptions,
) -> Result<(LocalState, StepMetrics)> {
    let m = prob.m();
    if state.x.nrows() != m || state.x.ncols() != prob.dim() || mix.m() != m {
        return Err(Error::Data(format!(
            "state is {}×{}, problem wants {}×{}, mixing matrix has {} agents",
            state.x.nrows(),
            state.x.ncols(),
            m,
            prob.dim(),
            mix.m()
        )));
    }
    let w = mix.w();
    let graph = mix.graph();

    // Same communication step as the global variant: two vector rounds.
    let x_half = gossip(w, &state.x);
    let grads = prob.grad_rows(&state.x);
    let d_half = gossip(w, &(&grads + &state.s + &state.d));

    // Each agent seeds with its own previous stepsize.
    let searches = map_rows(m, |i| {
        let dir = d_half.row(i).mapv(|v| -v);
        backtrack(
            state.lambda_prev[i],
            prob.loss(i),
            state.x.row(i),
            x_half.row(i),
            dir.view(),
            delta,
        )
    });
    let mut bar_alpha = Vec::with_capacity(m);
    let mut trials = Vec::with_capacity(m);
    for res in searches {
        let ls = res?;
        bar_alpha.push(ls.alpha);
        trials.push(ls.trials);
    }

    // Neighborhood min-consensus: one scalar round. A connected graph with
    // m ≥ 2 has no isolated vertex; for m = 1 the open reading would be a
    // min over nothing, so it falls back to the agent's own value.
    let lambda: Array1<f64> = (0..m)
        .map(|i| {
            let mut lo = if opts.min_over_closed_neighborhood {
                bar_alpha[i]
            } else {
                f64::INFINITY
            };
            for &j in graph.neighbors(i) {
                lo = lo.min(bar_alpha[j]);
            }
            if lo.is_finite() {
                lo
            } else {
                bar_alpha[i]
            }
        })
        .collect();

    // D_Λ = (I − W)Λ^{-1}X: neighbors already hold x_j from the first
    // round, so shipping the scalars λ_j is the only extra traffic.
    let scaled_rows = map_rows(m, |i| state.x.row(i).mapv(|v| v / lambda[i]));
    let scaled = stack_rows(prob.dim(), scaled_rows);
    let d_lambda = &scaled - &gossip(w, &scaled);

    // Per-row updates at stepsize λ_i; term order mirrors the global
    // variant so the complete-graph case collapses onto it bitwise.
    let rows = map_rows(m, |i| {
        let li = lambda[i];
        let arg = &(&x_half.row(i) - &(&d_half.row(i) * li)) + &(&state.s.row(i) * li);
        let x_new = prob.reg().prox(arg.view(), li);
        let s_new = if opts.printed_s_update {
            &state.s.row(i) + &(&(&(&x_half.row(i) - &x_new) - &d_half.row(i)) / li)
        } else {
            &(&state.s.row(i) + &(&(&x_half.row(i) - &x_new) / li)) - &d_half.row(i)
        };
        (x_new, s_new)
    });
    let mut x_rows = Vec::with_capacity(m);
    let mut s_rows = Vec::with_capacity(m);
    for (x_new, s_new) in rows {
        x_rows.push(x_new);
        s_rows.push(s_new);
    }
    let x_next = stack_rows(prob.dim(), x_rows);
    let s_next = stack_rows(prob.dim(), s_rows);
    let d_next = &(&(&d_half + &d_lambda) - &grads) - &state.s;

    let metrics = StepMetrics {
        alpha_used: AlphaUsed::PerAgent(lambda.to_vec()),
        linesearch_trials: trials,
        objective_per_agent: prob.objective_per_agent(&x_next),
        consensus_error: consensus_error(&x_next),
        comm: CommCounts { vector_rounds: 2, scalar_rounds: 2, broadcasts: 0 },
    };
    let next = LocalState {
        x: x_next,
        s: s_next,
        d: d_next,
        lambda_prev: lambda,
        k: state.k + 1,
    };
    Ok((next, metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::problems::{QuadraticRidgeLoss, SmoothLoss, Zero, L1};
    use crate::solvers::{global_datos_step, GlobalState};

    /// `f(x) = (L/2)(x − c)²` in one variable.
    /// `f(x) = (l/2)‖x − c·1‖²` in `dim` coordinates: the scale √(l·dim/2)
    /// cancels the 1/n row-averaging so the Hessian is `l·I` for any dim.
    fn curved(l: f64, c: f64, dim: usize) -> QuadraticRidgeLoss {
        let s = (l * dim as f64 / 2.0).sqrt();
        let a = Array2::from_diag_elem(dim, s);
        QuadraticRidgeLoss::new(a, Array1::from_elem(dim, c * s), 0.0).unwrap()
    }

    fn quadratic_problem(params: &[(f64, f64)], lambda_l1: f64, dim: usize) -> CompositeProblem {
        let losses: Vec<Box<dyn SmoothLoss>> = params
            .iter()
            .map(|&(l, c)| Box::new(curved(l, c, dim)) as Box<dyn SmoothLoss>)
            .collect();
        if lambda_l1 > 0.0 {
            CompositeProblem::new(losses, Box::new(L1::new(lambda_l1).unwrap())).unwrap()
        } else {
            CompositeProblem::new(losses, Box::new(Zero)).unwrap()
        }
    }

    fn hill_fill(m: usize, d: usize, phase: f64) -> Array2<f64> {
        Array2::from_shape_fn((m, d), |(i, j)| ((i * d + j) as f64 * 0.7 + phase).sin())
    }

    #[test]
    fn complete_graph_single_step_collapses_onto_global() {
        let prob = quadratic_problem(&[(1.0, 0.0), (2.0, 1.0), (0.5, -1.0), (3.0, 2.0)], 0.1, 1);
        let mix = MixingMatrix::metropolis(Graph::complete(4).unwrap(), 1.0 / 3.0).unwrap();
        let x0 = hill_fill(4, 1, 0.0);
        let s0 = hill_fill(4, 1, 1.3);
        let gstate = GlobalState::new(x0.clone(), s0.clone(), 10.0).unwrap();
        let lstate = LocalState::new(x0, s0, 10.0).unwrap();
        let (gn, _) = global_datos_step(&gstate, &prob, &mix, 0.9).unwrap();
        let (ln, _) = local_datos_step(&lstate, &prob, &mix, 0.9, &LocalOptions::default()).unwrap();
        // On a complete graph every closed neighborhood is the whole
        // network, so Λ collapses to the global min and X/S match bitwise;
        // D takes a different (equal in exact arithmetic) route.
        for i in 0..4 {
            assert_eq!(ln.lambda_prev[i], gn.alpha_prev);
            assert_eq!(ln.x[[i, 0]], gn.x[[i, 0]]);
            assert_eq!(ln.s[[i, 0]], gn.s[[i, 0]]);
            assert!((ln.d[[i, 0]] - gn.d[[i, 0]]).abs() <= 1e-12);
        }
    }

    #[test]
    fn scalar_lambda_reduces_to_global_update_on_sparse_graph() {
        // Seed small enough that every agent accepts its first candidate
        // (α ≤ δ/L_i for all i): then ᾱ_i = seed for all agents, the local
        // min equals the global min, and one step of each variant must
        // agree even though the graph is not complete.
        let prob = quadratic_problem(&[(1.0, 0.0), (2.0, 1.0), (0.5, -1.0), (3.0, 2.0)], 0.05, 1);
        let mix = MixingMatrix::metropolis(Graph::path(4).unwrap(), 1.0 / 3.0).unwrap();
        let x0 = hill_fill(4, 1, 0.4);
        let s0 = hill_fill(4, 1, 2.1);
        let alpha = 0.01; // < 0.9 / 3.0, the tightest bound
        let gstate = GlobalState::new(x0.clone(), s0.clone(), alpha).unwrap();
        let lstate = LocalState::new(x0, s0, alpha).unwrap();
        let (gn, gm) = global_datos_step(&gstate, &prob, &mix, 0.9).unwrap();
        let (ln, lm) = local_datos_step(&lstate, &prob, &mix, 0.9, &LocalOptions::default()).unwrap();
        assert_eq!(gm.linesearch_trials, vec![1; 4]);
        assert_eq!(lm.linesearch_trials, vec![1; 4]);
        for i in 0..4 {
            assert_eq!(ln.lambda_prev[i], alpha);
            assert!((ln.x[[i, 0]] - gn.x[[i, 0]]).abs() <= 1e-12);
            assert!((ln.s[[i, 0]] - gn.s[[i, 0]]).abs() <= 1e-12);
            assert!((ln.d[[i, 0]] - gn.d[[i, 0]]).abs() <= 1e-12);
        }
    }

    #[test]
    fn stepsize_minimum_propagates_along_a_path() {
        // Path 0–1–2–3; agent 3 has curvature 1e6, everyone else 1, so
        // agent 3's accepted stepsize is ~6e-7 while the rest sit at 0.625.
        // The small value must spread one hop per iteration.
        let prob = quadratic_problem(&[(1.0, 0.0), (1.0, 0.0), (1.0, 0.0), (1e6, 0.0)], 0.0, 1);
        let mix = MixingMatrix::metropolis(Graph::path(4).unwrap(), 1.0 / 3.0).unwrap();
        let x0 = Array2::ones((4, 1));
        let s0 = Array2::zeros((4, 1));
        let mut state = LocalState::new(x0, s0, 10.0).unwrap();
        let opts = LocalOptions::default();

        let (s1, _) = local_datos_step(&state, &prob, &mix, 0.9, &opts).unwrap();
        let tiny = s1.lambda_prev[3];
        let big = s1.lambda_prev[0];
        assert!(tiny < 1e-5 && big > 0.1);
        assert_eq!(s1.lambda_prev[1], big);
        assert_eq!(s1.lambda_prev[2], tiny); // neighbor of agent 3

        state = s1;
        let (s2, _) = local_datos_step(&state, &prob, &mix, 0.9, &opts).unwrap();
        assert_eq!(s2.lambda_prev.to_vec(), vec![big, tiny, tiny, tiny]);

        state = s2;
        let (s3, _) = local_datos_step(&state, &prob, &mix, 0.9, &opts).unwrap();
        assert_eq!(s3.lambda_prev.to_vec(), vec![tiny; 4]);

        state = s3;
        let (s4, _) = local_datos_step(&state, &prob, &mix, 0.9, &opts).unwrap();
        assert_eq!(s4.lambda_prev.to_vec(), vec![tiny; 4]);
    }

    #[test]
    fn open_neighborhood_can_discard_own_stepsize() {
        // Path 0–1–2 with the huge curvature in the middle: under the open
        // reading, agent 1 takes min(ᾱ_0, ᾱ_2) and ignores its own tiny ᾱ_1.
        let prob = quadratic_problem(&[(1.0, 0.0), (1e6, 0.0), (1.0, 0.0)], 0.0, 1);
        let mix = MixingMatrix::metropolis(Graph::path(3).unwrap(), 1.0 / 3.0).unwrap();
        let x0 = Array2::ones((3, 1));
        let s0 = Array2::zeros((3, 1));
        let state = LocalState::new(x0, s0, 10.0).unwrap();
        let closed = LocalOptions::default();
        let open = LocalOptions { min_over_closed_neighborhood: false, ..closed };
        let (sc, _) = local_datos_step(&state, &prob, &mix, 0.9, &closed).unwrap();
        let (so, _) = local_datos_step(&state, &prob, &mix, 0.9, &open).unwrap();
        assert!(sc.lambda_prev[1] < 1e-5);
        assert!(so.lambda_prev[1] > 0.1, "open reading ignores the center's own value");
        // The leaves see the tiny value either way.
        assert!(sc.lambda_prev[0] < 1e-5 && so.lambda_prev[0] < 1e-5);
    }

    #[test]
    fn printed_s_update_differs_by_the_documented_correction() {
        let prob = quadratic_problem(&[(1.0, 0.5), (4.0, -0.5), (2.0, 1.5)], 0.2, 2);
        let mix = MixingMatrix::metropolis(Graph::path(3).unwrap(), 1.0 / 3.0).unwrap();
        let x0 = hill_fill(3, 2, 0.9);
        let s0 = hill_fill(3, 2, 1.7);
        let state = LocalState::new(x0, s0, 10.0).unwrap();
        let default = LocalOptions::default();
        let printed = LocalOptions { printed_s_update: true, ..default };
        let (sd, _) = local_datos_step(&state, &prob, &mix, 0.9, &default).unwrap();
        let (sp, _) = local_datos_step(&state, &prob, &mix, 0.9, &printed).unwrap();
        // Identical X, Λ, D — the switch only reroutes the S-update, and
        // printed − default = (1 − 1/λ_i)·d½_i row-wise.
        assert_eq!(sd.x, sp.x);
        assert_eq!(sd.lambda_prev, sp.lambda_prev);
        let w = mix.w();
        let grads = prob.grad_rows(&state.x);
        let d_half = super::gossip(w, &(&grads + &state.s + &state.d));
        for i in 0..3 {
            let li = sd.lambda_prev[i];
            for j in 0..2 {
                let expect = (1.0 - 1.0 / li) * d_half[[i, j]];
                let got = sp.s[[i, j]] - sd.s[[i, j]];
                assert!((got - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
            }
        }
    }

    #[test]
    fn tracking_variable_keeps_zero_column_sums() {
        let prob = quadratic_problem(&[(1.0, 0.0), (2.0, 1.0), (0.5, -1.0), (3.0, 2.0)], 0.1, 2);
        let mix = MixingMatrix::metropolis(Graph::path(4).unwrap(), 1.0 / 3.0).unwrap();
        let mut state = LocalState::new(hill_fill(4, 2, 0.2), hill_fill(4, 2, 1.1), 10.0).unwrap();
        for _ in 0..25 {
            let (next, _) = local_datos_step(&state, &prob, &mix, 0.9, &LocalOptions::default()).unwrap();
            let scale = 1.0 + next.d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for j in 0..2 {
                assert!(next.d.column(j).sum().abs() <= 1e-10 * scale);
            }
            state = next;
        }
    }
}
