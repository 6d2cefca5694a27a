//! Solver steps over a simulated synchronous gossip network.
//!
//! Each step function is pure: it takes the current state by reference and
//! returns the next state plus per-step metrics. Iterations are strictly
//! sequential; within a step, per-agent work (gradients, line searches,
//! proximal maps) fans out through [`map_rows`](crate::exec::map_rows) and
//! is therefore safe to parallelize without changing results.

mod centralized;
mod global;
mod local;
mod pg_extra;
mod reference;

pub use centralized::{centralized_proxgrad, kkt_residual, OracleOutcome};
pub use global::{global_datos_step, GlobalState};
pub use local::{local_datos_step, LocalOptions, LocalState};
pub use pg_extra::{pg_extra_init, pg_extra_step, PgExtraState};
pub use reference::{davis_yin_reference_step, ReferenceState};

use ndarray::{Array1, Array2, ArrayView2};

use crate::exec::{map_rows, stack_rows};

/// Network traffic accrued by one step: vector rounds move one `d`-vector
/// per agent over each edge, scalar rounds one scalar, broadcasts one
/// scalar network-wide (the min-consensus channel).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CommCounts {
    pub vector_rounds: u64,
    pub scalar_rounds: u64,
    pub broadcasts: u64,
}

/// Stepsize actually applied: one shared scalar, or one entry per agent
/// for the local-min variant.
#[derive(Debug, Clone)]
pub enum AlphaUsed {
    Shared(f64),
    PerAgent(Vec<f64>),
}

impl AlphaUsed {
    pub fn min(&self) -> f64 {
        match self {
            AlphaUsed::Shared(a) => *a,
            AlphaUsed::PerAgent(v) => v.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            AlphaUsed::Shared(a) => *a,
            AlphaUsed::PerAgent(v) => v.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepMetrics {
    pub alpha_used: AlphaUsed,
    /// Line-search candidates evaluated per agent this step (zeros for
    /// fixed-step baselines).
    pub linesearch_trials: Vec<u32>,
    /// `u(x_i)` at each agent's new row.
    pub objective_per_agent: Vec<f64>,
    pub consensus_error: f64,
    pub comm: CommCounts,
}

/// One synchronous exchange: row `i` of the result is `Σ_j W_ij · rows_j`.
///
/// Exact zero weights are skipped, so each row touches exactly its closed
/// neighborhood; the inner sum runs in ascending agent order. That fixed
/// order is part of the determinism contract — results are bit-identical
/// under any parallel schedule of the outer rows.
pub(crate) fn gossip(w: ArrayView2<'_, f64>, rows: &Array2<f64>) -> Array2<f64> {
    assert_eq!(w.ncols(), rows.nrows(), "gossip shape mismatch");
    let m = w.nrows();
    let d = rows.ncols();
    let out = map_rows(m, |i| {
        let mut acc = Array1::<f64>::zeros(d);
        for j in 0..m {
            let wij = w[[i, j]];
            if wij != 0.0 {
                acc.scaled_add(wij, &rows.row(j));
            }
        }
        acc
    });
    stack_rows(d, out)
}

/// `‖X − 1·x̄ᵀ‖_F` where `x̄` is the column-mean vector: zero exactly when
/// all agents agree.
pub fn consensus_error(x: &Array2<f64>) -> f64 {
    let m = x.nrows() as f64;
    let mut total = 0.0;
    for j in 0..x.ncols() {
        let col = x.column(j);
        let mean = col.sum() / m;
        for &v in col {
            let dv = v - mean;
            total += dv * dv;
        }
    }
    total.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gossip_matches_dense_product() {
        let w = array![[0.5, 0.25, 0.25], [0.25, 0.75, 0.0], [0.25, 0.0, 0.75]];
        let x = array![[1.0, 2.0], [3.0, -1.0], [0.0, 4.0]];
        let got = gossip(w.view(), &x);
        let want = w.dot(&x);
        for (a, b) in got.iter().zip(want.iter()) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn consensus_error_on_agreeing_rows_is_zero() {
        let x = array![[1.0, -2.0], [1.0, -2.0], [1.0, -2.0]];
        assert_eq!(consensus_error(&x), 0.0);
    }

    #[test]
    fn consensus_error_hand_case() {
        // rows 0 and 2, column mean 1, deviations ∓1 → √2.
        let x = array![[0.0], [2.0]];
        assert!((consensus_error(&x) - 2.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn consensus_error_matches_two_pass_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Array2::from_shape_fn((7, 4), |_| rng.gen::<f64>() * 4.0 - 2.0);
        // Independent route: per-column population variance times m,
        // summed, square-rooted.
        let m = 7.0;
        let mut acc = 0.0;
        for j in 0..4 {
            let col = x.column(j);
            let mean = col.sum() / m;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m;
            acc += m * var;
        }
        assert!((consensus_error(&x) - acc.sqrt()).abs() <= 1e-12);
    }
}
