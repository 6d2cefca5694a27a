//! Gossip mixing matrices over a communication graph.
//!
//! A compliant weight matrix `W~` is symmetric, doubly stochastic, has a
//! strictly positive diagonal, and is supported exactly on the graph edges.
//! The solvers use the damped matrix `W = (1 - c) I + c W~` with
//! `c ∈ (0, 1/2)`, which keeps `W` positive definite: every eigenvalue of a
//! compliant `W~` lies in [-1, 1], so eigenvalues of `W` lie in
//! `[1 - 2c, 1]` with the top eigenvalue 1 attained on the consensus vector.

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Metropolis–Hastings weights: `w~_ij = 1 / (1 + max(deg i, deg j))` on
/// edges, diagonal filled to make each row sum to one. Symmetric and doubly
/// stochastic by construction; the result is a pure function of the graph.
pub fn metropolis_weights(g: &Graph) -> Array2<f64> {
    let m = g.vertex_count();
    let mut wt = Array2::zeros((m, m));
    for i in 0..m {
        let mut row_sum = 0.0;
        for &j in g.neighbors(i) {
            let w = 1.0 / (1.0 + g.degree(i).max(g.degree(j)) as f64);
            wt[[i, j]] = w;
            row_sum += w;
        }
        wt[[i, i]] = 1.0 - row_sum;
    }
    wt
}

#[derive(Clone, Debug)]
pub struct MixingMatrix {
    graph: Graph,
    w_tilde: Array2<f64>,
    w: Array2<f64>,
    c: f64,
}

impl MixingMatrix {
    /// Metropolis weights for `graph`, damped by `c`.
    pub fn metropolis(graph: Graph, c: f64) -> Result<Self> {
        let wt = metropolis_weights(&graph);
        Self::from_weights(graph, wt, c)
    }

    /// Wraps a caller-supplied weight matrix after checking compliance:
    /// square of matching size, symmetric, rows summing to one, positive
    /// diagonal, and support exactly on the graph edges.
    pub fn from_weights(graph: Graph, w_tilde: Array2<f64>, c: f64) -> Result<Self> {
        if !(c > 0.0 && c < 0.5) {
            return Err(Error::Config(format!(
                "mixing constant c must lie in the open interval (0, 1/2), got {c}"
            )));
        }
        let m = graph.vertex_count();
        if w_tilde.nrows() != m || w_tilde.ncols() != m {
            return Err(Error::Config(format!(
                "weight matrix is {}x{}, graph has {m} vertices",
                w_tilde.nrows(),
                w_tilde.ncols()
            )));
        }
        for i in 0..m {
            let mut row_sum = 0.0;
            for j in 0..m {
                let v = w_tilde[[i, j]];
                if !v.is_finite() {
                    return Err(Error::Config(format!("non-finite weight at ({i}, {j})")));
                }
                if (v - w_tilde[[j, i]]).abs() > 1e-12 {
                    return Err(Error::Config(format!("weights not symmetric at ({i}, {j})")));
                }
                if i != j {
                    let is_edge = graph.neighbors(i).binary_search(&j).is_ok();
                    if is_edge && v <= 0.0 {
                        return Err(Error::Config(format!(
                            "edge ({i}, {j}) must carry positive weight"
                        )));
                    }
                    if !is_edge && v != 0.0 {
                        return Err(Error::Config(format!(
                            "nonzero weight on non-edge ({i}, {j})"
                        )));
                    }
                }
                row_sum += v;
            }
            if (row_sum - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!(
                    "row {i} sums to {row_sum}, expected 1"
                )));
            }
            if w_tilde[[i, i]] <= 0.0 {
                return Err(Error::Config(format!("diagonal weight at {i} must be positive")));
            }
        }
        let mut w = w_tilde.mapv(|v| c * v);
        for i in 0..m {
            w[[i, i]] += 1.0 - c;
        }
        Ok(MixingMatrix {
            graph,
            w_tilde,
            w,
            c,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn m(&self) -> usize {
        self.graph.vertex_count()
    }

    /// The damped matrix `W = (1 - c) I + c W~`.
    pub fn w(&self) -> ArrayView2<'_, f64> {
        self.w.view()
    }

    pub fn w_tilde(&self) -> ArrayView2<'_, f64> {
        self.w_tilde.view()
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eig;

    #[test]
    fn path_of_three_gives_exact_thirds() {
        let g = Graph::path(3).unwrap();
        let wt = metropolis_weights(&g);
        let third = 1.0 / 3.0;
        assert_eq!(wt[[0, 1]], third);
        assert_eq!(wt[[1, 0]], third);
        assert_eq!(wt[[1, 2]], third);
        assert_eq!(wt[[0, 2]], 0.0);
        // Diagonals are 1 − Σ off-diagonal, at most a rounding away from
        // the closed forms 2/3 and 1/3.
        assert!((wt[[0, 0]] - 2.0 * third).abs() < 1e-15);
        assert!((wt[[1, 1]] - third).abs() < 1e-15);
    }

    #[test]
    fn two_vertex_complete_gives_halves() {
        let g = Graph::complete(2).unwrap();
        let wt = metropolis_weights(&g);
        assert_eq!(wt[[0, 1]], 0.5);
        assert_eq!(wt[[0, 0]], 0.5);
    }

    #[test]
    fn single_vertex_is_identity() {
        let g = Graph::new(1, []).unwrap();
        let wt = metropolis_weights(&g);
        assert_eq!(wt[[0, 0]], 1.0);
        let mix = MixingMatrix::metropolis(g, 0.25).unwrap();
        assert_eq!(mix.w()[[0, 0]], 1.0);
    }

    #[test]
    fn damped_path_matches_affine_combination() {
        // W = (2/3) I + (1/3) W~ on the 3-path: diagonal (8/9, 7/9, 8/9),
        // off-diagonal 1/9 on edges. Verified entrywise against a direct
        // affine-combination evaluation done by hand.
        let g = Graph::path(3).unwrap();
        let mix = MixingMatrix::metropolis(g, 1.0 / 3.0).unwrap();
        let w = mix.w();
        assert!((w[[0, 0]] - 8.0 / 9.0).abs() < 1e-15);
        assert!((w[[1, 1]] - 7.0 / 9.0).abs() < 1e-15);
        assert!((w[[2, 2]] - 8.0 / 9.0).abs() < 1e-15);
        assert!((w[[0, 1]] - 1.0 / 9.0).abs() < 1e-15);
        assert_eq!(w[[0, 2]], 0.0);

        // Positive definiteness with margin 1 - 2c = 1/3, independently of
        // the eigensolver: Sylvester's criterion on W - (1/3) I.
        let shifted = w.to_owned() - Array2::<f64>::eye(3) * (1.0 / 3.0);
        let m1 = shifted[[0, 0]];
        let m2 = shifted[[0, 0]] * shifted[[1, 1]] - shifted[[0, 1]] * shifted[[1, 0]];
        let m3 = det3(&shifted);
        assert!(m1 > 0.0 && m2 > 0.0 && m3 > 0.0);
    }

    fn det3(a: &Array2<f64>) -> f64 {
        a[[0, 0]] * (a[[1, 1]] * a[[2, 2]] - a[[1, 2]] * a[[2, 1]])
            - a[[0, 1]] * (a[[1, 0]] * a[[2, 2]] - a[[1, 2]] * a[[2, 0]])
            + a[[0, 2]] * (a[[1, 0]] * a[[2, 1]] - a[[1, 1]] * a[[2, 0]])
    }

    #[test]
    fn compliance_invariants_hold_on_random_graphs() {
        for (m, p, seed) in [(6usize, 0.4, 1u64), (12, 0.3, 2), (20, 0.15, 3)] {
            let g = Graph::erdos_renyi(m, p, seed).unwrap();
            let c = 1.0 / 3.0;
            let mix = MixingMatrix::metropolis(g, c).unwrap();
            let w = mix.w();
            // Double stochasticity: independent row/column summation.
            for i in 0..m {
                let row: f64 = (0..m).map(|j| w[[i, j]]).sum();
                let col: f64 = (0..m).map(|j| w[[j, i]]).sum();
                assert!((row - 1.0).abs() < 1e-12, "row {i}");
                assert!((col - 1.0).abs() < 1e-12, "col {i}");
            }
            // Symmetry.
            for i in 0..m {
                for j in 0..m {
                    assert!((w[[i, j]] - w[[j, i]]).abs() < 1e-14);
                }
            }
            // Spectral floor 1 - 2c, checked through the eigensolver.
            let eig = sym_eig(w).unwrap();
            assert!(
                eig.values[0] >= 1.0 - 2.0 * c - 1e-10,
                "min eigenvalue {} below floor",
                eig.values[0]
            );
            assert!(eig.values[m - 1] <= 1.0 + 1e-10);
            // I - W has zero row sums (gossip conserves averages).
            for i in 0..m {
                let row: f64 = (0..m).map(|j| {
                    let e = if i == j { 1.0 } else { 0.0 };
                    e - w[[i, j]]
                })
                .sum();
                assert!(row.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn metropolis_is_a_pure_function_of_the_graph() {
        // Same graph assembled with different edge orderings must produce
        // bitwise-identical weights.
        let e1 = vec![(0, 1), (1, 2), (2, 3), (0, 3), (1, 3)];
        let mut e2 = e1.clone();
        e2.reverse();
        e2.swap(0, 2);
        let g1 = Graph::new(4, e1).unwrap();
        let g2 = Graph::new(4, e2.into_iter().map(|(a, b)| (b, a))).unwrap();
        let w1 = metropolis_weights(&g1);
        let w2 = metropolis_weights(&g2);
        assert_eq!(w1.as_slice().unwrap(), w2.as_slice().unwrap());
    }

    #[test]
    fn damping_constant_range_is_enforced() {
        let g = Graph::complete(3).unwrap();
        for c in [0.0, 0.5, -0.1, 0.7, f64::NAN] {
            assert!(MixingMatrix::metropolis(g.clone(), c).is_err(), "c = {c}");
        }
        assert!(MixingMatrix::metropolis(g, 0.49999).is_ok());
    }

    #[test]
    fn from_weights_rejects_non_compliant_matrices() {
        let g = Graph::path(3).unwrap();
        // Support off the edge set.
        let mut bad = metropolis_weights(&Graph::path(3).unwrap());
        bad[[0, 2]] = 0.1;
        bad[[2, 0]] = 0.1;
        bad[[0, 0]] -= 0.1;
        bad[[2, 2]] -= 0.1;
        assert!(MixingMatrix::from_weights(g.clone(), bad, 0.3).is_err());
        // Rows not stochastic.
        let mut bad = metropolis_weights(&Graph::path(3).unwrap());
        bad[[1, 1]] += 0.25;
        assert!(MixingMatrix::from_weights(g, bad, 0.3).is_err());
    }
}
