//! Row-indexed dispatch for per-agent work.
//!
//! Every per-agent computation in the crate (gradients, line searches,
//! proximal maps, objective scans) is a pure function of the agent index.
//! [`map_rows`] runs those tasks on the rayon pool when the `parallel`
//! feature is enabled, and as a plain loop otherwise. Results are collected
//! in index order in both cases, and no task carries mutable shared state,
//! so output bytes do not depend on the schedule or on the pool size.

use ndarray::{Array1, Array2};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub fn map_rows<T, F>(m: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        (0..m).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..m).map(f).collect()
    }
}

/// Sequential twin of [`map_rows`], available under any feature set. Used as
/// the benchmark baseline and by callers that must stay off the pool.
pub fn map_rows_seq<T, F>(m: usize, mut f: F) -> Vec<T>
where
    F: FnMut(usize) -> T,
{
    (0..m).map(&mut f).collect()
}

/// Assembles per-row results from [`map_rows`] into an `m x d` matrix.
///
/// # Panics
/// Panics if any row has length other than `d`.
pub fn stack_rows(d: usize, rows: Vec<Array1<f64>>) -> Array2<f64> {
    let m = rows.len();
    let mut out = Array2::zeros((m, d));
    for (i, row) in rows.into_iter().enumerate() {
        assert_eq!(row.len(), d, "row {i} has wrong length");
        out.row_mut(i).assign(&row);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_rows_preserves_index_order() {
        let out = map_rows(64, |i| i * i);
        assert_eq!(out, (0..64).map(|i| i * i).collect::<Vec<_>>());
        assert_eq!(out, map_rows_seq(64, |i| i * i));
    }

    #[test]
    fn stack_rows_assembles_in_order() {
        let rows = vec![
            Array1::from(vec![1.0, 2.0]),
            Array1::from(vec![3.0, 4.0]),
        ];
        let m = stack_rows(2, rows);
        assert_eq!(m[[0, 1]], 2.0);
        assert_eq!(m[[1, 0]], 3.0);
    }
}
