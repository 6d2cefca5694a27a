//! Small dense symmetric linear algebra.
//!
//! Everything here operates on matrices with at most a few hundred rows
//! (mixing matrices over the agent graph, covariance blocks with d <= 10),
//! so a self-contained cyclic Jacobi eigensolver and an unblocked Cholesky
//! are entirely adequate and keep the build free of external BLAS/LAPACK.

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

/// Off-diagonal Frobenius tolerance (relative to the input's Frobenius
/// norm) at which Jacobi sweeps stop.
const JACOBI_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 100;

pub struct SymEig {
    /// Eigenvalues in ascending order.
    pub values: Array1<f64>,
    /// Eigenvectors, column k paired with `values[k]`.
    pub vectors: Array2<f64>,
}

fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn off_diagonal_frobenius(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[[i, j]] * a[[i, j]];
            }
        }
    }
    s.sqrt()
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Sweeps rotate every (p, q) plane in row order until the off-diagonal
/// Frobenius norm falls below `1e-13 * max(1, ||A||_F)`. Input is read as
/// symmetric; only finite entries are accepted.
pub fn sym_eig(a: ArrayView2<f64>) -> Result<SymEig> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Numerical(format!(
            "sym_eig: expected square matrix, got {}x{}",
            n,
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "sym_eig: non-finite entry in input".into(),
        ));
    }

    let mut a = a.to_owned();
    let mut v: Array2<f64> = Array2::eye(n);
    let scale = frobenius(&a).max(1.0);

    if n > 1 {
        let mut converged = false;
        for _ in 0..JACOBI_MAX_SWEEPS {
            if off_diagonal_frobenius(&a) <= JACOBI_TOL * scale {
                converged = true;
                break;
            }
            for p in 0..n - 1 {
                for q in p + 1..n {
                    let apq = a[[p, q]];
                    if apq == 0.0 {
                        continue;
                    }
                    // Rotation angle zeroing a[p,q]; hypot keeps theta^2
                    // from overflowing.
                    let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                    let c = 1.0 / t.hypot(1.0);
                    let s = t * c;

                    for i in 0..n {
                        let aip = a[[i, p]];
                        let aiq = a[[i, q]];
                        a[[i, p]] = c * aip - s * aiq;
                        a[[i, q]] = s * aip + c * aiq;
                    }
                    for i in 0..n {
                        let api = a[[p, i]];
                        let aqi = a[[q, i]];
                        a[[p, i]] = c * api - s * aqi;
                        a[[q, i]] = s * api + c * aqi;
                    }
                    a[[p, q]] = 0.0;
                    a[[q, p]] = 0.0;
                    for i in 0..n {
                        let vip = v[[i, p]];
                        let viq = v[[i, q]];
                        v[[i, p]] = c * vip - s * viq;
                        v[[i, q]] = s * vip + c * viq;
                    }
                }
            }
        }
        if !converged && off_diagonal_frobenius(&a) > JACOBI_TOL * scale {
            return Err(Error::Numerical(
                "sym_eig: Jacobi sweeps did not converge".into(),
            ));
        }
    }

    // Sort eigenpairs ascending.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[i, i]].partial_cmp(&a[[j, j]]).unwrap());
    let values = Array1::from_iter(order.iter().map(|&i| a[[i, i]]));
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vectors.column_mut(dst).assign(&v.column(src));
    }
    Ok(SymEig { values, vectors })
}

/// Symmetric positive semidefinite square root via eigendecomposition.
///
/// Eigenvalues in [-1e-12, 0) are rounding residue and are clamped to zero;
/// anything more negative means the input was not PSD and is an error.
pub fn sym_sqrt_psd(a: ArrayView2<f64>) -> Result<Array2<f64>> {
    sqrt_from_eig(sym_eig(a)?, 0.0)
}

/// Fault-injection variant used only by the self-test machinery: biases
/// every eigenvalue by `bias` before taking square roots, modelling a broken
/// clamp in the PSD square root. Never use outside diagnostics.
pub fn sym_sqrt_psd_biased(a: ArrayView2<f64>, bias: f64) -> Result<Array2<f64>> {
    sqrt_from_eig(sym_eig(a)?, bias)
}

fn sqrt_from_eig(eig: SymEig, bias: f64) -> Result<Array2<f64>> {
    let n = eig.values.len();
    let mut roots = Array1::zeros(n);
    for (k, &lam) in eig.values.iter().enumerate() {
        let lam = lam + bias;
        if lam < -1e-12 {
            return Err(Error::Numerical(format!(
                "matrix square root: eigenvalue {lam:.3e} below PSD tolerance"
            )));
        }
        roots[k] = lam.max(0.0).sqrt();
    }
    // V diag(sqrt(lambda)) V^T
    let mut scaled = eig.vectors.clone();
    for k in 0..n {
        let r = roots[k];
        scaled.column_mut(k).mapv_inplace(|x| x * r);
    }
    Ok(scaled.dot(&eig.vectors.t()))
}

/// Unblocked Cholesky factorization A = L L^T; `None` when A is not
/// (numerically) positive definite.
pub fn cholesky(a: ArrayView2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return None;
    }
    let mut l: Array2<f64> = Array2::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= l[[j, k]] * l[[j, k]];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let root = d.sqrt();
        l[[j, j]] = root;
        for i in j + 1..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / root;
        }
    }
    Some(l)
}

/// log det A from its Cholesky factor.
pub fn chol_logdet(l: &Array2<f64>) -> f64 {
    2.0 * (0..l.nrows()).map(|j| l[[j, j]].ln()).sum::<f64>()
}

/// A^{-1} from the Cholesky factor of A, by solving against unit vectors.
pub fn chol_inverse(l: &Array2<f64>) -> Array2<f64> {
    let n = l.nrows();
    let mut inv = Array2::zeros((n, n));
    let mut e = Array1::zeros(n);
    for col in 0..n {
        e.fill(0.0);
        e[col] = 1.0;
        let x = chol_solve(l, &e);
        inv.column_mut(col).assign(&x);
    }
    // Symmetrize away the rounding skew from column-wise solves.
    let invt = inv.t().to_owned();
    (&inv + &invt) * 0.5
}

/// Solves A x = b given A = L L^T.
pub fn chol_solve(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    let mut y = Array1::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    let mut x = Array1::zeros(n);
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Largest eigenvalue of a symmetric PSD operator given only its action,
/// by plain power iteration from a seeded start vector.
pub fn largest_eigenvalue<F>(dim: usize, iters: usize, seed: u64, apply: F) -> f64
where
    F: Fn(&Array1<f64>) -> Array1<f64>,
{
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut v = Array1::from_shape_fn(dim, |_| rng.gen::<f64>() - 0.5);
    let mut norm = v.dot(&v).sqrt();
    if norm == 0.0 {
        v[0] = 1.0;
        norm = 1.0;
    }
    v.mapv_inplace(|x| x / norm);
    let mut lambda = 0.0;
    for _ in 0..iters {
        let w = apply(&v);
        lambda = v.dot(&w);
        let n = w.dot(&w).sqrt();
        if n == 0.0 {
            return 0.0;
        }
        v = w.mapv(|x| x / n);
    }
    lambda
}
