//! Gaussian covariance-estimation loss over flattened symmetric matrices.
//!
//! The variable is a `d x d` matrix X embedded in R^{d²} (row-major
//! flattening); value and gradient symmetrize their input, so off-symmetric
//! perturbations are averaged rather than rejected. With scatter block
//! `Y = (1/n) Σ_j y_j y_jᵀ` the loss is
//!
//!   f(X) = -n log det X - trace(X Y)        (sign as printed)
//!   f(X) = -n log det X + trace(X Y)        (conventional MLE sign)
//!
//! selected at construction. The effective domain is the positive definite
//! cone; membership is decided by a Cholesky attempt.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::linalg::{chol_inverse, chol_logdet, cholesky};

use super::SmoothLoss;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceSign {
    /// `- trace(X Y)`, the form used by the experiments here.
    AsPrinted,
    /// `+ trace(X Y)`, the textbook negative log-likelihood.
    Conventional,
}

pub struct LogDetLoss {
    scatter: Array2<f64>,
    n: f64,
    side: usize,
    sign: TraceSign,
}

pub(crate) fn unflatten_sym(x: ArrayView1<'_, f64>, side: usize) -> Array2<f64> {
    let raw = Array2::from_shape_vec((side, side), x.to_vec()).expect("length checked by caller");
    let rawt = raw.t().to_owned();
    (&raw + &rawt) * 0.5
}

pub(crate) fn flatten(mat: &Array2<f64>) -> Array1<f64> {
    Array1::from_iter(mat.iter().cloned())
}

impl LogDetLoss {
    pub fn new(scatter: Array2<f64>, n: f64, sign: TraceSign) -> Result<Self> {
        let side = scatter.nrows();
        if side == 0 || scatter.ncols() != side {
            return Err(Error::Data(format!(
                "scatter block must be square and nonempty, got {}x{}",
                scatter.nrows(),
                scatter.ncols()
            )));
        }
        if n <= 0.0 || !n.is_finite() {
            return Err(Error::Data(format!("sample weight n must be positive, got {n}")));
        }
        let mut sym = scatter;
        let symt = sym.t().to_owned();
        sym = (&sym + &symt) * 0.5;
        Ok(LogDetLoss {
            scatter: sym,
            n,
            side,
            sign,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn scatter(&self) -> &Array2<f64> {
        &self.scatter
    }

    fn trace_sign(&self) -> f64 {
        match self.sign {
            TraceSign::AsPrinted => -1.0,
            TraceSign::Conventional => 1.0,
        }
    }
}

impl SmoothLoss for LogDetLoss {
    fn dim(&self) -> usize {
        self.side * self.side
    }

    fn value(&self, x: ArrayView1<'_, f64>) -> f64 {
        if x.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        let mat = unflatten_sym(x, self.side);
        let Some(l) = cholesky(mat.view()) else {
            return f64::INFINITY;
        };
        let trace: f64 = (&mat * &self.scatter).sum();
        -self.n * chol_logdet(&l) + self.trace_sign() * trace
    }

    fn gradient(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let mat = unflatten_sym(x, self.side);
        let l = cholesky(mat.view())
            .expect("gradient requested outside the positive definite cone");
        let inv = chol_inverse(&l);
        let g = inv * (-self.n) + &(self.scatter.clone() * self.trace_sign());
        flatten(&g)
    }

    fn in_domain(&self, x: ArrayView1<'_, f64>) -> bool {
        if x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        cholesky(unflatten_sym(x, self.side).view()).is_some()
    }
}
