//! Shared nonsmooth terms and their proximal maps.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::linalg::sym_eig;

use super::logdet::{flatten, unflatten_sym};
use super::Regularizer;

/// `r(x) = λ ||x||₁`; prox is entrywise soft thresholding.
pub struct L1 {
    lambda: f64,
}

impl L1 {
    pub fn new(lambda: f64) -> Result<Self> {
        if lambda < 0.0 || !lambda.is_finite() {
            return Err(Error::Config(format!("l1 weight must be >= 0, got {lambda}")));
        }
        Ok(L1 { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

impl Regularizer for L1 {
    fn value(&self, x: ArrayView1<'_, f64>) -> f64 {
        self.lambda * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    fn prox(&self, x: ArrayView1<'_, f64>, alpha: f64) -> Array1<f64> {
        let t = alpha * self.lambda;
        x.mapv(|v| soft_threshold(v, t))
    }
}

/// Indicator of the spectral box `{X : a I ⪯ X ⪯ b I}` over flattened
/// symmetric `d x d` matrices. The prox (for every `α > 0`) is the metric
/// projection: symmetrize, eigendecompose, clamp eigenvalues into `[a, b]`,
/// reassemble.
pub struct SpectralBox {
    lower: f64,
    upper: f64,
    side: usize,
}

impl SpectralBox {
    pub fn new(lower: f64, upper: f64, side: usize) -> Result<Self> {
        if !(lower > 0.0 && lower.is_finite()) {
            return Err(Error::Config(format!(
                "spectral box lower bound must be positive, got {lower}"
            )));
        }
        if !(upper >= lower && upper.is_finite()) {
            return Err(Error::Config(format!(
                "spectral box upper bound must be >= lower bound, got [{lower}, {upper}]"
            )));
        }
        if side == 0 {
            return Err(Error::Config("spectral box needs side >= 1".into()));
        }
        Ok(SpectralBox { lower, upper, side })
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    // Membership slack: post-projection iterates sit on the boundary up to
    // eigensolver rounding, which must not read as +∞ objective.
    fn tol(&self) -> f64 {
        1e-9 * self.upper.max(1.0)
    }
}

impl Regularizer for SpectralBox {
    fn value(&self, x: ArrayView1<'_, f64>) -> f64 {
        assert_eq!(x.len(), self.side * self.side, "flattened length mismatch");
        if x.iter().any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        let mat = unflatten_sym(x, self.side);
        let Ok(eig) = sym_eig(mat.view()) else {
            return f64::INFINITY;
        };
        let tol = self.tol();
        let inside = eig
            .values
            .iter()
            .all(|&l| l >= self.lower - tol && l <= self.upper + tol);
        if inside {
            0.0
        } else {
            f64::INFINITY
        }
    }

    /// # Panics
    /// Panics when fed non-finite input; upstream divergence checks are
    /// expected to trip first.
    fn prox(&self, x: ArrayView1<'_, f64>, _alpha: f64) -> Array1<f64> {
        assert_eq!(x.len(), self.side * self.side, "flattened length mismatch");
        let mat = unflatten_sym(x, self.side);
        let eig = sym_eig(mat.view()).expect("spectral projection of non-finite matrix");
        let mut scaled = eig.vectors.clone();
        for k in 0..self.side {
            let clamped = eig.values[k].clamp(self.lower, self.upper);
            scaled.column_mut(k).mapv_inplace(|v| v * clamped);
        }
        let back = scaled.dot(&eig.vectors.t());
        // Kill rounding skew so projected points stay exactly symmetric.
        let backt = back.t().to_owned();
        flatten(&((&back + &backt) * 0.5))
    }
}

/// `r ≡ 0`; prox is the identity. Used by unconstrained instances and tests.
pub struct Zero;

impl Regularizer for Zero {
    fn value(&self, _x: ArrayView1<'_, f64>) -> f64 {
        0.0
    }

    fn prox(&self, x: ArrayView1<'_, f64>, _alpha: f64) -> Array1<f64> {
        x.to_owned()
    }
}
