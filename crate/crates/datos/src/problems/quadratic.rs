//! Least squares with ridge: `f(x) = (1/n) ||A x - b||² + (γ/2) ||x||²`.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::linalg::largest_eigenvalue;

use super::SmoothLoss;

pub struct QuadraticRidgeLoss {
    a: Array2<f64>,
    b: Array1<f64>,
    gamma: f64,
}

impl QuadraticRidgeLoss {
    pub fn new(a: Array2<f64>, b: Array1<f64>, gamma: f64) -> Result<Self> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(Error::Data("quadratic loss needs a nonempty matrix".into()));
        }
        if b.len() != a.nrows() {
            return Err(Error::Data(format!(
                "rhs has {} entries, matrix has {} rows",
                b.len(),
                a.nrows()
            )));
        }
        if gamma < 0.0 || !gamma.is_finite() {
            return Err(Error::Data(format!("ridge weight must be >= 0, got {gamma}")));
        }
        Ok(QuadraticRidgeLoss { a, b, gamma })
    }

    pub fn samples(&self) -> usize {
        self.a.nrows()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Gradient Lipschitz constant `λ_max((2/n) AᵀA) + γ`, estimated by
    /// power iteration on the Gram operator.
    pub fn lipschitz(&self) -> f64 {
        let n = self.a.nrows() as f64;
        let top = largest_eigenvalue(self.a.ncols(), 300, 0x9e3779b9, |v| {
            let av = self.a.dot(v);
            self.a.t().dot(&av) * (2.0 / n)
        });
        top + self.gamma
    }
}

impl SmoothLoss for QuadraticRidgeLoss {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn value(&self, x: ArrayView1<'_, f64>) -> f64 {
        let r = self.a.dot(&x) - &self.b;
        let n = self.a.nrows() as f64;
        r.dot(&r) / n + 0.5 * self.gamma * x.dot(&x)
    }

    fn gradient(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let r = self.a.dot(&x) - &self.b;
        let n = self.a.nrows() as f64;
        self.a.t().dot(&r) * (2.0 / n) + &(x.to_owned() * self.gamma)
    }
}
