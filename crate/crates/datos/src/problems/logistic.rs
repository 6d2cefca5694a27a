//! Binary logistic loss over sparse samples.
//!
//! `f(x) = (1/n) Σ_j log(1 + exp(-b_j ⟨x, a_j⟩))` with labels `b_j ∈ {-1, +1}`.
//! Values and gradients are computed through `log1p`/shifted forms so that
//! margins of either sign stay finite far beyond |t| = 700.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};

use super::{Dataset, SmoothLoss};

pub struct LogisticLoss {
    // Sparse rows: (feature index, value), indices ascending.
    rows: Vec<Vec<(usize, f64)>>,
    labels: Vec<f64>,
    dim: usize,
}

/// log(1 + e^t) without overflow for large |t|.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// σ(t) = 1 / (1 + e^{-t}), evaluated from the side that cannot overflow.
fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl LogisticLoss {
    pub fn new(rows: Vec<Vec<(usize, f64)>>, labels: Vec<f64>, dim: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Data("logistic loss needs at least one sample".into()));
        }
        if rows.len() != labels.len() {
            return Err(Error::Data(format!(
                "{} samples but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        for (j, label) in labels.iter().enumerate() {
            if *label != 1.0 && *label != -1.0 {
                return Err(Error::Data(format!(
                    "sample {j}: label {label} is not in {{-1, +1}}"
                )));
            }
        }
        for (j, row) in rows.iter().enumerate() {
            for &(idx, v) in row {
                if idx >= dim {
                    return Err(Error::Data(format!(
                        "sample {j}: feature index {idx} out of range for dimension {dim}"
                    )));
                }
                if !v.is_finite() {
                    return Err(Error::Data(format!("sample {j}: non-finite feature value")));
                }
            }
        }
        Ok(LogisticLoss { rows, labels, dim })
    }

    pub fn from_dataset(ds: &Dataset) -> Result<Self> {
        let rows = ds.samples.iter().map(|s| s.features.clone()).collect();
        let labels = ds.samples.iter().map(|s| s.label).collect();
        LogisticLoss::new(rows, labels, ds.dim)
    }

    pub fn from_dense(a: &Array2<f64>, labels: Vec<f64>) -> Result<Self> {
        let rows = a
            .rows()
            .into_iter()
            .map(|r| r.iter().cloned().enumerate().collect())
            .collect();
        LogisticLoss::new(rows, labels, a.ncols())
    }

    pub fn samples(&self) -> usize {
        self.rows.len()
    }

    fn margin(&self, j: usize, x: ArrayView1<'_, f64>) -> f64 {
        self.rows[j].iter().map(|&(idx, v)| v * x[idx]).sum()
    }
}

impl SmoothLoss for LogisticLoss {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: ArrayView1<'_, f64>) -> f64 {
        let n = self.rows.len() as f64;
        let mut s = 0.0;
        for j in 0..self.rows.len() {
            s += softplus(-self.labels[j] * self.margin(j, x));
        }
        s / n
    }

    fn gradient(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let n = self.rows.len() as f64;
        let mut g = Array1::zeros(self.dim);
        for j in 0..self.rows.len() {
            let b = self.labels[j];
            let coeff = -b * sigmoid(-b * self.margin(j, x)) / n;
            for &(idx, v) in &self.rows[j] {
                g[idx] += coeff * v;
            }
        }
        g
    }
}
