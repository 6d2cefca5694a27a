//! Composite problem instances: per-agent smooth losses plus one shared
//! nonsmooth regularizer.
//!
//! The network objective is `u(x) = (1/m) Σ_i f_i(x) + r(x)` where each
//! `f_i` is convex and smooth on its effective domain and `r` is convex
//! with an inexpensive proximal map. Losses report `+∞` outside their
//! domain, which is how the line search detects and rejects infeasible
//! candidates.

mod libsvm;
mod logdet;
mod logistic;
mod quadratic;
mod regularizers;
mod synth;

pub use libsvm::{parse_libsvm, partition_dataset, read_libsvm_file, serialize_libsvm, Dataset, Partition, Sample};
pub use logdet::{LogDetLoss, TraceSign};
pub use logistic::LogisticLoss;
pub use quadratic::QuadraticRidgeLoss;
pub use regularizers::{L1, SpectralBox, Zero};
pub use synth::{
    gen_covariance_instance, gen_logistic_instance, gen_regression_instance, random_spd,
    RegressionInstance,
};

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::exec::{map_rows, stack_rows};

pub trait SmoothLoss: Send + Sync {
    fn dim(&self) -> usize;

    /// Loss value; `+∞` outside the effective domain.
    fn value(&self, x: ArrayView1<'_, f64>) -> f64;

    /// Gradient; callers only evaluate it where [`value`](Self::value) is
    /// finite.
    fn gradient(&self, x: ArrayView1<'_, f64>) -> Array1<f64>;

    fn in_domain(&self, x: ArrayView1<'_, f64>) -> bool {
        self.value(x).is_finite()
    }
}

pub trait Regularizer: Send + Sync {
    fn value(&self, x: ArrayView1<'_, f64>) -> f64;

    /// `prox_{αr}(x) = argmin_y r(y) + ||y - x||² / (2α)` with `α > 0`.
    fn prox(&self, x: ArrayView1<'_, f64>, alpha: f64) -> Array1<f64>;
}

pub struct CompositeProblem {
    losses: Vec<Box<dyn SmoothLoss>>,
    reg: Box<dyn Regularizer>,
    dim: usize,
}

impl CompositeProblem {
    pub fn new(losses: Vec<Box<dyn SmoothLoss>>, reg: Box<dyn Regularizer>) -> Result<Self> {
        let dim = match losses.first() {
            Some(l) => l.dim(),
            None => return Err(Error::Data("problem needs at least one agent".into())),
        };
        for (i, l) in losses.iter().enumerate() {
            if l.dim() != dim {
                return Err(Error::Data(format!(
                    "loss {i} has dimension {}, expected {dim}",
                    l.dim()
                )));
            }
        }
        Ok(CompositeProblem { losses, reg, dim })
    }

    pub fn m(&self) -> usize {
        self.losses.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn loss(&self, i: usize) -> &dyn SmoothLoss {
        self.losses[i].as_ref()
    }

    pub fn reg(&self) -> &dyn Regularizer {
        self.reg.as_ref()
    }

    /// Centralized smooth part `f(x) = (1/m) Σ_i f_i(x)`; summation order is
    /// fixed ascending so values are reproducible.
    pub fn f_value(&self, x: ArrayView1<'_, f64>) -> f64 {
        let mut s = 0.0;
        for l in &self.losses {
            s += l.value(x);
        }
        s / self.m() as f64
    }

    pub fn f_gradient(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let mut g = Array1::zeros(self.dim);
        for l in &self.losses {
            g += &l.gradient(x);
        }
        g / self.m() as f64
    }

    /// Full objective `u(x) = f(x) + r(x)`.
    pub fn u_value(&self, x: ArrayView1<'_, f64>) -> f64 {
        self.f_value(x) + self.reg.value(x)
    }

    /// Stacked per-agent gradients: row `i` is `∇f_i(x_i)`.
    pub fn grad_rows(&self, x: &Array2<f64>) -> Array2<f64> {
        let rows = map_rows(self.m(), |i| self.losses[i].gradient(x.row(i)));
        stack_rows(self.dim, rows)
    }

    /// `u` evaluated at every agent's own row.
    pub fn objective_per_agent(&self, x: &Array2<f64>) -> Vec<f64> {
        map_rows(self.m(), |i| self.u_value(x.row(i)))
    }
}
