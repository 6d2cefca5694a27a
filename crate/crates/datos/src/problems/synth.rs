//! Seeded synthetic instance generators.
//!
//! All randomness flows through ChaCha streams keyed by the caller's seed,
//! drawn in a fixed element order, so instances are pure functions of their
//! parameters on every platform.

use ndarray::{Array1, Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, largest_eigenvalue, sym_eig};

use super::logdet::TraceSign;
use super::{CompositeProblem, LogDetLoss, LogisticLoss, QuadraticRidgeLoss, SpectralBox, L1};

fn randn_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        data.push(rng.sample(StandardNormal));
    }
    Array2::from_shape_vec((rows, cols), data).expect("shape matches fill")
}

fn randn_vec(rng: &mut ChaCha8Rng, len: usize) -> Array1<f64> {
    Array1::from_iter((0..len).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

pub struct RegressionInstance {
    pub problem: CompositeProblem,
    /// Condition number of the aggregate smooth part
    /// `f = (1/m) Σ_i [(1/n)||A_i x - b_i||² + (γ_i/2)||x||²]`.
    pub condition_number: f64,
    /// Largest per-agent gradient Lipschitz constant, for fixed-step
    /// baselines that need one.
    pub max_agent_lipschitz: f64,
}

/// Least-squares + l1 family with the arithmetic ridge schedule
/// `γ_i = gamma_base + i * gamma_step` (i = 0..m). `gamma_base = gamma_step
/// = 0` gives plain lasso.
pub fn gen_regression_instance(
    m: usize,
    n: usize,
    d: usize,
    gamma_base: f64,
    gamma_step: f64,
    lambda: f64,
    seed: u64,
) -> Result<RegressionInstance> {
    if m == 0 || n == 0 || d == 0 {
        return Err(Error::Config(format!(
            "regression instance needs m, n, d >= 1 (got {m}, {n}, {d})"
        )));
    }
    if gamma_base < 0.0 || gamma_step < 0.0 {
        return Err(Error::Config("ridge schedule must be nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut losses: Vec<Box<dyn super::SmoothLoss>> = Vec::with_capacity(m);
    let mut mats = Vec::with_capacity(m);
    let mut max_lip = 0.0f64;
    for i in 0..m {
        let a = randn_mat(&mut rng, n, d);
        let b = randn_vec(&mut rng, n);
        let gamma = gamma_base + i as f64 * gamma_step;
        let loss = QuadraticRidgeLoss::new(a.clone(), b, gamma)?;
        max_lip = max_lip.max(loss.lipschitz());
        mats.push((a, gamma));
        losses.push(Box::new(loss));
    }
    let condition_number = regression_condition_number(&mats, n, d, seed ^ 0xc0de);
    let problem = CompositeProblem::new(losses, Box::new(L1::new(lambda)?))?;
    Ok(RegressionInstance {
        problem,
        condition_number,
        max_agent_lipschitz: max_lip,
    })
}

fn regression_condition_number(mats: &[(Array2<f64>, f64)], n: usize, d: usize, seed: u64) -> f64 {
    let m = mats.len();
    let gamma_mean: f64 = mats.iter().map(|(_, g)| g).sum::<f64>() / m as f64;
    let apply = |v: &Array1<f64>| -> Array1<f64> {
        let mut out = v.mapv(|x| x * gamma_mean);
        for (a, _) in mats {
            let av = a.dot(v);
            out += &(a.t().dot(&av) * (2.0 / (n as f64 * m as f64)));
        }
        out
    };
    let lam_max = largest_eigenvalue(d, 400, seed, apply);
    // The data part (1/m) Σ (2/n) A_iᵀA_i has rank at most m·n; when that is
    // below d it has a null space and the smallest curvature is exactly the
    // mean ridge weight.
    let lam_min = if m * n < d {
        gamma_mean
    } else {
        let mut h = Array2::eye(d) * gamma_mean;
        for (a, _) in mats {
            h += &(a.t().dot(a) * (2.0 / (n as f64 * m as f64)));
        }
        sym_eig(h.view()).map(|e| e.values[0]).unwrap_or(gamma_mean)
    };
    if lam_min > 0.0 {
        lam_max / lam_min
    } else {
        f64::INFINITY
    }
}

/// Synthetic binary classification: standard-normal features, labels from a
/// planted hyperplane with additive noise, so classes overlap but carry
/// signal.
pub fn gen_logistic_instance(
    m: usize,
    n: usize,
    d: usize,
    lambda: f64,
    seed: u64,
) -> Result<CompositeProblem> {
    if m == 0 || n == 0 || d == 0 {
        return Err(Error::Config(format!(
            "logistic instance needs m, n, d >= 1 (got {m}, {n}, {d})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let planted = randn_vec(&mut rng, d).mapv(|v| v / (d as f64).sqrt());
    let mut losses: Vec<Box<dyn super::SmoothLoss>> = Vec::with_capacity(m);
    for _ in 0..m {
        let a = randn_mat(&mut rng, n, d);
        let labels: Vec<f64> = (0..n)
            .map(|j| {
                let noise: f64 = rng.sample::<f64, _>(StandardNormal);
                let score = a.row(j).dot(&planted) + 0.3 * noise;
                if score >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            })
            .collect();
        losses.push(Box::new(LogisticLoss::from_dense(&a, labels)?));
    }
    CompositeProblem::new(losses, Box::new(L1::new(lambda)?))
}

/// Seeded random symmetric positive definite matrix with spectrum bounded
/// away from zero; used as a ground-truth covariance.
pub fn random_spd(side: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = randn_mat(&mut rng, side, side);
    let mut s = g.dot(&g.t()) / side as f64;
    for i in 0..side {
        s[[i, i]] += 0.5;
    }
    s
}

/// Covariance-estimation instance: each agent observes `n` Gaussian samples
/// `y ~ N(0, Σ)` and keeps the scatter block `Y_i = (1/n) Σ_j y_j y_jᵀ`;
/// the shared regularizer is the spectral box `[lower I, upper I]`.
pub fn gen_covariance_instance(
    sigma: ArrayView2<'_, f64>,
    n: usize,
    m: usize,
    lower: f64,
    upper: f64,
    seed: u64,
    sign_conventional: bool,
) -> Result<CompositeProblem> {
    let side = sigma.nrows();
    if side == 0 || sigma.ncols() != side {
        return Err(Error::Config("covariance Σ must be square and nonempty".into()));
    }
    if m == 0 || n == 0 {
        return Err(Error::Config("covariance instance needs m, n >= 1".into()));
    }
    let l = cholesky(sigma).ok_or_else(|| {
        Error::Config("covariance Σ must be symmetric positive definite".into())
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sign = if sign_conventional {
        TraceSign::Conventional
    } else {
        TraceSign::AsPrinted
    };
    let mut losses: Vec<Box<dyn super::SmoothLoss>> = Vec::with_capacity(m);
    for _ in 0..m {
        let mut scatter: Array2<f64> = Array2::zeros((side, side));
        for _ in 0..n {
            let z = randn_vec(&mut rng, side);
            let y = l.dot(&z);
            for r in 0..side {
                for c in 0..side {
                    scatter[[r, c]] += y[r] * y[c];
                }
            }
        }
        scatter.mapv_inplace(|v| v / n as f64);
        losses.push(Box::new(LogDetLoss::new(scatter, n as f64, sign)?));
    }
    CompositeProblem::new(losses, Box::new(SpectralBox::new(lower, upper, side)?))
}
