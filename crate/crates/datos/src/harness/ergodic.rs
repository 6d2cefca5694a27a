//! Stepsize-weighted running averages of the pre-prox iterates and duals,
//! the sequences the O(1/k) guarantee speaks about.

use ndarray::Array2;

/// Maintains `θ = Σ_t α^{t−1}` and the weighted means
/// `T̄ = (1/θ) Σ_t α^{t−1} T_𝔸^t`, `S̄ = (1/θ) Σ_t α^{t−1} S^t`
/// incrementally: after bumping θ, each mean moves toward the new sample by
/// the fraction `α/θ`. The weights are a convex combination by
/// construction, and the first sample lands exactly (θ goes 0 → α, so the
/// fraction is exactly 1).
#[derive(Debug, Clone)]
pub struct ErgodicTracker {
    theta: f64,
    tbar: Array2<f64>,
    sbar: Array2<f64>,
}

impl ErgodicTracker {
    pub fn new(m: usize, d: usize) -> Self {
        ErgodicTracker { theta: 0.0, tbar: Array2::zeros((m, d)), sbar: Array2::zeros((m, d)) }
    }

    /// Folds in one iteration's pre-prox iterate and dual, weighted by the
    /// stepsize that produced them.
    ///
    /// # Panics
    /// Panics unless `alpha_prev` is positive and finite — a zero weight
    /// would stall θ and a negative one breaks the convex-combination
    /// invariant.
    pub fn update(&mut self, alpha_prev: f64, t_a: &Array2<f64>, s: &Array2<f64>) {
        assert!(
            alpha_prev.is_finite() && alpha_prev > 0.0,
            "ergodic weight must be a positive stepsize, got {alpha_prev}"
        );
        self.theta += alpha_prev;
        let w = alpha_prev / self.theta;
        self.tbar.zip_mut_with(t_a, |b, &v| *b += w * (v - *b));
        self.sbar.zip_mut_with(s, |b, &v| *b += w * (v - *b));
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn tbar(&self) -> &Array2<f64> {
        &self.tbar
    }

    pub fn sbar(&self) -> &Array2<f64> {
        &self.sbar
    }
}
