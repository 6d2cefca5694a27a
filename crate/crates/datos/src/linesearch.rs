//! Backtracking step-size search on a halving ladder.
//!
//! Candidates are `x⁺ = x2 + α d` for `α = α_in, α_in/2, α_in/4, ...`; a
//! candidate is accepted once
//!
//! ```text
//! f(x⁺) ≤ f(x1) + ⟨∇f(x1), x⁺ - x1⟩ + δ/(2α) ‖x⁺ - x1‖²
//! ```
//!
//! holds (up to a relative slack of a few ulps, so exact-boundary cases do
//! not flap between platforms). A non-finite `f(x⁺)` counts as a failed
//! trial, which is how constrained losses push candidates back inside
//! their domain. The accepted set is downward closed — any smaller `α`
//! would also pass — so taking a minimum over agents stays valid.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::problems::SmoothLoss;

/// Ladder floor; descending past this means the condition is unattainable
/// (wrong gradient, non-convex loss, or an empty feasible ray).
const ALPHA_FLOOR: f64 = 1e-300;

/// Relative slack on the acceptance test. Without it, candidates that sit
/// exactly on the quadratic bound (common for hand-built quadratics) get
/// rejected or accepted depending on rounding order. Shared with every
/// ladder in the crate so accept/reject decisions are comparable.
pub(crate) const ACCEPT_SLACK: f64 = 1e-12;

/// Floor shared by the other ladders in the crate.
pub(crate) const LADDER_FLOOR: f64 = ALPHA_FLOOR;

#[derive(Debug, Clone)]
pub struct LineSearchResult {
    /// Accepted step size.
    pub alpha: f64,
    /// Number of candidates evaluated, including the accepted one.
    pub trials: u32,
    /// The accepted candidate `x2 + alpha * d`.
    pub candidate: Array1<f64>,
}

/// Runs the halving ladder starting from `alpha_init`.
///
/// `x1` anchors the model (value, gradient, and the quadratic penalty are
/// all taken at `x1`); `x2` is the base of the candidate ray. The two
/// coincide for classical proximal-gradient backtracking but differ after
/// a mixing step.
///
/// # Errors
///
/// - [`Error::Numerical`] if `f(x1)` is not finite — the model has no
///   anchor and every comparison would be vacuous.
/// - [`Error::StepsizeUnderflow`] if the ladder descends below `1e-300`
///   without acceptance.
pub fn backtrack(
    alpha_init: f64,
    loss: &dyn SmoothLoss,
    x1: ArrayView1<'_, f64>,
    x2: ArrayView1<'_, f64>,
    dir: ArrayView1<'_, f64>,
    delta: f64,
) -> Result<LineSearchResult> {
    if !(alpha_init.is_finite() && alpha_init > 0.0) {
        return Err(Error::Config(format!(
            "line search needs a positive finite initial step (got {alpha_init})"
        )));
    }
    if !(delta.is_finite() && delta > 0.0 && delta <= 1.0) {
        return Err(Error::Config(format!(
            "line search contraction δ must lie in (0, 1] (got {delta})"
        )));
    }
    let f1 = loss.value(x1);
    if !f1.is_finite() {
        return Err(Error::Numerical(
            "line search anchor lies outside the loss domain".into(),
        ));
    }
    let g1 = loss.gradient(x1);
    let slack = ACCEPT_SLACK * (1.0 + f1.abs());

    let mut alpha = alpha_init;
    let mut trials: u32 = 0;
    loop {
        let candidate: Array1<f64> = &x2 + &(&dir * alpha);
        trials += 1;
        let f_cand = loss.value(candidate.view());
        if f_cand.is_finite() {
            let diff = &candidate - &x1;
            let linear: f64 = g1.dot(&diff);
            let quad = diff.dot(&diff) * delta / (2.0 * alpha);
            if f_cand <= f1 + linear + quad + slack {
                return Ok(LineSearchResult { alpha, trials, candidate });
            }
        }
        alpha *= 0.5;
        if alpha < ALPHA_FLOOR {
            return Err(Error::StepsizeUnderflow { alpha, trials });
        }
    }
}
