//! Change-of-variables terms for the power transform `L = S^alpha / alpha`.
//!
//! On symmetric matrices the derivative of `S -> f(S)` acts diagonally in the
//! eigenbasis of `S`: `f'(d_i)` on the diagonal and the divided difference
//! `(f(d_i) - f(d_j)) / (d_i - d_j)` on each off-diagonal pair. With
//! `f(x) = x^alpha / alpha` this gives
//!
//! ```text
//! log |J| = sum_i (alpha - 1) log d_i + sum_{i<j} log[(d_i^a - d_j^a) / (a (d_i - d_j))]
//! ```
//!
//! The divided difference is ill-conditioned when two eigenvalues nearly
//! coincide and when `alpha` is near zero, so it has two series branches.

use crate::error::{Error, Result};

/// Relative eigenvalue gap below which the gap series is used.
pub const GAP_THRESHOLD: f64 = 1e-3;
/// `|alpha|` below which the small-power series is used.
pub const ALPHA_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioBranch {
    Equal,
    GapSeries,
    AlphaSeries,
    Direct,
}

/// Relative gap `mu = lambda_b / lambda_a - 1`, computed without the division round-off.
#[inline]
fn relative_gap(lambda_a: f64, lambda_b: f64) -> f64 {
    (lambda_b - lambda_a) / lambda_a
}

pub fn select_branch(lambda_a: f64, lambda_b: f64, alpha: f64) -> RatioBranch {
    let mu = relative_gap(lambda_a, lambda_b);
    if mu == 0.0 {
        RatioBranch::Equal
    } else if mu.abs() < GAP_THRESHOLD {
        RatioBranch::GapSeries
    } else if alpha.abs() < ALPHA_THRESHOLD {
        RatioBranch::AlphaSeries
    } else {
        RatioBranch::Direct
    }
}

/// `(l_a^a - l_b^a) / (a (l_a - l_b))` written as `l_a^(a-1) ((1+mu)^a - 1) / (a mu)`.
/// Undefined at `alpha = 0` or equal eigenvalues.
pub fn ratio_direct(lambda_a: f64, lambda_b: f64, alpha: f64) -> f64 {
    let mu = relative_gap(lambda_a, lambda_b);
    lambda_a.powf(alpha - 1.0) * (alpha * mu.ln_1p()).exp_m1() / (alpha * mu)
}

/// Fourth-order expansion in the relative gap `mu`.
pub fn ratio_gap_series(lambda_a: f64, lambda_b: f64, alpha: f64) -> f64 {
    let mu = relative_gap(lambda_a, lambda_b);
    let a1 = alpha - 1.0;
    let a2 = a1 * (alpha - 2.0);
    let a3 = a2 * (alpha - 3.0);
    let a4 = a3 * (alpha - 4.0);
    let series = 1.0 + mu * (a1 / 2.0 + mu * (a2 / 6.0 + mu * (a3 / 24.0 + mu * a4 / 120.0)));
    lambda_a.powf(alpha - 1.0) * series
}

/// Fifth-order expansion in `alpha`, with `l = log(1 + mu)`.
pub fn ratio_alpha_series(lambda_a: f64, lambda_b: f64, alpha: f64) -> f64 {
    let mu = relative_gap(lambda_a, lambda_b);
    let l = mu.ln_1p();
    let x = alpha * l;
    // (e^x - 1) / x
    let series =
        1.0 + x * (1.0 / 2.0 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x * (1.0 / 120.0 + x / 720.0))));
    lambda_a.powf(alpha - 1.0) * (l / mu) * series
}

/// `log[(l_a^a - l_b^a) / (a (l_a - l_b))]`, with the continuous limits at
/// `alpha = 0` and at `l_a = l_b`.
pub fn log_jacobian_ratio(lambda_a: f64, lambda_b: f64, alpha: f64) -> Result<f64> {
    for lam in [lambda_a, lambda_b] {
        if !(lam > 0.0) || !lam.is_finite() {
            return Err(Error::Domain {
                eigenvalue: lam,
                reason: "Jacobian terms need strictly positive eigenvalues".into(),
            });
        }
    }
    if alpha == 1.0 {
        // the divided difference of the identity map is 1
        return Ok(0.0);
    }
    let ratio = match select_branch(lambda_a, lambda_b, alpha) {
        RatioBranch::Equal => return Ok((alpha - 1.0) * lambda_a.ln()),
        RatioBranch::GapSeries => ratio_gap_series(lambda_a, lambda_b, alpha),
        RatioBranch::AlphaSeries => ratio_alpha_series(lambda_a, lambda_b, alpha),
        RatioBranch::Direct => ratio_direct(lambda_a, lambda_b, alpha),
    };
    Ok(ratio.ln())
}

/// Full `log |d vech(L) / d vech(S)|` for eigenvalues `d` of `S`.
pub fn log_jacobian(eigenvalues: &[f64], alpha: f64) -> Result<f64> {
    let mut total = 0.0;
    for (i, &di) in eigenvalues.iter().enumerate() {
        if !(di > 0.0) {
            return Err(Error::Domain {
                eigenvalue: di,
                reason: "Jacobian terms need strictly positive eigenvalues".into(),
            });
        }
        total += (alpha - 1.0) * di.ln();
        for &dj in &eigenvalues[i + 1..] {
            total += log_jacobian_ratio(di, dj, alpha)?;
        }
    }
    Ok(total)
}
