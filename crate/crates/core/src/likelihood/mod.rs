//! Likelihood-based choice of the power `alpha`.
//!
//! Each tensor `S` is mapped to `L = S^alpha / alpha` (`L = log S` at
//! `alpha = 0`) and `vech(L)` is modelled as multivariate Gaussian. The density
//! of `S` picks up the Jacobian of that map (see [`jacobian`]). For a fixed
//! `alpha` the Gaussian parameters have closed-form MLEs, so the profile
//! log-likelihood is evaluated on a grid of `alpha` values and a confidence
//! set is read off as the grid points within `ci_drop` of the maximum.
//!
//! Rescaling `L` by any constant `c` leaves the profile unchanged: the
//! Gaussian fit loses `n p log c` and the Jacobian gains exactly that. The
//! `1/alpha` factor therefore only fixes the additive constant of the curve,
//! and it is the convention under which the Jacobian terms take their
//! familiar form and the curve is continuous through `alpha = 0`.

pub mod gaussian;
pub mod jacobian;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spd::{spectral_decompose, vech_len, DefinitenessClass, SpectralDecomp, SymMatrix};

pub use gaussian::{GaussianDensity, GaussianParams, MAX_CONDITION};
pub use jacobian::{log_jacobian, log_jacobian_ratio, ALPHA_THRESHOLD, GAP_THRESHOLD};

/// Drop in log-likelihood defining the confidence set.
pub const DEFAULT_CI_DROP: f64 = 2.0;
/// Half the 95% quantile of chi-square with one degree of freedom.
pub const WILKS_95_DROP: f64 = 1.920_729_410_347_062;

/// Powered eigenvalue `d^alpha / alpha`, or `log d` at zero.
#[inline]
fn transform_eigenvalue(d: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        d.ln()
    } else {
        d.powf(alpha) / alpha
    }
}

fn require_positive_definite(sd: &SpectralDecomp) -> Result<()> {
    if sd.definiteness() != DefinitenessClass::PositiveDefinite {
        let lam = *sd.eigenvalues.last().unwrap();
        return Err(Error::Domain {
            eigenvalue: lam,
            reason: "the tensor density needs a positive definite matrix".into(),
        });
    }
    Ok(())
}

/// A tensor prepared for repeated evaluation at different powers.
#[derive(Debug, Clone)]
pub struct PreparedTensor {
    eig: SpectralDecomp,
}

impl PreparedTensor {
    pub fn new(s: &SymMatrix) -> Result<Self> {
        let eig = spectral_decompose(s)?;
        require_positive_definite(&eig)?;
        Ok(Self { eig })
    }

    pub fn dim(&self) -> usize {
        self.eig.dim()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eig.eigenvalues
    }

    /// `vech(L)` for `L = S^alpha / alpha` (`log S` at zero).
    pub fn transformed_vech(&self, alpha: f64) -> Vec<f64> {
        let values: Vec<f64> = self
            .eig
            .eigenvalues
            .iter()
            .map(|&d| transform_eigenvalue(d, alpha))
            .collect();
        self.eig.compose(&values).into_vech()
    }

    pub fn log_jacobian(&self, alpha: f64) -> Result<f64> {
        log_jacobian(&self.eig.eigenvalues, alpha)
    }
}

/// `L = S^alpha / alpha`, or `log S` at `alpha = 0`.
pub fn power_transform(s: &SymMatrix, alpha: f64) -> Result<SymMatrix> {
    let prepared = PreparedTensor::new(s)?;
    SymMatrix::from_vech(s.dim(), prepared.transformed_vech(alpha))
}

/// Log density of a positive definite `S` when `vech(S^alpha / alpha)` is
/// Gaussian with the given parameters.
pub fn log_density_s(s: &SymMatrix, alpha: f64, params: &GaussianParams) -> Result<f64> {
    if params.dim() != vech_len(s.dim()) {
        return Err(Error::DimensionMismatch {
            expected: vech_len(s.dim()),
            found: params.dim(),
        });
    }
    let prepared = PreparedTensor::new(s)?;
    let density = params.density()?;
    Ok(density.log_pdf(&prepared.transformed_vech(alpha))? + prepared.log_jacobian(alpha)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub loglik: f64,
    pub params: GaussianParams,
}

/// A sample of tensors decomposed once, ready for profile evaluations.
#[derive(Debug, Clone)]
pub struct ProfileModel {
    tensors: Vec<PreparedTensor>,
    dim: usize,
    scale: f64,
}

impl ProfileModel {
    /// Requires `n > m(m+1)/2` positive definite tensors of one dimension.
    pub fn new(samples: &[SymMatrix]) -> Result<Self> {
        let first = samples.first().ok_or(Error::EmptyInput)?;
        let dim = first.dim();
        let p = vech_len(dim);
        if samples.len() <= p {
            return Err(Error::InvalidArgument(format!(
                "profile likelihood needs more than {p} tensors, got {}",
                samples.len()
            )));
        }
        let tensors = samples
            .iter()
            .map(|s| {
                if s.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: s.dim(),
                    });
                }
                PreparedTensor::new(s)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            tensors,
            dim,
            scale: 1.0,
        })
    }

    /// Uses `c * L` in place of `L`; the profile is invariant to this choice.
    pub fn with_scale(mut self, c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "transform scale {c} must be positive"
            )));
        }
        self.scale = c;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Profile log-likelihood at `alpha` with `mu`, `Sigma` at their MLEs.
    pub fn evaluate(&self, alpha: f64) -> Result<ProfilePoint> {
        if !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "power {alpha} is not finite"
            )));
        }
        let rows: Vec<Vec<f64>> = self
            .tensors
            .iter()
            .map(|t| {
                t.transformed_vech(alpha)
                    .into_iter()
                    .map(|x| self.scale * x)
                    .collect()
            })
            .collect();
        let params = GaussianParams::fit_mle(&rows)?;
        let density = params.density()?;
        let scale_jacobian = vech_len(self.dim) as f64 * self.scale.ln();
        let mut loglik = 0.0;
        for (t, row) in self.tensors.iter().zip(&rows) {
            loglik += density.log_pdf(row)? + t.log_jacobian(alpha)? + scale_jacobian;
        }
        Ok(ProfilePoint { loglik, params })
    }
}

pub fn profile_loglik(samples: &[SymMatrix], alpha: f64) -> Result<ProfilePoint> {
    ProfileModel::new(samples)?.evaluate(alpha)
}

/// Evenly spaced powers `lo, lo + step, ..., <= hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for AlphaGrid {
    fn default() -> Self {
        Self {
            lo: -0.1,
            hi: 0.7,
            step: 0.02,
        }
    }
}

impl AlphaGrid {
    pub fn new(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && step.is_finite()) {
            return Err(Error::InvalidArgument("grid bounds must be finite".into()));
        }
        if lo > hi {
            return Err(Error::InvalidArgument(format!(
                "grid lower bound {lo} exceeds {hi}"
            )));
        }
        if !(step >= 1e-9) {
            return Err(Error::InvalidArgument(format!(
                "grid step {step} must be at least 1e-9"
            )));
        }
        if (hi - lo) / step > 1e6 {
            return Err(Error::InvalidArgument(
                "grid has more than a million points".into(),
            ));
        }
        Ok(Self { lo, hi, step })
    }

    pub fn single(alpha: f64) -> Result<Self> {
        Self::new(alpha, alpha, 1.0)
    }

    pub fn len(&self) -> usize {
        ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid values, rounded to 12 decimals so that e.g. `-0.1 + 20 * 0.02`
    /// is exactly `0.3`; anything within `1e-12` of zero is zero.
    pub fn points(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let mut x = self.lo + i as f64 * self.step;
                if x.abs() < 1e3 {
                    x = (x * 1e12).round() / 1e12;
                }
                if x.abs() < 1e-12 {
                    0.0
                } else {
                    x
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaFit {
    pub grid: AlphaGrid,
    pub alphas: Vec<f64>,
    /// Profile log-likelihood per grid point; `None` marks a failed evaluation.
    pub loglik: Vec<Option<f64>>,
    pub alpha_hat: f64,
    pub max_loglik: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub ci_drop: f64,
    pub params_at_mle: GaussianParams,
    pub n: usize,
}

impl AlphaFit {
    /// Whether `alpha` lies in `[ci_lo, ci_hi]`, with slack for grid round-off.
    pub fn ci_contains(&self, alpha: f64) -> bool {
        let slack = 1e-9 * self.grid.step.max(1e-9);
        alpha >= self.ci_lo - slack && alpha <= self.ci_hi + slack
    }

    pub fn failed_points(&self) -> usize {
        self.loglik.iter().filter(|v| v.is_none()).count()
    }
}

/// Profile maximum likelihood over `grid` with the confidence set
/// `{alpha : loglik(alpha) >= max - ci_drop}` reported as `[min, max]`.
///
/// Grid points whose profile cannot be evaluated are skipped. Ties for the
/// maximum go to the point closest to zero, then to the smaller point.
pub fn fit_alpha(samples: &[SymMatrix], grid: &AlphaGrid, ci_drop: f64) -> Result<AlphaFit> {
    fit_alpha_model(&ProfileModel::new(samples)?, grid, ci_drop)
}

/// Index of the largest valid value; ties go to the point closest to zero,
/// then to the smaller point.
pub fn select_maximum(alphas: &[f64], values: &[Option<f64>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (&a, v)) in alphas.iter().zip(values).enumerate() {
        let Some(v) = *v else { continue };
        let better = match best {
            None => true,
            Some((b, incumbent)) => {
                v > incumbent || (v == incumbent && (a.abs(), a) < (alphas[b].abs(), alphas[b]))
            }
        };
        if better {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

pub fn fit_alpha_model(model: &ProfileModel, grid: &AlphaGrid, ci_drop: f64) -> Result<AlphaFit> {
    if !(ci_drop >= 0.0) || !ci_drop.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "ci_drop {ci_drop} must be nonnegative"
        )));
    }
    let alphas = grid.points();
    let points: Vec<Option<ProfilePoint>> =
        alphas.par_iter().map(|&a| model.evaluate(a).ok()).collect();

    let values: Vec<Option<f64>> = points
        .iter()
        .map(|p| p.as_ref().map(|p| p.loglik))
        .collect();
    let best = select_maximum(&alphas, &values).ok_or(Error::AllPointsFailed)?;
    let max_loglik = points[best].as_ref().unwrap().loglik;
    let threshold = max_loglik - ci_drop;
    let inside: Vec<f64> = alphas
        .iter()
        .zip(&points)
        .filter(|(_, p)| p.as_ref().is_some_and(|p| p.loglik >= threshold))
        .map(|(a, _)| *a)
        .collect();
    let ci_lo = inside.iter().copied().fold(f64::INFINITY, f64::min);
    let ci_hi = inside.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    Ok(AlphaFit {
        grid: *grid,
        alpha_hat: alphas[best],
        alphas,
        loglik: values,
        max_loglik,
        ci_lo,
        ci_hi,
        ci_drop,
        params_at_mle: points[best].as_ref().unwrap().params.clone(),
        n: model.len(),
    })
}
