//! Frechet means, power fractional anisotropy and interpolation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::PowerParam;
use crate::spd::{spectral_decompose, SymMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrechetMeanResult {
    pub mean: SymMatrix,
    pub alpha: f64,
    pub n: usize,
}

/// Sample Frechet mean under the power-Euclidean metric.
///
/// The metric is Euclidean in `S^alpha` coordinates, so the minimiser of
/// `sum_i d(S_i, X)^2` is `(mean_i S_i^alpha)^(1/alpha)`, or
/// `exp(mean_i log S_i)` at `alpha = 0`.
pub fn frechet_mean(samples: &[SymMatrix], p: PowerParam) -> Result<FrechetMeanResult> {
    let first = samples.first().ok_or(Error::EmptyInput)?;
    let m = first.dim();
    let mut acc = SymMatrix::zeros(m);
    for s in samples {
        if s.dim() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: s.dim(),
            });
        }
        acc = &acc + &p.forward(s)?;
    }
    let mean = p.inverse(&acc.scale(1.0 / samples.len() as f64))?;
    Ok(FrechetMeanResult {
        mean,
        alpha: p.alpha(),
        n: samples.len(),
    })
}

/// Fractional anisotropy of the powered eigenvalues,
/// `sqrt( m/(m-1) * sum (l_i^a - mean)^2 / sum l_i^(2a) )`.
///
/// At `alpha = 0` the log eigenvalues take the place of `l_i^a`. The result is
/// clamped to `[0, 1]`.
pub fn fractional_anisotropy(s: &SymMatrix, p: PowerParam) -> Result<f64> {
    let m = s.dim();
    if m < 2 {
        return Err(Error::InvalidArgument(
            "anisotropy needs dimension at least 2".into(),
        ));
    }
    let sd = spectral_decompose(s)?;
    let values = if p.is_log() {
        sd.log_eigenvalues()?
    } else {
        sd.powered_eigenvalues(p.alpha())?
    };
    let mean = values.iter().sum::<f64>() / m as f64;
    let spread: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let energy: f64 = values.iter().map(|v| v * v).sum();
    if spread == 0.0 {
        if energy == 0.0 && !p.is_log() {
            return Err(Error::Degenerate("all powered eigenvalues are zero".into()));
        }
        return Ok(0.0);
    }
    let fa = (m as f64 / (m as f64 - 1.0) * spread / energy).sqrt();
    Ok(fa.clamp(0.0, 1.0))
}

/// Point at fraction `t` along the straight line from `S1^alpha` to `S2^alpha`,
/// mapped back: `((1-t) S1^alpha + t S2^alpha)^(1/alpha)`.
pub fn interpolate(s1: &SymMatrix, s2: &SymMatrix, t: f64, p: PowerParam) -> Result<SymMatrix> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!(
            "interpolation fraction {t} outside [0, 1]"
        )));
    }
    if s1.dim() != s2.dim() {
        return Err(Error::DimensionMismatch {
            expected: s1.dim(),
            found: s2.dim(),
        });
    }
    let a = p.forward(s1)?;
    let b = p.forward(s2)?;
    p.inverse(&(&a.scale(1.0 - t) + &b.scale(t)))
}
