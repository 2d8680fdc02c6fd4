//! Log-Euclidean, power-Euclidean and Procrustes power distances.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spd::{matrix_log, matrix_power, SymMatrix};

/// The power `alpha` indexing the metric family; zero selects the log-Euclidean branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerParam(f64);

impl PowerParam {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() {
            Ok(Self(alpha))
        } else {
            Err(Error::InvalidArgument(format!(
                "power {alpha} is not finite"
            )))
        }
    }

    pub const LOG_EUCLIDEAN: PowerParam = PowerParam(0.0);

    #[inline]
    pub fn alpha(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn is_log(self) -> bool {
        self.0 == 0.0
    }

    /// Coordinates in which the metric is Euclidean: `S^alpha`, or `log S` at zero.
    pub fn forward(self, s: &SymMatrix) -> Result<SymMatrix> {
        if self.is_log() {
            matrix_log(s)
        } else {
            matrix_power(s, self.0)
        }
    }

    /// Inverse of [`PowerParam::forward`]: `X^(1/alpha)`, or `exp X` at zero.
    pub fn inverse(self, x: &SymMatrix) -> Result<SymMatrix> {
        if self.is_log() {
            crate::spd::matrix_exp(x)
        } else {
            matrix_power(x, 1.0 / self.0)
        }
    }

    /// `1 / |alpha|`, the scale that turns power-space distances into metric distances.
    fn distance_scale(self) -> f64 {
        if self.is_log() {
            1.0
        } else {
            1.0 / self.0.abs()
        }
    }
}

impl TryFrom<f64> for PowerParam {
    type Error = Error;
    fn try_from(alpha: f64) -> Result<Self> {
        Self::new(alpha)
    }
}

fn check_dims(s1: &SymMatrix, s2: &SymMatrix) -> Result<()> {
    if s1.dim() != s2.dim() {
        return Err(Error::DimensionMismatch {
            expected: s1.dim(),
            found: s2.dim(),
        });
    }
    Ok(())
}

pub fn frobenius_norm(s: &SymMatrix) -> f64 {
    s.frobenius_norm()
}

/// `||log S1 - log S2||_F`.
pub fn dist_log_euclidean(s1: &SymMatrix, s2: &SymMatrix) -> Result<f64> {
    check_dims(s1, s2)?;
    Ok((&matrix_log(s1)? - &matrix_log(s2)?).frobenius_norm())
}

/// `(1/|alpha|) ||S1^alpha - S2^alpha||_F`, log-Euclidean at `alpha = 0`.
pub fn dist_power(s1: &SymMatrix, s2: &SymMatrix, p: PowerParam) -> Result<f64> {
    check_dims(s1, s2)?;
    if p.is_log() {
        return dist_log_euclidean(s1, s2);
    }
    let diff = &p.forward(s1)? - &p.forward(s2)?;
    Ok(p.distance_scale() * diff.frobenius_norm())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcrustesFit {
    pub distance: f64,
    /// Orthogonal matrix minimising `||S1^alpha - S2^alpha R||_F`.
    pub rotation: DMatrix<f64>,
}

/// Procrustes power distance `inf_R (1/|alpha|) ||S1^alpha - S2^alpha R||_F`
/// over the full orthogonal group (reflections allowed).
///
/// With `(S2^alpha)^T S1^alpha = W Psi U^T` the minimiser is `R = W U^T`.
/// When the cross product is rank deficient the minimiser is not unique and
/// the SVD routine's choice of singular vectors decides which one is returned.
pub fn dist_procrustes_power(
    s1: &SymMatrix,
    s2: &SymMatrix,
    p: PowerParam,
) -> Result<ProcrustesFit> {
    check_dims(s1, s2)?;
    if p.is_log() {
        return Err(Error::InvalidArgument(
            "the Procrustes power distance is undefined at alpha = 0".into(),
        ));
    }
    let a = p.forward(s1)?.to_dmatrix();
    let b = p.forward(s2)?.to_dmatrix();
    let cross = b.transpose() * &a;
    let svd = cross.svd(true, true);
    let (w, u_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => {
            return Err(Error::Degenerate(
                "SVD did not return singular vectors".into(),
            ))
        }
    };
    let rotation = w * u_t;
    let residual = a - b * &rotation;
    Ok(ProcrustesFit {
        distance: p.distance_scale() * residual.norm(),
        rotation,
    })
}
