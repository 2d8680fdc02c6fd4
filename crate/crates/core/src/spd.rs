//! Dense symmetric matrices and their spectral calculus.
//!
//! A [`SymMatrix`] stores only the upper triangle, row by row (the `vech`
//! layout), so symmetry holds by construction. Every matrix function used
//! elsewhere in the crate (powers, logarithm, exponential) goes through a
//! cyclic Jacobi eigen-decomposition, which is unconditionally reliable for
//! the small dimensions found in tensor imaging.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sweep cap of the Jacobi solver.
pub const MAX_JACOBI_SWEEPS: usize = 100;
/// Off-diagonal Frobenius tolerance, relative to the Frobenius norm of the input.
pub const JACOBI_TOLERANCE: f64 = 1e-13;
/// Eigenvalue tolerance factor used for definiteness classification.
pub const PSD_TOLERANCE: f64 = 1e-12;

/// Number of distinct entries of an `m x m` symmetric matrix.
pub const fn vech_len(m: usize) -> usize {
    m * (m + 1) / 2
}

/// Inverse of [`vech_len`], if `len` is a triangular number.
pub fn dim_from_vech_len(len: usize) -> Option<usize> {
    (1..=len)
        .find(|&m| vech_len(m) >= len)
        .filter(|&m| vech_len(m) == len)
}

/// Symmetric `m x m` matrix stored as its row-major upper triangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    dim: usize,
    vech: Vec<f64>,
}

impl SymMatrix {
    /// Builds a matrix from its row-major upper triangle.
    pub fn from_vech(dim: usize, vech: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "matrix dimension must be at least 1".into(),
            ));
        }
        let expected = vech_len(dim);
        if vech.len() != expected {
            return Err(Error::LengthMismatch {
                len: vech.len(),
                dim,
                expected,
            });
        }
        if vech.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { dim, vech })
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "matrix dimension must be at least 1");
        Self {
            dim,
            vech: vec![0.0; vech_len(dim)],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diag(&vec![1.0; dim])
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        Self::from_fn(diag.len(), |i, j| if i == j { diag[i] } else { 0.0 })
    }

    /// Evaluates `f(i, j)` on the upper triangle (`i <= j`).
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(dim > 0, "matrix dimension must be at least 1");
        let mut vech = Vec::with_capacity(vech_len(dim));
        for i in 0..dim {
            for j in i..dim {
                vech.push(f(i, j));
            }
        }
        Self { dim, vech }
    }

    /// Converts a full square matrix, which must be symmetric to `1e-10`
    /// relative to its largest entry. The two triangles are averaged.
    pub fn from_full(full: &DMatrix<f64>) -> Result<Self> {
        let m = full.nrows();
        if full.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: full.ncols(),
            });
        }
        if m == 0 {
            return Err(Error::EmptyInput);
        }
        if full.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let scale = full.amax().max(1.0);
        for i in 0..m {
            for j in (i + 1)..m {
                if (full[(i, j)] - full[(j, i)]).abs() > 1e-10 * scale {
                    return Err(Error::InvalidArgument(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self::from_fn(m, |i, j| 0.5 * (full[(i, j)] + full[(j, i)])))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major upper triangle, no off-diagonal weighting.
    #[inline]
    pub fn vech(&self) -> &[f64] {
        &self.vech
    }

    pub fn into_vech(self) -> Vec<f64> {
        self.vech
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        let (r, c) = if i <= j { (i, j) } else { (j, i) };
        // rows 0..r hold m + (m-1) + ... + (m-r+1) entries
        r * self.dim - r * r.saturating_sub(1) / 2 + (c - r)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.vech[self.index(i, j)]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.vech.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
    }

    /// Frobenius norm over the full matrix, so each off-diagonal entry counts twice.
    pub fn frobenius_norm(&self) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                let x = self.get(i, j);
                sum += if i == j { x * x } else { 2.0 * x * x };
            }
        }
        sum.sqrt()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            vech: self.vech.iter().map(|x| c * x).collect(),
        }
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.dim, other.dim, "symmetric matrix dimension mismatch");
        let vech = self
            .vech
            .iter()
            .zip(&other.vech)
            .map(|(a, b)| f(*a, *b))
            .collect();
        Self {
            dim: self.dim,
            vech,
        }
    }

    /// `Q S Q^T` for a square `Q` of matching size.
    pub fn congruence(&self, q: &DMatrix<f64>) -> Self {
        let full = q * self.to_dmatrix() * q.transpose();
        Self::from_fn(self.dim, |i, j| 0.5 * (full[(i, j)] + full[(j, i)]))
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        self.scale(rhs)
    }
}

impl fmt::Display for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|j| format!("{}", self.get(i, j)))
                .collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// `vech(S)` as an owned vector.
pub fn vech(s: &SymMatrix) -> Vec<f64> {
    s.vech().to_vec()
}

/// Inverse of [`vech`].
pub fn unvech(v: &[f64], m: usize) -> Result<SymMatrix> {
    SymMatrix::from_vech(m, v.to_vec())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DefinitenessClass {
    PositiveDefinite,
    PositiveSemiDefinite,
    Indefinite,
}

/// Eigenvalues sorted descending with matching orthonormal eigenvector columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomp {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralDecomp {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `tau_psd = 1e-12 * max(1, lambda_max)`.
    pub fn psd_tolerance(&self) -> f64 {
        PSD_TOLERANCE * self.eigenvalues.first().copied().unwrap_or(0.0).max(1.0)
    }

    pub fn definiteness(&self) -> DefinitenessClass {
        let tau = self.psd_tolerance();
        let min = self.eigenvalues.last().copied().unwrap_or(0.0);
        if min > tau {
            DefinitenessClass::PositiveDefinite
        } else if min >= -tau {
            DefinitenessClass::PositiveSemiDefinite
        } else {
            DefinitenessClass::Indefinite
        }
    }

    /// `U diag(values) U^T` for values paired with the stored eigenvectors.
    pub fn compose(&self, values: &[f64]) -> SymMatrix {
        let u = &self.eigenvectors;
        let m = self.dim();
        SymMatrix::from_fn(m, |i, j| {
            values
                .iter()
                .enumerate()
                .map(|(k, lam)| u[(i, k)] * lam * u[(j, k)])
                .sum()
        })
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.compose(&self.eigenvalues)
    }

    /// Eigenvalues raised to `alpha` under the domain rules of [`matrix_power`].
    pub fn powered_eigenvalues(&self, alpha: f64) -> Result<Vec<f64>> {
        let tau = self.psd_tolerance();
        self.eigenvalues
            .iter()
            .map(|&lam| {
                if alpha <= 0.0 {
                    if lam <= tau {
                        return Err(Error::Domain {
                            eigenvalue: lam,
                            reason: format!("power {alpha} requires a positive definite matrix"),
                        });
                    }
                    Ok(lam.powf(alpha))
                } else if lam < -tau {
                    Err(Error::Domain {
                        eigenvalue: lam,
                        reason: "negative eigenvalue beyond the semi-definite tolerance".into(),
                    })
                } else if lam <= 0.0 {
                    Ok(0.0)
                } else {
                    Ok(lam.powf(alpha))
                }
            })
            .collect()
    }

    pub fn log_eigenvalues(&self) -> Result<Vec<f64>> {
        let tau = self.psd_tolerance();
        self.eigenvalues
            .iter()
            .map(|&lam| {
                if lam <= tau {
                    Err(Error::Domain {
                        eigenvalue: lam,
                        reason: "logarithm requires a positive definite matrix".into(),
                    })
                } else {
                    Ok(lam.ln())
                }
            })
            .collect()
    }
}

/// Cyclic Jacobi eigen-decomposition.
///
/// Eigenvalues are sorted descending. Each eigenvector is signed so that its
/// largest-magnitude component is positive; among components tied in
/// magnitude (to `1e-12`) the first one decides.
pub fn spectral_decompose(s: &SymMatrix) -> Result<SpectralDecomp> {
    let m = s.dim();
    if s.vech().iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut a = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            a[i * m + j] = s.get(i, j);
        }
    }
    let mut v = vec![0.0; m * m];
    for i in 0..m {
        v[i * m + i] = 1.0;
    }

    let tol = JACOBI_TOLERANCE * s.frobenius_norm();
    let off_norm = |a: &[f64]| -> f64 {
        let mut sum = 0.0;
        for p in 0..m {
            for q in (p + 1)..m {
                sum += 2.0 * a[p * m + q] * a[p * m + q];
            }
        }
        sum.sqrt()
    };

    let mut converged = false;
    for _ in 0..MAX_JACOBI_SWEEPS {
        if off_norm(&a) <= tol {
            converged = true;
            break;
        }
        for p in 0..m {
            for q in (p + 1)..m {
                let apq = a[p * m + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * m + q] - a[p * m + p]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..m {
                    let akp = a[k * m + p];
                    let akq = a[k * m + q];
                    a[k * m + p] = c * akp - sn * akq;
                    a[k * m + q] = sn * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p * m + k];
                    let aqk = a[q * m + k];
                    a[p * m + k] = c * apk - sn * aqk;
                    a[q * m + k] = sn * apk + c * aqk;
                }
                a[p * m + q] = 0.0;
                a[q * m + p] = 0.0;
                for k in 0..m {
                    let vkp = v[k * m + p];
                    let vkq = v[k * m + q];
                    v[k * m + p] = c * vkp - sn * vkq;
                    v[k * m + q] = sn * vkp + c * vkq;
                }
            }
        }
    }
    if !converged && off_norm(&a) > tol {
        return Err(Error::NoConvergence {
            sweeps: MAX_JACOBI_SWEEPS,
        });
    }

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| a[j * m + j].total_cmp(&a[i * m + i]));

    let eigenvalues: Vec<f64> = order.iter().map(|&k| a[k * m + k]).collect();
    let mut eigenvectors = DMatrix::zeros(m, m);
    for (col, &k) in order.iter().enumerate() {
        let max = (0..m).fold(0.0_f64, |acc, r| acc.max(v[r * m + k].abs()));
        let lead = (0..m)
            .find(|&r| v[r * m + k].abs() >= max - 1e-12)
            .unwrap_or(0);
        let sign = if v[lead * m + k] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..m {
            eigenvectors[(r, col)] = sign * v[r * m + k];
        }
    }
    Ok(SpectralDecomp {
        eigenvalues,
        eigenvectors,
    })
}

pub fn classify(s: &SymMatrix) -> Result<DefinitenessClass> {
    Ok(spectral_decompose(s)?.definiteness())
}

/// `S^alpha = U diag(lambda^alpha) U^T`.
///
/// Non-positive powers need a positive definite input. Positive powers accept
/// semi-definite input: eigenvalues within `-tau_psd` are clamped to zero and
/// `0^alpha = 0`.
pub fn matrix_power(s: &SymMatrix, alpha: f64) -> Result<SymMatrix> {
    if !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "power {alpha} is not finite"
        )));
    }
    let sd = spectral_decompose(s)?;
    let powered = sd.powered_eigenvalues(alpha)?;
    Ok(sd.compose(&powered))
}

pub fn matrix_log(s: &SymMatrix) -> Result<SymMatrix> {
    let sd = spectral_decompose(s)?;
    let logs = sd.log_eigenvalues()?;
    Ok(sd.compose(&logs))
}

pub fn matrix_exp(s: &SymMatrix) -> Result<SymMatrix> {
    let sd = spectral_decompose(s)?;
    let exps: Vec<f64> = sd.eigenvalues.iter().map(|l| l.exp()).collect();
    Ok(sd.compose(&exps))
}
