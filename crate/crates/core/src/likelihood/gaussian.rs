//! Multivariate Gaussian on `vech` coordinates.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spd::{spectral_decompose, SymMatrix};

/// Condition number above which a covariance is treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub mu: Vec<f64>,
    pub sigma: SymMatrix,
}

impl GaussianParams {
    pub fn new(mu: Vec<f64>, sigma: SymMatrix) -> Result<Self> {
        if mu.len() != sigma.dim() {
            return Err(Error::DimensionMismatch {
                expected: sigma.dim(),
                found: mu.len(),
            });
        }
        Ok(Self { mu, sigma })
    }

    /// Maximum likelihood fit: sample mean and covariance with divisor `n`.
    pub fn fit_mle(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyInput)?;
        let p = first.len();
        let n = rows.len() as f64;
        let mut mu = vec![0.0; p];
        for row in rows {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: row.len(),
                });
            }
            for (acc, x) in mu.iter_mut().zip(row) {
                *acc += x;
            }
        }
        mu.iter_mut().for_each(|x| *x /= n);
        let mut cov = vec![0.0; p * p];
        for row in rows {
            for i in 0..p {
                let di = row[i] - mu[i];
                for j in i..p {
                    cov[i * p + j] += di * (row[j] - mu[j]);
                }
            }
        }
        let sigma = SymMatrix::from_fn(p, |i, j| cov[i * p + j] / n);
        Ok(Self { mu, sigma })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Checks conditioning and factorises the covariance.
    pub fn density(&self) -> Result<GaussianDensity> {
        let eig = spectral_decompose(&self.sigma)?;
        let max = eig.eigenvalues[0];
        let min = *eig.eigenvalues.last().unwrap();
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        if !(condition <= MAX_CONDITION) {
            return Err(Error::SingularSigma { condition });
        }
        let chol =
            Cholesky::new(self.sigma.to_dmatrix()).ok_or(Error::SingularSigma { condition })?;
        let log_det = 2.0
            * chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|x| x.ln())
                .sum::<f64>();
        Ok(GaussianDensity {
            mu: DVector::from_column_slice(&self.mu),
            chol,
            log_det,
        })
    }

    pub fn log_pdf(&self, x: &[f64]) -> Result<f64> {
        self.density()?.log_pdf(x)
    }
}

/// A Gaussian with its covariance already factorised.
#[derive(Debug, Clone)]
pub struct GaussianDensity {
    mu: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl GaussianDensity {
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn log_pdf(&self, x: &[f64]) -> Result<f64> {
        let p = self.mu.len();
        if x.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: x.len(),
            });
        }
        let r = DVector::from_column_slice(x) - &self.mu;
        let z = self
            .chol
            .l_dirty()
            .solve_lower_triangular(&r)
            .ok_or(Error::SingularSigma {
                condition: f64::INFINITY,
            })?;
        Ok(-0.5 * (p as f64 * LN_2PI + self.log_det + z.norm_squared()))
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let l = self.chol.l();
        &l * l.transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn univariate_log_pdf() {
        let g = GaussianParams::new(vec![1.0], SymMatrix::from_diag(&[4.0])).unwrap();
        let expect = -0.5 * ((2.0 * std::f64::consts::PI * 4.0).ln() + 0.25);
        assert_abs_diff_eq!(g.log_pdf(&[2.0]).unwrap(), expect, epsilon = 1e-14);
    }

    #[test]
    fn correlated_log_pdf_matches_explicit_inverse() {
        let sigma = SymMatrix::from_vech(2, vec![2.0, 0.5, 1.0]).unwrap();
        let g = GaussianParams::new(vec![0.5, -1.0], sigma.clone()).unwrap();
        let x = [1.5, 0.0];
        let s = sigma.to_dmatrix();
        let inv = s.clone().try_inverse().unwrap();
        let r = DVector::from_column_slice(&[1.0, 1.0]);
        let quad = (r.transpose() * inv * &r)[(0, 0)];
        let expect = -0.5 * (2.0 * LN_2PI + s.determinant().ln() + quad);
        assert_abs_diff_eq!(g.log_pdf(&x).unwrap(), expect, epsilon = 1e-13);
    }

    #[test]
    fn mle_uses_divisor_n() {
        let rows = vec![vec![0.0, 1.0], vec![2.0, 1.0], vec![4.0, 4.0]];
        let g = GaussianParams::fit_mle(&rows).unwrap();
        assert_eq!(g.mu, vec![2.0, 2.0]);
        assert_abs_diff_eq!(g.sigma.get(0, 0), 8.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g.sigma.get(0, 1), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(g.sigma.get(1, 1), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn singular_covariance_is_reported() {
        let rows = vec![vec![1.0, 2.0]; 5];
        let g = GaussianParams::fit_mle(&rows).unwrap();
        assert!(matches!(g.density(), Err(Error::SingularSigma { .. })));
        let ill = GaussianParams::new(vec![0.0, 0.0], SymMatrix::from_diag(&[1.0, 1e-13])).unwrap();
        assert!(matches!(ill.density(), Err(Error::SingularSigma { .. })));
        let ok = GaussianParams::new(vec![0.0, 0.0], SymMatrix::from_diag(&[1.0, 1e-11])).unwrap();
        assert!(ok.density().is_ok());
    }

    #[test]
    fn dimension_checks() {
        assert!(GaussianParams::new(vec![0.0], SymMatrix::identity(2)).is_err());
        assert!(GaussianParams::fit_mle(&[]).is_err());
        assert!(GaussianParams::fit_mle(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        let g = GaussianParams::new(vec![0.0, 0.0], SymMatrix::identity(2)).unwrap();
        assert!(g.log_pdf(&[1.0]).is_err());
    }
}
