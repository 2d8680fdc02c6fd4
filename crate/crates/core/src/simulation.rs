//! Monte Carlo coverage of the profile-likelihood confidence interval.
//!
//! Tensors are generated as `S = (alpha X)^(1/alpha)` with
//! `vech(X) ~ N(mu, sigma^2 I)`, so that `vech(S^alpha / alpha)` is exactly
//! Gaussian at the true power. Each replication draws from its own ChaCha
//! stream (`seed`, stream = replication index), which makes results
//! independent of thread count and scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{fit_alpha, AlphaGrid, DEFAULT_CI_DROP};
use crate::spd::{spectral_decompose, vech_len, DefinitenessClass, SymMatrix};

/// Draws allowed per tensor before the design is declared infeasible.
pub const MAX_REJECTIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDesign {
    pub m: usize,
    /// `vech` of the mean of `X`.
    pub mu: Vec<f64>,
    pub sigma2: f64,
    pub alpha_true: f64,
    pub n_v: usize,
    pub n_s: usize,
    pub grid: AlphaGrid,
    pub ci_drop: f64,
    pub replications: usize,
    pub seed: u64,
}

impl Default for SimDesign {
    fn default() -> Self {
        Self {
            m: 3,
            mu: SymMatrix::from_diag(&[2.0, 1.0, 1.0]).into_vech(),
            sigma2: 0.02,
            alpha_true: 0.3,
            n_v: 4,
            n_s: 5,
            grid: AlphaGrid::default(),
            ci_drop: DEFAULT_CI_DROP,
            replications: 1000,
            seed: 1,
        }
    }
}

impl SimDesign {
    pub fn with_size(mut self, n_v: usize, n_s: usize) -> Self {
        self.n_v = n_v;
        self.n_s = n_s;
        self
    }

    pub fn with_replications(mut self, replications: usize, seed: u64) -> Self {
        self.replications = replications;
        self.seed = seed;
        self
    }

    /// Tensors per replication, `n_v * n_s`.
    pub fn sample_size(&self) -> usize {
        self.n_v * self.n_s
    }

    pub fn validate(&self) -> Result<()> {
        let p = vech_len(self.m);
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.m == 0 {
            return bad("dimension must be at least 1".into());
        }
        if self.mu.len() != p {
            return bad(format!("mean has {} entries, expected {p}", self.mu.len()));
        }
        if self.mu.iter().any(|x| !x.is_finite()) || !self.alpha_true.is_finite() {
            return bad("design parameters must be finite".into());
        }
        if !(self.sigma2 > 0.0) || !self.sigma2.is_finite() {
            return bad(format!("sigma2 must be positive, got {}", self.sigma2));
        }
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if self.sample_size() <= p {
            return bad(format!(
                "n_v * n_s = {} must exceed {p} for the covariance fit",
                self.sample_size()
            ));
        }
        if !(self.ci_drop >= 0.0) {
            return bad(format!("ci_drop must be nonnegative, got {}", self.ci_drop));
        }
        Ok(())
    }

    pub fn sampler(&self) -> Result<TensorSampler> {
        TensorSampler::new(self.m, self.mu.clone(), self.sigma2, self.alpha_true)
    }
}

/// Generator for `S = (alpha X)^(1/alpha)`, `vech(X) ~ N(mu, sigma^2 I)`
/// (`S = exp X` at `alpha = 0`).
#[derive(Debug, Clone)]
pub struct TensorSampler {
    m: usize,
    mu: Vec<f64>,
    sigma: f64,
    alpha: f64,
}

impl TensorSampler {
    pub fn new(m: usize, mu: Vec<f64>, sigma2: f64, alpha: f64) -> Result<Self> {
        if mu.len() != vech_len(m) {
            return Err(Error::LengthMismatch {
                len: mu.len(),
                dim: m,
                expected: vech_len(m),
            });
        }
        if !(sigma2 >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidArgument("sigma2 must be nonnegative".into()));
        }
        Ok(Self {
            m,
            mu,
            sigma: sigma2.sqrt(),
            alpha,
        })
    }

    /// One tensor and the number of rejected draws that preceded it.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(SymMatrix, usize)> {
        for rejected in 0..MAX_REJECTIONS {
            let v: Vec<f64> = self
                .mu
                .iter()
                .map(|mu| mu + self.sigma * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let x = SymMatrix::from_vech(self.m, v)?;
            if self.alpha == 0.0 {
                return Ok((crate::spd::matrix_exp(&x)?, rejected));
            }
            let eig = spectral_decompose(&x.scale(self.alpha))?;
            if eig.definiteness() != DefinitenessClass::PositiveDefinite {
                continue;
            }
            let inv = 1.0 / self.alpha;
            let values: Vec<f64> = eig.eigenvalues.iter().map(|l| l.powf(inv)).collect();
            return Ok((eig.compose(&values), rejected));
        }
        Err(Error::RejectionLimit {
            attempts: MAX_REJECTIONS,
        })
    }
}

pub fn sample_tensor<R: Rng + ?Sized>(design: &SimDesign, rng: &mut R) -> Result<SymMatrix> {
    Ok(design.sampler()?.sample(rng)?.0)
}

/// RNG for replication `index` of a run seeded with `seed`.
pub fn replication_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub design: SimDesign,
    /// Fraction of successful replications whose interval contains the truth.
    pub coverage: f64,
    /// `sqrt(p (1 - p) / replications)`.
    pub mc_stderr: f64,
    pub covered: usize,
    pub failures: usize,
    pub rejections: usize,
}

impl CoverageReport {
    pub const CSV_HEADER: &'static str = "n_v,n_s,replications,coverage,mc_stderr,failures,seed";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.design.n_v,
            self.design.n_s,
            self.design.replications,
            self.coverage,
            self.mc_stderr,
            self.failures,
            self.design.seed
        )
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "n_v": self.design.n_v,
            "n_s": self.design.n_s,
            "replications": self.design.replications,
            "coverage": self.coverage,
            "mc_stderr": self.mc_stderr,
            "failures": self.failures,
            "seed": self.design.seed,
            "covered": self.covered,
            "rejections": self.rejections,
            "alpha_true": self.design.alpha_true,
            "sigma2": self.design.sigma2,
            "mu": self.design.mu,
            "grid": self.design.grid,
            "ci_drop": self.design.ci_drop,
        })
    }
}

enum Outcome {
    Fitted { covered: bool, rejections: usize },
    Failed { rejections: usize },
}

fn run_replication(design: &SimDesign, sampler: &TensorSampler, index: usize) -> Result<Outcome> {
    let mut rng = replication_rng(design.seed, index as u64);
    let mut rejections = 0;
    let mut samples = Vec::with_capacity(design.sample_size());
    for _ in 0..design.sample_size() {
        let (s, r) = sampler.sample(&mut rng)?;
        rejections += r;
        samples.push(s);
    }
    Ok(match fit_alpha(&samples, &design.grid, design.ci_drop) {
        Ok(fit) => Outcome::Fitted {
            covered: fit.ci_contains(design.alpha_true),
            rejections,
        },
        Err(_) => Outcome::Failed { rejections },
    })
}

/// Replicates the design and counts how often the interval covers `alpha_true`.
pub fn run_coverage(design: &SimDesign) -> Result<CoverageReport> {
    design.validate()?;
    let sampler = design.sampler()?;
    let outcomes = (0..design.replications)
        .into_par_iter()
        .map(|i| run_replication(design, &sampler, i))
        .collect::<Result<Vec<_>>>()?;

    let (mut covered, mut failures, mut rejections) = (0, 0, 0);
    for outcome in outcomes {
        match outcome {
            Outcome::Fitted {
                covered: c,
                rejections: r,
            } => {
                covered += c as usize;
                rejections += r;
            }
            Outcome::Failed { rejections: r } => {
                failures += 1;
                rejections += r;
            }
        }
    }
    let successes = design.replications - failures;
    let coverage = if successes > 0 {
        covered as f64 / successes as f64
    } else {
        0.0
    };
    let mc_stderr = (coverage * (1.0 - coverage) / design.replications as f64).sqrt();
    Ok(CoverageReport {
        design: design.clone(),
        coverage,
        mc_stderr,
        covered,
        failures,
        rejections,
    })
}
