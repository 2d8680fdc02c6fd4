//! Power-Euclidean geometry for symmetric positive semi-definite matrices.
//!
//! The crate covers the power-Euclidean family of metrics `(1/a)||S1^a - S2^a||`
//! (with the log-Euclidean metric at `a = 0`), closed-form Frechet means,
//! power fractional anisotropy, and likelihood-based selection of the power
//! `a` for a sample of tensors, including Monte Carlo coverage studies and
//! the neighborhood pipeline for diffusion tensor fields.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

// lets shared test oracles name the crate the same way from inside and outside
extern crate self as spd_power;

pub mod error;
pub mod field;
pub mod format;
pub mod likelihood;
pub mod metrics;
pub mod simulation;
pub mod spd;
pub mod stats;

#[cfg(test)]
#[path = "../tests/common/oracle.rs"]
mod test_oracle;

pub use error::{Error, Result};
pub use field::{
    estimate_alpha_map, extract_neighborhoods, load_field, normalize_subjects,
    smooth_alpha_profile, AlphaMapEntry, FieldFormat, Neighborhood, NeighborhoodSpec, TensorField,
    VoxelRecord,
};
pub use format::format_sig;
pub use likelihood::{
    fit_alpha, log_density_s, log_jacobian_ratio, power_transform, profile_loglik, AlphaFit,
    AlphaGrid, GaussianParams, ProfileModel, ProfilePoint,
};
pub use metrics::{
    dist_log_euclidean, dist_power, dist_procrustes_power, frobenius_norm, PowerParam,
    ProcrustesFit,
};
pub use simulation::{run_coverage, sample_tensor, CoverageReport, SimDesign, TensorSampler};
pub use spd::{
    classify, matrix_exp, matrix_log, matrix_power, spectral_decompose, unvech, vech,
    DefinitenessClass, SpectralDecomp, SymMatrix,
};
pub use stats::{fractional_anisotropy, frechet_mean, interpolate, FrechetMeanResult};
