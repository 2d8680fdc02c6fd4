//! Synthetic multi-subject lattice fields drawn from the simulation model.

use serde::{Deserialize, Serialize};

use super::{TensorField, VoxelRecord};
use crate::error::{Error, Result};
use crate::simulation::{replication_rng, TensorSampler};
use crate::spd::SymMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticFieldSpec {
    pub n_subjects: usize,
    /// Lattice pitch in mm.
    pub pitch: f64,
    /// The lattice covers `[0, extent]` on each axis.
    pub extent: f64,
    /// `vech` of the mean of `X`.
    pub mu: Vec<f64>,
    pub sigma2: f64,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for SyntheticFieldSpec {
    fn default() -> Self {
        Self {
            n_subjects: 9,
            pitch: 0.4,
            extent: 10.0,
            mu: SymMatrix::from_diag(&[2.0, 1.0, 1.0]).into_vech(),
            sigma2: 0.02,
            alpha: 0.3,
            seed: 1,
        }
    }
}

/// Every subject gets an independent draw at every lattice site, from its own
/// random stream.
pub fn generate_synthetic_field(spec: &SyntheticFieldSpec) -> Result<TensorField> {
    if spec.n_subjects == 0 {
        return Err(Error::InvalidArgument(
            "at least one subject is required".into(),
        ));
    }
    if !(spec.pitch > 0.0) || !(spec.extent >= 0.0) || !spec.extent.is_finite() {
        return Err(Error::InvalidArgument(
            "pitch must be positive and extent nonnegative".into(),
        ));
    }
    let sampler = TensorSampler::new(3, spec.mu.clone(), spec.sigma2, spec.alpha)?;
    let per_axis = (spec.extent / spec.pitch + 1e-9).floor() as usize + 1;
    let width = spec.n_subjects.to_string().len().max(2);
    let mut records = Vec::with_capacity(spec.n_subjects * per_axis.pow(3));
    for s in 0..spec.n_subjects {
        let subject = format!("subject{:0width$}", s + 1);
        let mut rng = replication_rng(spec.seed, s as u64);
        for i in 0..per_axis {
            for j in 0..per_axis {
                for k in 0..per_axis {
                    let position = [
                        i as f64 * spec.pitch,
                        j as f64 * spec.pitch,
                        k as f64 * spec.pitch,
                    ];
                    let (tensor, _) = sampler.sample(&mut rng)?;
                    records.push(VoxelRecord {
                        subject: subject.clone(),
                        position,
                        tensor,
                    });
                }
            }
        }
    }
    TensorField::new(records)
}
