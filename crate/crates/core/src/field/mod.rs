//! Tensor fields: per-subject normalisation, ball neighbourhoods on a regular
//! grid, and a map of the fitted power across neighbourhoods.

mod io;
mod synthetic;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::format_sig;
use crate::likelihood::{fit_alpha, AlphaFit, AlphaGrid};
use crate::spd::{spectral_decompose, SymMatrix};

pub use io::{load_field, read_field, save_field, write_field, FieldFormat, CSV_COLUMNS};
pub use synthetic::{generate_synthetic_field, SyntheticFieldSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelRecord {
    pub subject: String,
    /// Millimetres.
    pub position: [f64; 3],
    pub tensor: SymMatrix,
}

impl VoxelRecord {
    fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.subject
            .cmp(&other.subject)
            .then_with(|| cmp_slices(&self.position, &other.position))
            .then_with(|| cmp_slices(self.tensor.vech(), other.tensor.vech()))
    }
}

fn cmp_slices(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// A non-empty collection of 3x3 voxel tensors from one or more subjects.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorField {
    records: Vec<VoxelRecord>,
    subjects: Vec<String>,
}

impl TensorField {
    pub fn new(records: Vec<VoxelRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyInput);
        }
        for r in &records {
            if r.tensor.dim() != 3 {
                return Err(Error::DimensionMismatch {
                    expected: 3,
                    found: r.tensor.dim(),
                });
            }
            if r.position.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        let mut subjects: Vec<String> = records.iter().map(|r| r.subject.clone()).collect();
        subjects.sort();
        subjects.dedup();
        Ok(Self { records, subjects })
    }

    pub fn records(&self) -> &[VoxelRecord] {
        &self.records
    }

    /// Distinct subject ids, sorted.
    pub fn subjects(&self) -> &[String] {
        &self.subjects
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Every tensor multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let records = self
            .records
            .iter()
            .map(|r| VoxelRecord {
                tensor: r.tensor.scale(c),
                ..r.clone()
            })
            .collect();
        Self {
            records,
            subjects: self.subjects.clone(),
        }
    }

    /// Arithmetic mean tensor of each subject, in [`TensorField::subjects`] order.
    pub fn subject_means(&self) -> Vec<SymMatrix> {
        let mut sums: BTreeMap<&str, (SymMatrix, usize)> = BTreeMap::new();
        for r in &self.records {
            let entry = sums
                .entry(&r.subject)
                .or_insert_with(|| (SymMatrix::zeros(3), 0));
            entry.0 = &entry.0 + &r.tensor;
            entry.1 += 1;
        }
        sums.into_values()
            .map(|(s, n)| s.scale(1.0 / n as f64))
            .collect()
    }
}

/// Divides each subject's tensors by the Frobenius norm of that subject's
/// arithmetic mean tensor.
pub fn normalize_subjects(field: &TensorField) -> Result<TensorField> {
    let mut factor = HashMap::new();
    for (subject, mean) in field.subjects.iter().zip(field.subject_means()) {
        let norm = mean.frobenius_norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Degenerate(format!(
                "subject {subject} has a zero mean tensor"
            )));
        }
        factor.insert(subject.as_str(), 1.0 / norm);
    }
    let records = field
        .records
        .iter()
        .map(|r| VoxelRecord {
            tensor: r.tensor.scale(factor[r.subject.as_str()]),
            ..r.clone()
        })
        .collect();
    Ok(TensorField {
        records,
        subjects: field.subjects.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodSpec {
    /// Grid spacing in mm.
    pub spacing: f64,
    /// Ball radius in mm; membership is `distance <= radius`.
    pub radius: f64,
    /// Minimum voxels every subject must have inside the ball.
    pub n_v_min: usize,
    /// Grid points sit at `offset + k * spacing`.
    pub offset: [f64; 3],
}

impl Default for NeighborhoodSpec {
    fn default() -> Self {
        Self {
            spacing: 2.0,
            radius: 0.7,
            n_v_min: 15,
            offset: [0.0; 3],
        }
    }
}

impl NeighborhoodSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0) || !self.spacing.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "grid spacing {} must be positive",
                self.spacing
            )));
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "radius {} must be positive",
                self.radius
            )));
        }
        if self.n_v_min == 0 {
            return Err(Error::InvalidArgument("n_v_min must be at least 1".into()));
        }
        if self.offset.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectMembers {
    pub subject: String,
    pub records: Vec<VoxelRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub center: [f64; 3],
    /// One entry per subject of the field, in sorted subject order.
    pub members: Vec<SubjectMembers>,
    /// Smallest per-subject voxel count in the ball.
    pub n_v: usize,
}

impl Neighborhood {
    /// Total tensors across subjects.
    pub fn total(&self) -> usize {
        self.members.iter().map(|m| m.records.len()).sum()
    }

    /// Pooled tensors, subject by subject.
    pub fn tensors(&self) -> Vec<SymMatrix> {
        self.members
            .iter()
            .flat_map(|m| m.records.iter().map(|r| r.tensor.clone()))
            .collect()
    }
}

struct Buckets {
    cell: f64,
    offset: [f64; 3],
    map: HashMap<[i64; 3], Vec<usize>>,
}

impl Buckets {
    fn new(records: &[VoxelRecord], cell: f64, offset: [f64; 3]) -> Self {
        let mut map: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
        let mut b = Self {
            cell,
            offset,
            map: HashMap::new(),
        };
        for (i, r) in records.iter().enumerate() {
            map.entry(b.key(&r.position)).or_default().push(i);
        }
        b.map = map;
        b
    }

    fn key(&self, p: &[f64; 3]) -> [i64; 3] {
        std::array::from_fn(|d| ((p[d] - self.offset[d]) / self.cell).floor() as i64)
    }

    fn candidates(&self, center: &[f64; 3], radius: f64) -> impl Iterator<Item = usize> + '_ {
        let lo = self.key(&std::array::from_fn(|d| center[d] - radius));
        let hi = self.key(&std::array::from_fn(|d| center[d] + radius));
        (lo[0]..=hi[0])
            .flat_map(move |i| {
                (lo[1]..=hi[1]).flat_map(move |j| (lo[2]..=hi[2]).map(move |k| [i, j, k]))
            })
            .filter_map(|key| self.map.get(&key))
            .flatten()
            .copied()
    }
}

/// Balls of the given radius around the grid points near the field, kept when
/// every subject contributes at least `n_v_min` voxels. The result is in grid
/// order (x, then y, then z index) and does not depend on record order.
pub fn extract_neighborhoods(
    field: &TensorField,
    spec: &NeighborhoodSpec,
) -> Result<Vec<Neighborhood>> {
    spec.validate()?;
    let records = &field.records;
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for r in records {
        for d in 0..3 {
            lo[d] = lo[d].min(r.position[d]);
            hi[d] = hi[d].max(r.position[d]);
        }
    }
    let (s, rad) = (spec.spacing, spec.radius);
    let k_lo: [i64; 3] =
        std::array::from_fn(|d| ((lo[d] - rad - spec.offset[d]) / s).ceil() as i64);
    let k_hi: [i64; 3] =
        std::array::from_fn(|d| ((hi[d] + rad - spec.offset[d]) / s).floor() as i64);
    let buckets = Buckets::new(records, rad, spec.offset);
    let subject_index: HashMap<&str, usize> = field
        .subjects
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();

    let mut out = Vec::new();
    for i in k_lo[0]..=k_hi[0] {
        for j in k_lo[1]..=k_hi[1] {
            for k in k_lo[2]..=k_hi[2] {
                let center = [
                    spec.offset[0] + i as f64 * s,
                    spec.offset[1] + j as f64 * s,
                    spec.offset[2] + k as f64 * s,
                ];
                let mut groups: Vec<Vec<VoxelRecord>> = vec![Vec::new(); field.subjects.len()];
                for idx in buckets.candidates(&center, rad) {
                    let r = &records[idx];
                    let d2: f64 = (0..3).map(|d| (r.position[d] - center[d]).powi(2)).sum();
                    if d2 <= rad * rad {
                        groups[subject_index[r.subject.as_str()]].push(r.clone());
                    }
                }
                let n_v = groups.iter().map(Vec::len).min().unwrap_or(0);
                if n_v < spec.n_v_min {
                    continue;
                }
                let members = field
                    .subjects
                    .iter()
                    .zip(groups)
                    .map(|(subject, mut records)| {
                        records.sort_by(VoxelRecord::canonical_cmp);
                        SubjectMembers {
                            subject: subject.clone(),
                            records,
                        }
                    })
                    .collect();
                out.push(Neighborhood {
                    center,
                    members,
                    n_v,
                });
            }
        }
    }
    Ok(out)
}

/// Indices of `centers` in left-to-right sweep order: sorted by projection on
/// the first principal axis of the centre cloud, then on the second and third.
/// Projections are quantised to 1e-6 mm so rounding noise cannot reorder ties.
pub fn sweep_order(centers: &[[f64; 3]]) -> Vec<usize> {
    let n = centers.len();
    let mut order: Vec<usize> = (0..n).collect();
    if n < 2 {
        return order;
    }
    let mean: [f64; 3] =
        std::array::from_fn(|d| centers.iter().map(|c| c[d]).sum::<f64>() / n as f64);
    let cov = SymMatrix::from_fn(3, |a, b| {
        centers
            .iter()
            .map(|c| (c[a] - mean[a]) * (c[b] - mean[b]))
            .sum::<f64>()
            / n as f64
    });
    let axes = match spectral_decompose(&cov) {
        Ok(sd) => sd.eigenvectors,
        Err(_) => nalgebra::DMatrix::identity(3, 3),
    };
    let keys: Vec<[i64; 3]> = centers
        .iter()
        .map(|c| {
            std::array::from_fn(|a| {
                let proj: f64 = (0..3).map(|d| (c[d] - mean[d]) * axes[(d, a)]).sum();
                (proj * 1e6).round() as i64
            })
        })
        .collect();
    order.sort_by(|&i, &j| keys[i].cmp(&keys[j]).then(i.cmp(&j)));
    order
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMapEntry {
    pub center: [f64; 3],
    /// Tensors pooled into the fit.
    pub n: usize,
    pub n_v: usize,
    pub fit: std::result::Result<AlphaFit, Error>,
}

impl AlphaMapEntry {
    pub fn status(&self) -> &'static str {
        match &self.fit {
            Ok(_) => "ok",
            Err(e) => e.kind(),
        }
    }

    pub fn alpha_hat(&self) -> Option<f64> {
        self.fit.as_ref().ok().map(|f| f.alpha_hat)
    }
}

/// Fits the power separately in each neighbourhood, pooling all subjects.
/// Entries come back in sweep order; a failed fit is recorded, not raised.
pub fn fit_neighborhoods(
    neighborhoods: &[Neighborhood],
    grid: &AlphaGrid,
    ci_drop: f64,
) -> Vec<AlphaMapEntry> {
    let centers: Vec<[f64; 3]> = neighborhoods.iter().map(|h| h.center).collect();
    sweep_order(&centers)
        .into_par_iter()
        .map(|i| {
            let h = &neighborhoods[i];
            AlphaMapEntry {
                center: h.center,
                n: h.total(),
                n_v: h.n_v,
                fit: fit_alpha(&h.tensors(), grid, ci_drop),
            }
        })
        .collect()
}

pub fn estimate_alpha_map(
    field: &TensorField,
    grid: &AlphaGrid,
    ci_drop: f64,
    spec: &NeighborhoodSpec,
) -> Result<Vec<AlphaMapEntry>> {
    let neighborhoods = extract_neighborhoods(field, spec)?;
    Ok(fit_neighborhoods(&neighborhoods, grid, ci_drop))
}

/// Running mean over a window of `2 * bandwidth + 1`, narrowed symmetrically
/// near the ends so that every window stays centred.
pub fn running_mean(values: &[f64], bandwidth: usize) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            let h = bandwidth.min(i).min(n - 1 - i);
            values[i - h..=i + h].iter().sum::<f64>() / (2 * h + 1) as f64
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothedPoint {
    /// Position in the entry list the point came from.
    pub index: usize,
    pub alpha: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Smooths the estimate and both interval limits along the sweep. Failed
/// entries are skipped.
pub fn smooth_alpha_profile(entries: &[AlphaMapEntry], bandwidth: usize) -> Vec<SmoothedPoint> {
    let fitted: Vec<(usize, &AlphaFit)> = entries
        .iter()
        .enumerate()
        .filter_map(|(i, e)| e.fit.as_ref().ok().map(|f| (i, f)))
        .collect();
    let series = |get: fn(&AlphaFit) -> f64| {
        running_mean(
            &fitted.iter().map(|(_, f)| get(f)).collect::<Vec<_>>(),
            bandwidth,
        )
    };
    let alpha = series(|f| f.alpha_hat);
    let lo = series(|f| f.ci_lo);
    let hi = series(|f| f.ci_hi);
    fitted
        .iter()
        .enumerate()
        .map(|(k, (index, _))| SmoothedPoint {
            index: *index,
            alpha: alpha[k],
            ci_lo: lo[k],
            ci_hi: hi[k],
        })
        .collect()
}

pub const ALPHA_MAP_HEADER: &str = "cx,cy,cz,n,alpha_hat,ci_lo,ci_hi,status";
pub const PROFILE_HEADER: &str = "index,alpha_smooth,ci_lo_smooth,ci_hi_smooth";

pub fn write_alpha_map_csv<W: Write>(mut w: W, entries: &[AlphaMapEntry]) -> Result<()> {
    let f = |x: f64| format_sig(x, 12);
    writeln!(w, "{ALPHA_MAP_HEADER}")?;
    for e in entries {
        let [cx, cy, cz] = e.center;
        let (a, lo, hi) = match &e.fit {
            Ok(fit) => (f(fit.alpha_hat), f(fit.ci_lo), f(fit.ci_hi)),
            Err(_) => Default::default(),
        };
        writeln!(
            w,
            "{},{},{},{},{a},{lo},{hi},{}",
            f(cx),
            f(cy),
            f(cz),
            e.n,
            e.status()
        )?;
    }
    Ok(())
}

pub fn write_profile_csv<W: Write>(mut w: W, points: &[SmoothedPoint]) -> Result<()> {
    let f = |x: f64| format_sig(x, 12);
    writeln!(w, "{PROFILE_HEADER}")?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{}",
            p.index,
            f(p.alpha),
            f(p.ci_lo),
            f(p.ci_hi)
        )?;
    }
    Ok(())
}
