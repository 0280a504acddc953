use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::embed::EmbeddingConfig;
use crate::error::{Result, RiswieError};
use crate::matching::SoftParams;
use crate::riswie::{prepare, riswie_prepared, sriswie_prepared, PreparedCloud};

const SYMMETRY_TOL: f64 = 1e-9;

/// Labelled symmetric matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    ids: Vec<String>,
    values: Array2<f64>,
}

impl DistanceMatrix {
    /// Validates shape, finiteness, symmetry and the diagonal (all within
    /// `1e-9`). Entries must be nonnegative.
    pub fn new(ids: Vec<String>, values: Array2<f64>) -> Result<Self> {
        let m = ids.len();
        if values.nrows() != m || values.ncols() != m {
            return Err(RiswieError::DimensionMismatch {
                expected: m,
                got: if values.nrows() != m { values.nrows() } else { values.ncols() },
            });
        }
        if let Some(((r, c), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(RiswieError::NonFinite { row: r, col: c });
        }
        for i in 0..m {
            if values[[i, i]].abs() > SYMMETRY_TOL {
                return Err(RiswieError::InvalidParameter(format!(
                    "diagonal entry {i} is {}",
                    values[[i, i]]
                )));
            }
            for j in 0..m {
                if values[[i, j]] < 0.0 {
                    return Err(RiswieError::InvalidParameter(format!("negative entry at ({i}, {j})")));
                }
            }
        }
        let asym = crate::linalg::asymmetry(&values);
        if asym > SYMMETRY_TOL {
            return Err(RiswieError::NonSymmetric { asymmetry: asym });
        }
        Ok(Self { ids, values })
    }

    /// Ids `0..m` as strings.
    pub fn unlabeled(values: Array2<f64>) -> Result<Self> {
        let ids = (0..values.nrows()).map(|i| i.to_string()).collect();
        Self::new(ids, values)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    /// Strict upper triangle in row-major order.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let m = self.len();
        let mut out = Vec::with_capacity(m * m.saturating_sub(1) / 2);
        for i in 0..m {
            for j in (i + 1)..m {
                out.push(self.values[[i, j]]);
            }
        }
        out
    }
}

/// How each pair is compared.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DistanceConfig {
    pub embedding: EmbeddingConfig,
    /// Use the soft relaxation with these parameters instead of exact matching.
    pub soft: Option<SoftParams>,
}

/// All pairwise distances.
///
/// Every cloud is embedded once with a shared `k` (the configured value, or
/// the smallest ambient dimension in the list), then the upper triangle is
/// evaluated in parallel and mirrored. Each entry is computed by the same
/// sequential code whatever the worker count, so the output is bitwise
/// independent of scheduling.
pub fn pairwise_matrix(clouds: &[PointCloud], config: &DistanceConfig) -> Result<DistanceMatrix> {
    let m = clouds.len();
    if m < 2 {
        return Err(RiswieError::InvalidParameter(format!("need at least 2 clouds, got {m}")));
    }
    let k = config
        .embedding
        .k
        .unwrap_or_else(|| clouds.iter().map(|c| c.dim()).min().unwrap_or(1));
    let prepared: Vec<PreparedCloud> = clouds
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            prepare(c, &config.embedding, k).map_err(|e| RiswieError::Pair {
                i,
                j: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| ((i + 1)..m).map(move |j| (i, j))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let d = match &config.soft {
                None => riswie_prepared(&prepared[i], &prepared[j]).map(|r| r.distance),
                Some(p) => sriswie_prepared(&prepared[i], &prepared[j], p).map(|r| r.0),
            };
            d.map_err(|e| RiswieError::Pair {
                i,
                j,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let mut out = Array2::zeros((m, m));
    for (&(i, j), &v) in pairs.iter().zip(&values) {
        out[[i, j]] = v;
        out[[j, i]] = v;
    }
    let ids = clouds
        .iter()
        .enumerate()
        .map(|(i, c)| c.id().map(str::to_owned).unwrap_or_else(|| i.to_string()))
        .collect();
    DistanceMatrix::new(ids, out)
}

fn off_diagonal_range(d: &DistanceMatrix) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in d.upper_triangle() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

fn min_max_normalize(d: &DistanceMatrix, name: &str) -> Array2<f64> {
    let m = d.len();
    let (lo, hi) = off_diagonal_range(d);
    let mut out = Array2::zeros((m, m));
    if !(hi > lo) {
        log::warn!("{name} matrix has a constant off-diagonal; normalizing to zeros");
        return out;
    }
    for i in 0..m {
        for j in 0..m {
            if i != j {
                out[[i, j]] = (d.values[[i, j]] - lo) / (hi - lo);
            }
        }
    }
    out
}

/// `lambda * spatial' + (1 - lambda) * marker'` with each input min-max
/// scaled to `[0, 1]` over its off-diagonal entries.
pub fn hybrid_matrix(spatial: &DistanceMatrix, marker: &DistanceMatrix, lambda: f64) -> Result<DistanceMatrix> {
    if spatial.ids != marker.ids {
        return Err(RiswieError::IdMismatch);
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(RiswieError::InvalidParameter(format!("lambda {lambda} outside [0, 1]")));
    }
    let s = min_max_normalize(spatial, "spatial");
    let k = min_max_normalize(marker, "marker");
    let values = s * lambda + k * (1.0 - lambda);
    DistanceMatrix::new(spatial.ids.clone(), values)
}
