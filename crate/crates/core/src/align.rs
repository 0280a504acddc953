//! Rigid maps recovered from a signed axis matching, and distances evaluated
//! after applying them.

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::embed::{EmbeddingBasis, EmbeddingConfig};
use crate::error::{Result, RiswieError};
use crate::matching::SignedMatch;
use crate::ot1d::sliced_w2sq;
use crate::riswie::{riswie_distance, RiswieResult};

/// `x -> rotation * x + translation`. The rotation may be improper.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidTransform {
    pub rotation: Array2<f64>,
    pub translation: Array1<f64>,
}

impl RigidTransform {
    pub fn identity(d: usize) -> Self {
        Self {
            rotation: Array2::eye(d),
            translation: Array1::zeros(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn apply(&self, cloud: &PointCloud) -> Result<PointCloud> {
        cloud.transformed(&self.rotation, &self.translation)
    }

    /// Largest entry of `|R^T R - I|`.
    pub fn orthogonality_error(&self) -> f64 {
        let g = self.rotation.t().dot(&self.rotation);
        g.indexed_iter().fold(0.0f64, |m, ((i, j), v)| {
            let target = if i == j { 1.0 } else { 0.0 };
            m.max((v - target).abs())
        })
    }

    pub fn determinant(&self) -> f64 {
        determinant(&self.rotation)
    }
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(m: &Array2<f64>) -> f64 {
    let n = m.nrows();
    let mut a = m.to_owned();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[[i, col]].abs().total_cmp(&a[[j, col]].abs()))
            .unwrap_or(col);
        if a[[pivot, col]] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for j in 0..n {
                a.swap([pivot, j], [col, j]);
            }
            det = -det;
        }
        det *= a[[col, col]];
        for i in (col + 1)..n {
            let f = a[[i, col]] / a[[col, col]];
            for j in col..n {
                a[[i, j]] -= f * a[[col, j]];
            }
        }
    }
    det
}

/// Rigid map taking `Y` onto `X`.
///
/// With unit axes `u_l` (rows of X's basis) and `v_m` (rows of Y's basis),
/// `R = sum_l eps_l u_l v_{pi(l)}^T` and `t = mean_x - R mean_y`. Both bases
/// must be linear with `k = d` so that `R` is orthogonal.
pub fn recover_transform(
    basis_x: &EmbeddingBasis,
    basis_y: &EmbeddingBasis,
    matching: &SignedMatch,
    mean_x: &Array1<f64>,
    mean_y: &Array1<f64>,
) -> Result<RigidTransform> {
    let (u, v) = match (basis_x.linear_axes(), basis_y.linear_axes()) {
        (Some(u), Some(v)) => (u, v),
        _ => return Err(RiswieError::NotFullBasis("per-point axes have no ambient rotation".into())),
    };
    let d = u.ncols();
    if v.ncols() != d {
        return Err(RiswieError::DimensionMismatch {
            expected: d,
            got: v.ncols(),
        });
    }
    if u.nrows() != d || v.nrows() != d {
        return Err(RiswieError::NotFullBasis(format!(
            "k={} axes in dimension {d}",
            u.nrows().min(v.nrows())
        )));
    }
    if matching.k() != d {
        return Err(RiswieError::AxisCountMismatch {
            left: d,
            right: matching.k(),
        });
    }
    if mean_x.len() != d || mean_y.len() != d {
        return Err(RiswieError::DimensionMismatch {
            expected: d,
            got: if mean_x.len() != d { mean_x.len() } else { mean_y.len() },
        });
    }
    let mut rotation = Array2::zeros((d, d));
    for (l, (&m, &sign)) in matching.permutation.iter().zip(&matching.signs).enumerate() {
        let s = f64::from(sign);
        for i in 0..d {
            let ui = s * u[[l, i]];
            for j in 0..d {
                rotation[[i, j]] += ui * v[[m, j]];
            }
        }
    }
    let translation = mean_x - &rotation.dot(mean_y);
    Ok(RigidTransform {
        rotation,
        translation,
    })
}

/// RISWIE distance together with the rigid map it induces from `Y` to `X`.
pub fn align(x: &PointCloud, y: &PointCloud, config: &EmbeddingConfig) -> Result<(RiswieResult, RigidTransform)> {
    let result = riswie_distance(x, y, config)?;
    let transform = recover_transform(&result.basis_a, &result.basis_b, &result.matching, &x.mean(), &y.mean())?;
    Ok((result, transform))
}

/// Distance evaluated after alignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BoostBase {
    /// Monte Carlo sliced W2 with a fixed direction seed.
    SlicedW2 { directions: usize, seed: u64 },
    /// `(mean_i min_j |x_i - y_j| + mean_j min_i |x_i - y_j|) / 2`, weighted by
    /// the cloud weights.
    MeanNearestNeighbor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Boosted {
    pub value: f64,
    pub transform: RigidTransform,
    pub riswie: RiswieResult,
}

/// Align `Y` onto `X` with the RISWIE transform, then evaluate `base`.
pub fn boosted_distance(x: &PointCloud, y: &PointCloud, base: BoostBase, config: &EmbeddingConfig) -> Result<Boosted> {
    let (riswie, transform) = align(x, y, config)?;
    let aligned = transform.apply(y)?;
    let value = base_distance(x, &aligned, base)?;
    Ok(Boosted {
        value,
        transform,
        riswie,
    })
}

/// Evaluate a base distance without alignment.
pub fn base_distance(x: &PointCloud, y: &PointCloud, base: BoostBase) -> Result<f64> {
    match base {
        BoostBase::SlicedW2 { directions, seed } => Ok(sliced_w2sq(x, y, directions, seed)?.sqrt()),
        BoostBase::MeanNearestNeighbor => mean_nearest_neighbor(x, y),
    }
}

fn mean_nearest_neighbor(x: &PointCloud, y: &PointCloud) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(RiswieError::DimensionMismatch {
            expected: x.dim(),
            got: y.dim(),
        });
    }
    let one_way = |a: &PointCloud, b: &PointCloud| -> f64 {
        a.points()
            .axis_iter(Axis(0))
            .zip(a.weights())
            .map(|(p, w)| {
                let best = b
                    .points()
                    .axis_iter(Axis(0))
                    .map(|q| p.iter().zip(q.iter()).map(|(s, t)| (s - t) * (s - t)).sum::<f64>())
                    .fold(f64::INFINITY, f64::min);
                w * best.sqrt()
            })
            .sum()
    };
    Ok(0.5 * (one_way(x, y) + one_way(y, x)))
}
