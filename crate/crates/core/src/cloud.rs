//! Point clouds as weighted empirical measures, plus centering and covariance.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Result, RiswieError};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// An `n x d` sample with nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Array2<f64>,
    weights: Array1<f64>,
    uniform: bool,
    id: Option<String>,
}

impl PointCloud {
    /// Uniformly weighted cloud.
    pub fn new(points: Array2<f64>) -> Result<Self> {
        let n = points.nrows();
        Self::check_points(&points)?;
        Ok(Self {
            weights: Array1::from_elem(n, 1.0 / n as f64),
            points,
            uniform: true,
            id: None,
        })
    }

    pub fn with_weights(points: Array2<f64>, weights: Array1<f64>) -> Result<Self> {
        Self::check_points(&points)?;
        if weights.len() != points.nrows() {
            return Err(RiswieError::LengthMismatch {
                left: points.nrows(),
                right: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(RiswieError::InvalidCloud(
                "weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = weights.sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(RiswieError::InvalidCloud(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        let first = weights[0];
        let uniform = weights.iter().all(|w| *w == first);
        Ok(Self {
            points,
            weights,
            uniform,
            id: None,
        })
    }

    /// Build from row vectors. Rows must share one length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(RiswieError::InvalidCloud("cloud has no points".into()));
        }
        let d = rows[0].len();
        let mut flat = Vec::with_capacity(n * d);
        for row in rows {
            if row.len() != d {
                return Err(RiswieError::DimensionMismatch {
                    expected: d,
                    got: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        let points = Array2::from_shape_vec((n, d), flat)
            .map_err(|e| RiswieError::InvalidCloud(e.to_string()))?;
        Self::new(points)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = Some(id.into());
        self
    }

    fn check_points(points: &Array2<f64>) -> Result<()> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(RiswieError::InvalidCloud(format!(
                "shape {}x{} is empty",
                points.nrows(),
                points.ncols()
            )));
        }
        if let Some((idx, _)) = points.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(RiswieError::InvalidCloud(format!(
                "non-finite coordinate at row {}, column {}",
                idx.0, idx.1
            )));
        }
        Ok(())
    }

    pub fn points(&self) -> &Array2<f64> {
        &self.points
    }

    pub fn weights(&self) -> &Array1<f64> {
        &self.weights
    }

    pub fn id(&self) -> Option<&str> {
        self.id.as_deref()
    }

    /// True when every weight is exactly `1/n`.
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.points.row(i)
    }

    pub fn mean(&self) -> Array1<f64> {
        let d = self.dim();
        let mut mean = Array1::zeros(d);
        for (row, &w) in self.points.axis_iter(Axis(0)).zip(self.weights.iter()) {
            mean.scaled_add(w, &row);
        }
        mean
    }

    /// Sum of per-coordinate weighted variances, i.e. the trace of the covariance.
    pub fn total_variance(&self) -> f64 {
        let mean = self.mean();
        self.points
            .axis_iter(Axis(0))
            .zip(self.weights.iter())
            .map(|(row, &w)| {
                w * row
                    .iter()
                    .zip(mean.iter())
                    .map(|(x, m)| (x - m) * (x - m))
                    .sum::<f64>()
            })
            .sum()
    }

    /// Apply `x -> R x + t` to every point. `rotation` is `d_out x d`.
    pub fn transformed(&self, rotation: &Array2<f64>, translation: &Array1<f64>) -> Result<Self> {
        if rotation.ncols() != self.dim() {
            return Err(RiswieError::DimensionMismatch {
                expected: self.dim(),
                got: rotation.ncols(),
            });
        }
        if translation.len() != rotation.nrows() {
            return Err(RiswieError::DimensionMismatch {
                expected: rotation.nrows(),
                got: translation.len(),
            });
        }
        let mut points = self.points.dot(&rotation.t());
        for mut row in points.axis_iter_mut(Axis(0)) {
            row += translation;
        }
        Self::check_points(&points)?;
        Ok(Self {
            points,
            weights: self.weights.clone(),
            uniform: self.uniform,
            id: self.id.clone(),
        })
    }
}

/// Subtract the weighted mean from every point.
pub fn center(cloud: &PointCloud) -> PointCloud {
    let mean = cloud.mean();
    let mut points = cloud.points.clone();
    for mut row in points.axis_iter_mut(Axis(0)) {
        row -= &mean;
    }
    PointCloud {
        points,
        weights: cloud.weights.clone(),
        uniform: cloud.uniform,
        id: cloud.id.clone(),
    }
}

/// Weighted covariance `sum_i w_i (x_i - mean)(x_i - mean)^T`. Centers internally.
pub fn covariance(cloud: &PointCloud) -> Array2<f64> {
    let d = cloud.dim();
    let mean = cloud.mean();
    let mut cov = Array2::<f64>::zeros((d, d));
    let mut centered = vec![0.0; d];
    for (row, &w) in cloud.points.axis_iter(Axis(0)).zip(cloud.weights.iter()) {
        for (c, (x, m)) in centered.iter_mut().zip(row.iter().zip(mean.iter())) {
            *c = x - m;
        }
        for a in 0..d {
            let wa = w * centered[a];
            for b in a..d {
                cov[[a, b]] += wa * centered[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            cov[[a, b]] = cov[[b, a]];
        }
    }
    cov
}
