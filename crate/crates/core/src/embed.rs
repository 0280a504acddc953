//! Embedding axes for a single cloud and the sorted 1D marginals they induce.
//!
//! Three embeddings are supported:
//!
//! * PCA: the top-k eigenvectors of the centered covariance.
//! * Diffusion maps: the leading nontrivial eigenvectors of the symmetrically
//!   normalized heat kernel on a k-nearest-neighbour graph.
//! * Coordinate extraction: the first k standard basis vectors. This is a poor
//!   embedding on purpose; it can assign zero distance to non-congruent clouds.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::cloud::{covariance, PointCloud};
use crate::error::{Result, RiswieError};
use crate::linalg::eig_sym;
use crate::ot1d::SortedSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    Pca,
    Diffusion,
    Coordinate,
}

/// Axis functionals of an embedding.
#[derive(Debug, Clone, PartialEq)]
pub enum Axes {
    /// `k x d`, one unit row per axis.
    Linear(Array2<f64>),
    /// `n x k` coordinates of the cloud the basis was built from.
    PerPoint(Array2<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingBasis {
    pub kind: EmbeddingKind,
    pub axes: Axes,
    /// Eigenvalues for PCA, `lambda^t` for diffusion, 1 for coordinates.
    pub scales: Vec<f64>,
}

impl EmbeddingBasis {
    pub fn k(&self) -> usize {
        self.scales.len()
    }

    /// Linear axes as a `k x d` matrix, if this basis has them.
    pub fn linear_axes(&self) -> Option<&Array2<f64>> {
        match &self.axes {
            Axes::Linear(m) => Some(m),
            Axes::PerPoint(_) => None,
        }
    }
}

/// Sorted pushforwards of a cloud onto each axis of a basis.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisMarginals {
    pub axes: Vec<SortedSample>,
}

impl AxisMarginals {
    pub fn new(axes: Vec<SortedSample>) -> Self {
        Self { axes }
    }

    pub fn k(&self) -> usize {
        self.axes.len()
    }

    /// Build from unsorted uniform per-axis values (sorts each axis).
    pub fn from_unsorted(axes: &[Vec<f64>]) -> Result<Self> {
        let axes = axes
            .iter()
            .map(|v| SortedSample::from_unsorted(v, None))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { axes })
    }
}

/// Parameters for the diffusion-map embedding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionParams {
    /// Neighbours per point; `None` means `ceil(d ln n)`.
    pub neighbors: Option<usize>,
    /// Diffusion time.
    pub t: u32,
    /// Kernel bandwidth; `None` means the median squared kNN edge length.
    pub epsilon: Option<f64>,
    /// Multiply coordinates by `lambda^t`.
    pub scale_by_eigenvalue: bool,
}

impl Default for DiffusionParams {
    fn default() -> Self {
        Self {
            neighbors: None,
            t: 1,
            epsilon: None,
            scale_by_eigenvalue: true,
        }
    }
}

/// Which embedding to use and how many axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConfig {
    pub kind: EmbeddingKind,
    /// Axis count; `None` means the smaller ambient dimension of the pair.
    pub k: Option<usize>,
    pub diffusion: DiffusionParams,
}

impl EmbeddingConfig {
    pub fn pca(k: Option<usize>) -> Self {
        Self {
            kind: EmbeddingKind::Pca,
            k,
            diffusion: DiffusionParams::default(),
        }
    }

    pub fn diffusion(k: Option<usize>, params: DiffusionParams) -> Self {
        Self {
            kind: EmbeddingKind::Diffusion,
            k,
            diffusion: params,
        }
    }

    pub fn coordinate(k: Option<usize>) -> Self {
        Self {
            kind: EmbeddingKind::Coordinate,
            k,
            diffusion: DiffusionParams::default(),
        }
    }
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self::pca(None)
    }
}

fn check_linear_k(k: usize, d: usize) -> Result<()> {
    if k == 0 || k > d {
        return Err(RiswieError::BadK { k, max: d });
    }
    Ok(())
}

/// Top-k principal axes of the centered covariance.
pub fn pca_basis(cloud: &PointCloud, k: usize) -> Result<EmbeddingBasis> {
    check_linear_k(k, cloud.dim())?;
    let spec = eig_sym(&covariance(cloud))?;
    let axes = spec.eigenvectors.slice(ndarray::s![.., ..k]).t().to_owned();
    Ok(EmbeddingBasis {
        kind: EmbeddingKind::Pca,
        axes: Axes::Linear(axes),
        scales: spec.eigenvalues[..k].to_vec(),
    })
}

/// The first `k` standard basis vectors.
pub fn coordinate_basis(cloud: &PointCloud, k: usize) -> Result<EmbeddingBasis> {
    let d = cloud.dim();
    check_linear_k(k, d)?;
    let mut axes = Array2::zeros((k, d));
    for j in 0..k {
        axes[[j, j]] = 1.0;
    }
    Ok(EmbeddingBasis {
        kind: EmbeddingKind::Coordinate,
        axes: Axes::Linear(axes),
        scales: vec![1.0; k],
    })
}

/// Heat-kernel affinities on the union-symmetrized kNN graph.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGraph {
    /// `n x n`, `exp(-|x_i - x_j|^2 / epsilon)` on edges, 1 on the diagonal, 0 elsewhere.
    pub kernel: Array2<f64>,
    pub epsilon: f64,
    pub neighbors: usize,
    pub components: usize,
}

pub fn default_neighbors(n: usize, d: usize) -> usize {
    let k = (d as f64 * (n as f64).ln()).ceil() as usize;
    k.clamp(1, n.saturating_sub(1).max(1))
}

/// Build the kNN heat kernel. Neighbour ties are broken by lower index.
pub fn heat_kernel(
    cloud: &PointCloud,
    neighbors: Option<usize>,
    epsilon: Option<f64>,
) -> Result<KernelGraph> {
    let n = cloud.len();
    if n < 2 {
        return Err(RiswieError::InvalidParameter(
            "diffusion maps need at least two points".into(),
        ));
    }
    let neighbors = neighbors
        .unwrap_or_else(|| default_neighbors(n, cloud.dim()))
        .min(n - 1);
    if neighbors == 0 {
        return Err(RiswieError::InvalidParameter("neighbors must be positive".into()));
    }

    let pts = cloud.points();
    let mut sq = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let dist: f64 = pts
                .row(i)
                .iter()
                .zip(pts.row(j).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            sq[[i, j]] = dist;
            sq[[j, i]] = dist;
        }
    }

    let mut adjacent = vec![false; n * n];
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        order.sort_by(|&a, &b| sq[[i, a]].total_cmp(&sq[[i, b]]).then(a.cmp(&b)));
        for &j in &order[..neighbors] {
            adjacent[i * n + j] = true;
            adjacent[j * n + i] = true;
        }
    }

    let epsilon = match epsilon {
        Some(e) if e > 0.0 && e.is_finite() => e,
        Some(e) => {
            return Err(RiswieError::InvalidParameter(format!(
                "epsilon must be positive, got {e}"
            )))
        }
        None => {
            let mut edges: Vec<f64> = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if adjacent[i * n + j] {
                        edges.push(sq[[i, j]]);
                    }
                }
            }
            let eps = median(&mut edges);
            if eps > 0.0 {
                eps
            } else {
                1.0
            }
        }
    };

    let mut kernel = Array2::<f64>::zeros((n, n));
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        kernel[[i, i]] = 1.0;
        for j in (i + 1)..n {
            if adjacent[i * n + j] {
                let k = (-sq[[i, j]] / epsilon).exp();
                kernel[[i, j]] = k;
                kernel[[j, i]] = k;
                union(&mut parent, i, j);
            }
        }
    }
    let components = (0..n).filter(|&i| find(&mut parent, i) == i).count();

    Ok(KernelGraph {
        kernel,
        epsilon,
        neighbors,
        components,
    })
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        0.5 * (values[m - 1] + values[m])
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let ra = find(parent, a);
    let rb = find(parent, b);
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi] = lo;
    }
}

/// Eigenvalues of `S` this close to 1 count as extra connected components.
pub const SPECTRAL_CONNECTIVITY_TOL: f64 = 1e-10;

/// Diffusion-map coordinates of the cloud's own points.
///
/// With `S = E^{-1/2} K E^{-1/2}` (`E` the degree matrix), the eigenvector of
/// `S` for eigenvalue 1 is the trivial mode and is skipped. The next `k`
/// eigenvectors `phi_j` are mapped back through `E^{-1/2}`, normalized to unit
/// norm under the stationary distribution, and multiplied by `lambda_j^t`.
pub fn diffusion_basis(
    cloud: &PointCloud,
    k: usize,
    params: &DiffusionParams,
) -> Result<EmbeddingBasis> {
    let n = cloud.len();
    if k == 0 || n < k + 2 {
        return Err(RiswieError::BadK {
            k,
            max: n.saturating_sub(2),
        });
    }
    let graph = heat_kernel(cloud, params.neighbors, params.epsilon)?;
    if graph.components > 1 {
        return Err(RiswieError::Disconnected {
            components: graph.components,
        });
    }
    let degree: Vec<f64> = graph.kernel.sum_axis(Axis(1)).to_vec();
    let volume: f64 = degree.iter().sum();
    let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();

    let mut s = graph.kernel;
    for i in 0..n {
        for j in 0..n {
            s[[i, j]] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    let spec = eig_sym(&s)?;
    // a graph joined only by edges of negligible weight has a repeated
    // top eigenvalue, and its modes are not determined by the kernel
    let numerical = spec
        .eigenvalues
        .iter()
        .filter(|&&l| l >= 1.0 - SPECTRAL_CONNECTIVITY_TOL)
        .count();
    if numerical > 1 {
        return Err(RiswieError::Disconnected { components: numerical });
    }

    let mut coords = Array2::zeros((n, k));
    let mut scales = Vec::with_capacity(k);
    for j in 0..k {
        let lambda = spec.eigenvalues[j + 1];
        let scale = lambda.powi(params.t as i32);
        scales.push(scale);
        let factor = if params.scale_by_eigenvalue { scale } else { 1.0 };
        for i in 0..n {
            coords[[i, j]] = factor * spec.eigenvectors[[i, j + 1]] * inv_sqrt[i] * volume.sqrt();
        }
    }
    Ok(EmbeddingBasis {
        kind: EmbeddingKind::Diffusion,
        axes: Axes::PerPoint(coords),
        scales,
    })
}

/// Build the basis described by `config` with exactly `k` axes.
pub fn build_basis(cloud: &PointCloud, config: &EmbeddingConfig, k: usize) -> Result<EmbeddingBasis> {
    match config.kind {
        EmbeddingKind::Pca => pca_basis(cloud, k),
        EmbeddingKind::Coordinate => coordinate_basis(cloud, k),
        EmbeddingKind::Diffusion => diffusion_basis(cloud, k, &config.diffusion),
    }
}

/// Sorted axis marginals of `cloud` under `basis`.
pub fn project(cloud: &PointCloud, basis: &EmbeddingBasis) -> Result<AxisMarginals> {
    let weights = if cloud.is_uniform() {
        None
    } else {
        cloud.weights().as_slice()
    };
    let columns: Vec<Vec<f64>> = match &basis.axes {
        Axes::Linear(axes) => {
            if axes.ncols() != cloud.dim() {
                return Err(RiswieError::DimensionMismatch {
                    expected: axes.ncols(),
                    got: cloud.dim(),
                });
            }
            axes.axis_iter(Axis(0))
                .map(|axis| {
                    cloud
                        .points()
                        .axis_iter(Axis(0))
                        .map(|row| row.dot(&axis))
                        .collect()
                })
                .collect()
        }
        Axes::PerPoint(coords) => {
            if coords.nrows() != cloud.len() {
                return Err(RiswieError::DimensionMismatch {
                    expected: coords.nrows(),
                    got: cloud.len(),
                });
            }
            coords.axis_iter(Axis(1)).map(|c| c.to_vec()).collect()
        }
    };
    let axes = columns
        .iter()
        .map(|c| SortedSample::from_unsorted(c, weights))
        .collect::<Result<Vec<_>>>()?;
    Ok(AxisMarginals { axes })
}

/// Unit-norm check used by tests and callers that build linear bases by hand.
pub fn rows_are_unit(axes: &Array2<f64>, tol: f64) -> bool {
    axes.axis_iter(Axis(0))
        .all(|r| (r.dot(&r).sqrt() - 1.0).abs() <= tol)
}
