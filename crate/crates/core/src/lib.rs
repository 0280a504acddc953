//! Rigid-invariant sliced Wasserstein (RISWIE) distances between point clouds.
//!
//! A cloud is centered, embedded onto `k` axes (PCA, diffusion maps or
//! coordinates) and projected to sorted 1D marginals. Two clouds are compared
//! by the cheapest signed permutation of axes, each pair priced by the 1D
//! squared Wasserstein distance with or without reflection:
//!
//! ```
//! use ndarray::array;
//! use riswie::{riswie_distance, EmbeddingConfig, PointCloud};
//!
//! let x = PointCloud::new(array![[2.0, 0.0], [-2.0, 0.0], [0.0, 1.0], [0.0, -1.0]]).unwrap();
//! let y = PointCloud::new(array![[0.0, 2.0], [0.0, -2.0], [1.0, 0.0], [-1.0, 0.0]]).unwrap();
//! let r = riswie_distance(&x, &y, &EmbeddingConfig::pca(None)).unwrap();
//! assert!(r.distance < 1e-12);
//! ```

pub mod align;
pub mod cloud;
pub mod embed;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod matching;
pub mod ot1d;
pub mod riswie;
pub mod rng;

pub use align::{boosted_distance, recover_transform, BoostBase, RigidTransform};
pub use cloud::{center, covariance, PointCloud};
pub use embed::{AxisMarginals, DiffusionParams, EmbeddingBasis, EmbeddingConfig, EmbeddingKind};
pub use error::{Result, RiswieError};
pub use matching::{brute_force_signed, cost_matrix, hungarian, signed_match, soft_match, SignedMatch, SoftMatch, SoftParams};
pub use ot1d::SortedSample;
pub use riswie::{
    gaussian_closed_form, gw_bounds, riswie_distance, sriswie_distance, stability_bound, GaussianSpec, GwBounds,
    RiswieResult,
};
