//! End-to-end distances: hard and soft RISWIE between clouds, the Gaussian
//! closed form, Gromov-Wasserstein comparison bounds and the covariance
//! stability bound.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::cloud::{center, PointCloud};
use crate::embed::{build_basis, project, AxisMarginals, EmbeddingBasis, EmbeddingConfig};
use crate::error::{Result, RiswieError};
use crate::linalg::eig_sym;
use crate::matching::{cost_matrix, signed_match_from_costs, soft_match_from_costs, SignedMatch, SoftMatch, SoftParams};

#[derive(Debug, Clone, PartialEq)]
pub struct RiswieResult {
    pub distance: f64,
    pub squared: f64,
    pub matching: SignedMatch,
    pub basis_a: EmbeddingBasis,
    pub basis_b: EmbeddingBasis,
    pub k: usize,
}

/// Per-cloud work that does not depend on the other cloud of a pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedCloud {
    pub mean: Array1<f64>,
    pub basis: EmbeddingBasis,
    pub marginals: AxisMarginals,
    pub total_variance: f64,
}

/// Axis count for a pair: the configured `k`, or the smaller ambient dimension.
pub fn resolve_k(config: &EmbeddingConfig, dim_a: usize, dim_b: usize) -> usize {
    config.k.unwrap_or(dim_a.min(dim_b))
}

/// Center, embed with `k` axes and project.
pub fn prepare(cloud: &PointCloud, config: &EmbeddingConfig, k: usize) -> Result<PreparedCloud> {
    let centered = center(cloud);
    let basis = build_basis(&centered, config, k)?;
    let marginals = project(&centered, &basis)?;
    Ok(PreparedCloud {
        mean: cloud.mean(),
        basis,
        marginals,
        total_variance: cloud.total_variance(),
    })
}

/// Hard matching between two prepared clouds.
pub fn riswie_prepared(a: &PreparedCloud, b: &PreparedCloud) -> Result<RiswieResult> {
    let cm = cost_matrix(&a.marginals, &b.marginals)?;
    let matching = signed_match_from_costs(&cm)?;
    let k = matching.k();
    let squared = (matching.total / k as f64).max(0.0);
    Ok(RiswieResult {
        distance: squared.sqrt(),
        squared,
        matching,
        basis_a: a.basis.clone(),
        basis_b: b.basis.clone(),
        k,
    })
}

/// RISWIE distance between two clouds.
pub fn riswie_distance(x: &PointCloud, y: &PointCloud, config: &EmbeddingConfig) -> Result<RiswieResult> {
    let k = resolve_k(config, x.dim(), y.dim());
    let a = prepare(x, config, k)?;
    let b = prepare(y, config, k)?;
    riswie_prepared(&a, &b)
}

/// Soft RISWIE. Returns `sqrt(max(objective, 0))` and the plan.
pub fn sriswie_distance(
    x: &PointCloud,
    y: &PointCloud,
    config: &EmbeddingConfig,
    params: &SoftParams,
) -> Result<(f64, SoftMatch)> {
    let k = resolve_k(config, x.dim(), y.dim());
    let a = prepare(x, config, k)?;
    let b = prepare(y, config, k)?;
    sriswie_prepared(&a, &b, params)
}

pub fn sriswie_prepared(a: &PreparedCloud, b: &PreparedCloud, params: &SoftParams) -> Result<(f64, SoftMatch)> {
    let cm = cost_matrix(&a.marginals, &b.marginals)?;
    let soft = soft_match_from_costs(&cm, params)?;
    if !soft.converged {
        return Err(RiswieError::NoConvergence {
            iterations: soft.iterations,
            residual: soft.marginal_error,
        });
    }
    Ok((soft.objective.max(0.0).sqrt(), soft))
}

/// Tolerance scale for a pair: `sqrt(tr Sigma_X + tr Sigma_Y)`.
pub fn scale(x: &PointCloud, y: &PointCloud) -> f64 {
    (x.total_variance() + y.total_variance()).sqrt()
}

/// Covariance spectrum of a centered Gaussian, sorted descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    eigenvalues: Vec<f64>,
}

impl GaussianSpec {
    /// Sorts descending; rejects negative or non-finite values.
    pub fn new(mut eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(RiswieError::InvalidParameter("empty spectrum".into()));
        }
        if eigenvalues.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(RiswieError::InvalidParameter(
                "eigenvalues must be finite and nonnegative".into(),
            ));
        }
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        Ok(Self { eigenvalues })
    }

    /// Spectrum of a covariance matrix. Eigenvalues within `1e-12 * ||S||` of
    /// zero are clamped.
    pub fn from_covariance(sigma: &Array2<f64>) -> Result<Self> {
        let spec = eig_sym(sigma)?;
        let top = spec.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let floor = -1e-12 * top.max(1.0);
        if spec.eigenvalues.iter().any(|l| *l < floor) {
            return Err(RiswieError::InvalidParameter("covariance is not positive semidefinite".into()));
        }
        Self::new(spec.eigenvalues.iter().map(|l| l.max(0.0)).collect())
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Standard deviations along the principal axes.
    pub fn sqrt(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|l| l.sqrt()).collect()
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// `||Lambda||_F`, equal to `||Sigma||_F`.
    pub fn frobenius(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l * l).sum::<f64>().sqrt()
    }
}

fn check_same_dim(a: &GaussianSpec, b: &GaussianSpec) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(RiswieError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

/// `D_G^2 = (1/d) ||a - b||^2` with `a`, `b` the sorted square-root spectra.
pub fn gaussian_closed_form_sq(a: &GaussianSpec, b: &GaussianSpec) -> Result<f64> {
    check_same_dim(a, b)?;
    let sum: f64 = a
        .eigenvalues
        .iter()
        .zip(&b.eigenvalues)
        .map(|(la, lb)| (la.sqrt() - lb.sqrt()).powi(2))
        .sum();
    Ok(sum / a.dim() as f64)
}

pub fn gaussian_closed_form(a: &GaussianSpec, b: &GaussianSpec) -> Result<f64> {
    Ok(gaussian_closed_form_sq(a, b)?.sqrt())
}

/// Lower and upper Gromov-Wasserstein estimates for two equal-dimension
/// Gaussians, with evaluators for the RISWIE comparison bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GwBounds {
    pub d: usize,
    pub lgw2: f64,
    pub ggw2: f64,
    /// `min_i (a_i + b_i)`.
    pub alpha: f64,
    pub delta_trace: f64,
    pub delta_frobenius: f64,
    pub frobenius_a: f64,
    pub frobenius_b: f64,
    /// `||Lambda_A - Lambda_B||_F^2`.
    pub spectral_gap2: f64,
    pub dg2: f64,
}

/// Right-hand side of the square-root bound, with a flag set when the
/// supplied GW value made the radicand negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClampedBound {
    pub value: f64,
    pub clamped: bool,
}

impl GwBounds {
    /// `gw2 / (8 d alpha^2) + ||S_A||_F ||S_B||_F / (d alpha^2) (1 - 1/sqrt d)`.
    pub fn bound_i(&self, gw2: f64) -> Result<f64> {
        if self.alpha <= 0.0 {
            return Err(RiswieError::RankDeficient { alpha: self.alpha });
        }
        let d = self.d as f64;
        let a2 = self.alpha * self.alpha;
        Ok(gw2 / (8.0 * d * a2) + self.frobenius_a * self.frobenius_b / (d * a2) * (1.0 - 1.0 / d.sqrt()))
    }

    /// `sqrt(gw2 - 4 dtr^2 - 4 dfro^2) / (2 sqrt d)`, radicand clamped at zero.
    pub fn bound_ii(&self, gw2: f64) -> ClampedBound {
        let radicand = self.radicand_ii(gw2);
        ClampedBound {
            value: radicand.max(0.0).sqrt() / (2.0 * (self.d as f64).sqrt()),
            clamped: radicand < 0.0,
        }
    }

    pub fn radicand_ii(&self, gw2: f64) -> f64 {
        gw2 - 4.0 * self.delta_trace.powi(2) - 4.0 * self.delta_frobenius.powi(2)
    }
}

pub fn gw_bounds(a: &GaussianSpec, b: &GaussianSpec) -> Result<GwBounds> {
    check_same_dim(a, b)?;
    let delta_trace = a.trace() - b.trace();
    let (frobenius_a, frobenius_b) = (a.frobenius(), b.frobenius());
    let delta_frobenius = frobenius_a - frobenius_b;
    let spectral_gap2: f64 = a
        .eigenvalues
        .iter()
        .zip(&b.eigenvalues)
        .map(|(x, y)| (x - y).powi(2))
        .sum();
    let alpha = a
        .sqrt()
        .iter()
        .zip(b.sqrt())
        .map(|(x, y)| x + y)
        .fold(f64::INFINITY, f64::min);
    let base = 4.0 * delta_trace.powi(2);
    Ok(GwBounds {
        d: a.dim(),
        lgw2: base + 4.0 * delta_frobenius.powi(2) + 4.0 * spectral_gap2,
        ggw2: base + 8.0 * spectral_gap2,
        alpha,
        delta_trace,
        delta_frobenius,
        frobenius_a,
        frobenius_b,
        spectral_gap2,
        dg2: gaussian_closed_form_sq(a, b)?,
    })
}

/// `||E||_2 / (2 sqrt(lambda_min))`.
pub fn stability_bound(lambda_min: f64, e_norm: f64) -> Result<f64> {
    if !(lambda_min > 0.0) {
        return Err(RiswieError::NonPositiveLambda(lambda_min));
    }
    if !(e_norm >= 0.0) {
        return Err(RiswieError::InvalidParameter(format!("perturbation norm {e_norm} is negative")));
    }
    Ok(e_norm / (2.0 * lambda_min.sqrt()))
}
