use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::embed::EmbeddingConfig;
use crate::error::{Result, RiswieError};
use crate::riswie::{gaussian_closed_form, riswie_distance, GaussianSpec};
use crate::rng::{gaussian_matrix, stream_id, stream_rng};

/// Bias/variance scaling experiment.
///
/// `spectrum_a[i]` and `spectrum_b[i]` are the covariance eigenvalues used
/// for `dims[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasVarianceSpec {
    pub dims: Vec<usize>,
    pub sample_sizes: Vec<usize>,
    pub trials: usize,
    pub spectrum_a: Vec<Vec<f64>>,
    pub spectrum_b: Vec<Vec<f64>>,
    pub seed: u64,
}

impl BiasVarianceSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RiswieError::BadSpec(m));
        if self.dims.is_empty() {
            return bad("no dimensions".into());
        }
        if self.spectrum_a.len() != self.dims.len() || self.spectrum_b.len() != self.dims.len() {
            return bad("need one spectrum pair per dimension".into());
        }
        for (i, &d) in self.dims.iter().enumerate() {
            if d == 0 || self.spectrum_a[i].len() != d || self.spectrum_b[i].len() != d {
                return bad(format!("spectra for dimension {d} have the wrong length"));
            }
            GaussianSpec::new(self.spectrum_a[i].clone()).map_err(|e| RiswieError::BadSpec(e.to_string()))?;
            GaussianSpec::new(self.spectrum_b[i].clone()).map_err(|e| RiswieError::BadSpec(e.to_string()))?;
        }
        if self.sample_sizes.len() < 3 {
            return bad("need at least 3 sample sizes".into());
        }
        let lo = *self.sample_sizes.iter().min().unwrap_or(&0);
        let hi = *self.sample_sizes.iter().max().unwrap_or(&0);
        if lo < 2 || (hi as f64) < 10.0 * lo as f64 {
            return bad("sample sizes must be at least 2 and span a decade".into());
        }
        if self.trials < 2 {
            return bad("need at least 2 trials".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasVarianceRow {
    pub d: usize,
    pub n: usize,
    pub truth: f64,
    pub mean_d: f64,
    pub bias: f64,
    pub variance: f64,
    /// Fitted over all sample sizes for this `d`; repeated on each row.
    pub alpha_bias: f64,
    pub alpha_var: f64,
}

/// `value ~ amplitude * n^(-alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub alpha: f64,
    pub amplitude: f64,
}

/// Least-squares line through `(log n, log value)`; `alpha` is minus the slope.
pub fn power_law_fit(ns: &[f64], values: &[f64]) -> Result<PowerLaw> {
    if ns.len() != values.len() || ns.len() < 2 {
        return Err(RiswieError::BadSpec("power law fit needs at least two paired points".into()));
    }
    if ns.iter().chain(values).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(RiswieError::BadSpec("power law fit needs positive finite values".into()));
    }
    let xs: Vec<f64> = ns.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(RiswieError::BadSpec("sample sizes must differ".into()));
    }
    let slope = sxy / sxx;
    Ok(PowerLaw {
        alpha: -slope,
        amplitude: (my - slope * mx).exp(),
    })
}

fn gaussian_sample(rng: &mut impl rand::Rng, n: usize, spectrum: &[f64]) -> Result<PointCloud> {
    let mut z: Array2<f64> = gaussian_matrix(rng, n, spectrum.len());
    for (j, lambda) in spectrum.iter().enumerate() {
        z.column_mut(j).mapv_inplace(|v| v * lambda.sqrt());
    }
    PointCloud::new(z)
}

/// Empirical RISWIE-PCA on independent Gaussian samples against the closed
/// form, for every `(d, n)`.
///
/// Trial `t` at dimension index `i` and size index `j` draws both clouds from
/// stream `stream_id(i, j, t)` of `seed`, so the table does not depend on the
/// worker count.
pub fn bias_variance_experiment(spec: &BiasVarianceSpec) -> Result<Vec<BiasVarianceRow>> {
    spec.validate()?;
    let config = EmbeddingConfig::pca(None);
    let mut tasks = Vec::new();
    for i in 0..spec.dims.len() {
        for j in 0..spec.sample_sizes.len() {
            for t in 0..spec.trials {
                tasks.push((i, j, t));
            }
        }
    }
    let values: Vec<f64> = tasks
        .par_iter()
        .map(|&(i, j, t)| {
            let mut rng = stream_rng(spec.seed, stream_id(i as u64, j as u64, t as u64));
            let n = spec.sample_sizes[j];
            let x = gaussian_sample(&mut rng, n, &spec.spectrum_a[i])?;
            let y = gaussian_sample(&mut rng, n, &spec.spectrum_b[i])?;
            Ok(riswie_distance(&x, &y, &config)?.distance)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (i, &d) in spec.dims.iter().enumerate() {
        let truth = gaussian_closed_form(
            &GaussianSpec::new(spec.spectrum_a[i].clone())?,
            &GaussianSpec::new(spec.spectrum_b[i].clone())?,
        )?;
        let mut block = Vec::new();
        for (j, &n) in spec.sample_sizes.iter().enumerate() {
            let start = (i * spec.sample_sizes.len() + j) * spec.trials;
            let v = &values[start..start + spec.trials];
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let variance = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
            block.push(BiasVarianceRow {
                d,
                n,
                truth,
                mean_d: mean,
                bias: (mean - truth).abs(),
                variance,
                alpha_bias: f64::NAN,
                alpha_var: f64::NAN,
            });
        }
        let ns: Vec<f64> = block.iter().map(|r| r.n as f64).collect();
        let biases: Vec<f64> = block.iter().map(|r| r.bias).collect();
        let vars: Vec<f64> = block.iter().map(|r| r.variance).collect();
        let alpha_bias = power_law_fit(&ns, &biases).map(|f| f.alpha).unwrap_or(f64::NAN);
        let alpha_var = power_law_fit(&ns, &vars).map(|f| f.alpha).unwrap_or(f64::NAN);
        for r in &mut block {
            r.alpha_bias = alpha_bias;
            r.alpha_var = alpha_var;
        }
        rows.extend(block);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_injected_exponent() {
        let ns = [100.0, 316.0, 1000.0, 3162.0, 10000.0];
        let v: Vec<f64> = ns.iter().map(|n: &f64| 3.0 * n.powf(-0.5)).collect();
        let f = power_law_fit(&ns, &v).unwrap();
        assert!((f.alpha - 0.5).abs() < 1e-6);
        assert!((f.amplitude - 3.0).abs() < 1e-6);
    }

    #[test]
    fn fit_rejects_nonpositive() {
        assert!(power_law_fit(&[1.0, 10.0], &[1.0, 0.0]).is_err());
    }

    fn small_spec() -> BiasVarianceSpec {
        BiasVarianceSpec {
            dims: vec![2],
            sample_sizes: vec![20, 60, 200],
            trials: 5,
            spectrum_a: vec![vec![4.0, 1.0]],
            spectrum_b: vec![vec![4.0, 1.0]],
            seed: 3,
        }
    }

    #[test]
    fn identical_spectra_bias_is_mean() {
        let rows = bias_variance_experiment(&small_spec()).unwrap();
        assert_eq!(rows.len(), 3);
        for r in rows {
            assert_eq!(r.truth, 0.0);
            assert!(r.mean_d > 0.0);
            assert_eq!(r.bias, r.mean_d);
        }
    }

    #[test]
    fn validation() {
        let mut s = small_spec();
        s.sample_sizes = vec![20, 30, 40];
        assert!(matches!(bias_variance_experiment(&s), Err(RiswieError::BadSpec(_))));
        let mut s = small_spec();
        s.spectrum_b = vec![vec![1.0]];
        assert!(s.validate().is_err());
        let mut s = small_spec();
        s.trials = 1;
        assert!(s.validate().is_err());
    }
}
