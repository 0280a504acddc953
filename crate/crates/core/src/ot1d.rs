//! One-dimensional optimal transport on sorted samples.
//!
//! In 1D the optimal W2 coupling is the monotone (quantile) coupling, so once
//! both samples are sorted the cost is a single linear pass. Reflecting a
//! sample (`x -> -x`) keeps it sorted if the order is reversed, which is how
//! the negative-sign cost is evaluated without re-sorting.

use ndarray::{Array1, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cloud::PointCloud;
use crate::error::{Result, RiswieError};

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Nondecreasing values with positive weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedSample {
    values: Vec<f64>,
    weights: Vec<f64>,
    uniform: bool,
}

impl SortedSample {
    /// Already-sorted values with uniform weights.
    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(RiswieError::InvalidSample("empty sample".into()));
        }
        check_sorted(&values)?;
        Ok(Self {
            weights: vec![1.0 / n as f64; n],
            values,
            uniform: true,
        })
    }

    /// Already-sorted values with explicit positive weights.
    pub fn weighted(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(RiswieError::InvalidSample("empty sample".into()));
        }
        if values.len() != weights.len() {
            return Err(RiswieError::LengthMismatch {
                left: values.len(),
                right: weights.len(),
            });
        }
        check_sorted(&values)?;
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(RiswieError::InvalidSample("weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(RiswieError::InvalidSample(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        let first = weights[0];
        let uniform = weights.iter().all(|w| *w == first);
        Ok(Self {
            values,
            weights,
            uniform,
        })
    }

    /// Sort arbitrary values (and co-sort their weights). Zero-weight entries are dropped.
    pub fn from_unsorted(values: &[f64], weights: Option<&[f64]>) -> Result<Self> {
        match weights {
            None => {
                let mut v = values.to_vec();
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(RiswieError::InvalidSample("non-finite value".into()));
                }
                v.sort_by(f64::total_cmp);
                Self::uniform(v)
            }
            Some(w) => {
                if w.len() != values.len() {
                    return Err(RiswieError::LengthMismatch {
                        left: values.len(),
                        right: w.len(),
                    });
                }
                let mut idx: Vec<usize> = (0..values.len()).filter(|&i| w[i] > 0.0).collect();
                idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
                let v = idx.iter().map(|&i| values[i]).collect();
                let ws = idx.iter().map(|&i| w[i]).collect();
                Self::weighted(v, ws)
            }
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Negate and reverse, so the result is again sorted ascending.
    pub fn reflect(&self) -> Self {
        Self {
            values: self.values.iter().rev().map(|v| -v).collect(),
            weights: self.weights.iter().rev().copied().collect(),
            uniform: self.uniform,
        }
    }
}

fn check_sorted(values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(RiswieError::InvalidSample("non-finite value".into()));
    }
    if values.windows(2).any(|w| w[0] > w[1]) {
        return Err(RiswieError::InvalidSample("values are not sorted".into()));
    }
    Ok(())
}

/// `(1/N) sum (u_i - v_i)^2` for two uniform samples of the same length.
pub fn w2sq_sorted_equal(u: &SortedSample, v: &SortedSample) -> Result<f64> {
    if u.len() != v.len() {
        return Err(RiswieError::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    if !(u.uniform && v.uniform) {
        return Err(RiswieError::InvalidSample(
            "equal-weight kernel needs uniform weights".into(),
        ));
    }
    Ok(equal_plus(&u.values, &v.values))
}

fn equal_plus(u: &[f64], v: &[f64]) -> f64 {
    let s: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
    s / u.len() as f64
}

// Same as `equal_plus(u, reflect(v))` without allocating.
fn equal_minus(u: &[f64], v: &[f64]) -> f64 {
    let s: f64 = u
        .iter()
        .zip(v.iter().rev())
        .map(|(a, b)| (a + b) * (a + b))
        .sum();
    s / u.len() as f64
}

/// Quantile-coupling W2^2 between weighted sorted samples (two-pointer sweep).
pub fn w2sq_sorted_weighted(u: &SortedSample, v: &SortedSample) -> f64 {
    two_pointer(&u.values, &u.weights, v.values.iter().copied(), v.weights.iter().copied())
}

fn two_pointer<I, J>(uv: &[f64], uw: &[f64], mut vv: I, mut vw: J) -> f64
where
    I: Iterator<Item = f64>,
    J: Iterator<Item = f64>,
{
    let (Some(mut y), Some(mut rb)) = (vv.next(), vw.next()) else {
        return 0.0;
    };
    let mut i = 0;
    let mut ra = uw[0];
    let mut cost = 0.0;
    loop {
        let diff = uv[i] - y;
        if ra <= rb {
            cost += ra * diff * diff;
            rb -= ra;
            i += 1;
            if i == uv.len() {
                break;
            }
            ra = uw[i];
            if rb <= 0.0 {
                match (vv.next(), vw.next()) {
                    (Some(ny), Some(nw)) => {
                        y = ny;
                        rb = nw;
                    }
                    _ => break,
                }
            }
        } else {
            cost += rb * diff * diff;
            ra -= rb;
            match (vv.next(), vw.next()) {
                (Some(ny), Some(nw)) => {
                    y = ny;
                    rb = nw;
                }
                _ => break,
            }
        }
    }
    cost
}

/// W2^2 between sorted samples, using the equal-length kernel when it applies.
pub fn w2sq(u: &SortedSample, v: &SortedSample) -> f64 {
    if u.uniform && v.uniform && u.len() == v.len() {
        equal_plus(&u.values, &v.values)
    } else {
        w2sq_sorted_weighted(u, v)
    }
}

/// W2^2 between `u` and the reflection of `v`.
pub fn w2sq_reflected(u: &SortedSample, v: &SortedSample) -> f64 {
    if u.uniform && v.uniform && u.len() == v.len() {
        equal_minus(&u.values, &v.values)
    } else {
        two_pointer(
            &u.values,
            &u.weights,
            v.values.iter().rev().map(|x| -x),
            v.weights.iter().rev().copied(),
        )
    }
}

/// Costs of pairing two axis marginals with and without reflecting the second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairCost {
    /// `min(plus, minus)`.
    pub cost: f64,
    /// `+1` if the unreflected pairing is at least as cheap, `-1` otherwise.
    pub sign: i8,
    pub plus: f64,
    pub minus: f64,
}

pub fn pair_cost(u: &SortedSample, v: &SortedSample) -> PairCost {
    let plus = w2sq(u, v);
    let minus = w2sq_reflected(u, v);
    if minus < plus {
        PairCost {
            cost: minus,
            sign: -1,
            plus,
            minus,
        }
    } else {
        PairCost {
            cost: plus,
            sign: 1,
            plus,
            minus,
        }
    }
}

/// Sort the projections of a cloud onto `direction`.
pub fn project_sorted(cloud: &PointCloud, direction: &Array1<f64>) -> Result<SortedSample> {
    if direction.len() != cloud.dim() {
        return Err(RiswieError::DimensionMismatch {
            expected: cloud.dim(),
            got: direction.len(),
        });
    }
    let proj: Vec<f64> = cloud
        .points()
        .axis_iter(Axis(0))
        .map(|row| row.dot(direction))
        .collect();
    if cloud.is_uniform() {
        SortedSample::from_unsorted(&proj, None)
    } else {
        SortedSample::from_unsorted(&proj, cloud.weights().as_slice())
    }
}

/// `L` unit directions drawn uniformly from the sphere (normalized Gaussians).
pub fn random_directions(dim: usize, count: usize, seed: u64) -> Vec<Array1<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: Array1<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.dot(&v).sqrt();
        if norm > 1e-12 {
            out.push(v / norm);
        }
    }
    out
}

/// Monte Carlo sliced W2^2: average 1D W2^2 over `directions` random unit vectors.
///
/// Inputs are not centered, so translations contribute.
pub fn sliced_w2sq(x: &PointCloud, y: &PointCloud, directions: usize, seed: u64) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(RiswieError::DimensionMismatch {
            expected: x.dim(),
            got: y.dim(),
        });
    }
    if directions == 0 {
        return Err(RiswieError::InvalidParameter("need at least one direction".into()));
    }
    let dirs = random_directions(x.dim(), directions, seed);
    let mut total = 0.0;
    for dir in &dirs {
        let u = project_sorted(x, dir)?;
        let v = project_sorted(y, dir)?;
        total += w2sq(&u, &v);
    }
    Ok(total / directions as f64)
}
