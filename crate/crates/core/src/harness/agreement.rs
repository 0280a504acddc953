use serde::{Deserialize, Serialize};

use super::DistanceMatrix;
use crate::error::{Result, RiswieError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    /// Agreeing pairs over compared pairs; NaN when nothing was compared.
    pub fraction: f64,
    pub compared: usize,
    /// Mean `|p1 - p2|` over upper-triangle entries, `p = (rank - 1)/(N - 1)`.
    pub mean_abs_percentile_diff: f64,
}

/// 1-based ranks, ties get the average of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &o in &order[i..j] {
            ranks[o] = avg;
        }
        i = j;
    }
    ranks
}

fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// How consistently two matrices order their entries.
///
/// Every unordered pair of strict upper-triangle entries is compared; the
/// pair agrees when the signs of the differences match (two ties agree).
/// With `min_sep`, only pairs whose `D1` entries differ by at least
/// `min_sep` sample standard deviations of the `D1` entries are compared.
pub fn ordering_agreement(d1: &DistanceMatrix, d2: &DistanceMatrix, min_sep: Option<f64>) -> Result<Agreement> {
    if d1.ids() != d2.ids() {
        return Err(RiswieError::IdMismatch);
    }
    if let Some(s) = min_sep {
        if !(s >= 0.0) {
            return Err(RiswieError::InvalidParameter(format!("min_sep {s} must be nonnegative")));
        }
    }
    let e1 = d1.upper_triangle();
    let e2 = d2.upper_triangle();
    let threshold = min_sep.map(|s| s * sample_std(&e1));
    let n = e1.len();

    let mut agree = 0usize;
    let mut compared = 0usize;
    for p in 0..n {
        for q in (p + 1)..n {
            let a = e1[p] - e1[q];
            if threshold.is_some_and(|t| a.abs() < t) {
                continue;
            }
            let b = e2[p] - e2[q];
            compared += 1;
            if sign(a) == sign(b) {
                agree += 1;
            }
        }
    }

    let mean_abs_percentile_diff = if n == 0 {
        0.0
    } else {
        let r1 = average_ranks(&e1);
        let r2 = average_ranks(&e2);
        let denom = (n.max(2) - 1) as f64;
        r1.iter().zip(&r2).map(|(a, b)| (a - b).abs() / denom).sum::<f64>() / n as f64
    };
    Ok(Agreement {
        fraction: if compared == 0 { f64::NAN } else { agree as f64 / compared as f64 },
        compared,
        mean_abs_percentile_diff,
    })
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}
