#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use riswie::rng::{gaussian_matrix, random_orthogonal};
use riswie::{AxisMarginals, PointCloud, SortedSample};

/// Gaussian cloud with per-axis standard deviations `stds`, randomly rotated.
pub fn gaussian_cloud(rng: &mut ChaCha8Rng, n: usize, stds: &[f64]) -> PointCloud {
    let d = stds.len();
    let mut z = gaussian_matrix(rng, n, d);
    for (j, s) in stds.iter().enumerate() {
        z.column_mut(j).mapv_inplace(|v| v * s);
    }
    let q = random_orthogonal(rng, d);
    PointCloud::new(z.dot(&q.t())).unwrap()
}

/// Uniform cloud in a box with half-widths `sides`, randomly rotated. No
/// outliers, so kNN heat-kernel graphs stay well connected.
pub fn box_cloud(rng: &mut ChaCha8Rng, n: usize, sides: &[f64]) -> PointCloud {
    let d = sides.len();
    let z = Array2::from_shape_fn((n, d), |(_, j)| sides[j] * rng.random_range(-1.0..1.0));
    let q = random_orthogonal(rng, d);
    PointCloud::new(z.dot(&q.t())).unwrap()
}

/// Well separated, slightly jittered standard deviations from 3 down to 0.5.
pub fn distinct_stds(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d)
        .map(|i| {
            let base = if d == 1 { 2.0 } else { 3.0 - 2.5 * i as f64 / (d - 1) as f64 };
            base * (1.0 + 0.05 * rng.random_range(-1.0..1.0))
        })
        .collect()
}

/// Random orthogonal map (possibly improper) and translation.
pub fn random_rigid(rng: &mut ChaCha8Rng, d: usize) -> (Array2<f64>, Array1<f64>) {
    let q = random_orthogonal(rng, d);
    let t = Array1::from_shape_fn(d, |_| rng.random_range(-10.0..10.0));
    (q, t)
}

pub fn scale(x: &PointCloud, y: &PointCloud) -> f64 {
    riswie::riswie::scale(x, y)
}

/// `k` uniform marginals of `n` atoms with varied spread and skew.
pub fn random_marginals(rng: &mut ChaCha8Rng, k: usize, n: usize) -> AxisMarginals {
    let axes: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            let spread = rng.random_range(0.2..3.0);
            let shift = rng.random_range(-0.5..0.5);
            let skew = rng.random_range(1.0..3.0);
            (0..n)
                .map(|_| {
                    let u: f64 = rng.random_range(-1.0..1.0);
                    shift + spread * u.signum() * u.abs().powf(skew)
                })
                .collect()
        })
        .collect();
    AxisMarginals::from_unsorted(&axes).unwrap()
}

/// Random weighted 1D sample with `n` atoms.
pub fn random_weighted(rng: &mut ChaCha8Rng, n: usize) -> SortedSample {
    let values: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let mut weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    // make the weights sum to one in floating point
    let rest: f64 = weights[1..].iter().sum();
    weights[0] = 1.0 - rest;
    SortedSample::from_unsorted(&values, Some(&weights)).unwrap()
}

/// Exact discrete optimal transport with squared-distance cost, solved as a
/// min-cost flow by successive shortest paths (Dijkstra with potentials).
/// Knows nothing about sorting or monotone couplings, so it is an
/// independent check of 1D W2.
pub fn transport_lp(xs: &[f64], a: &[f64], ys: &[f64], b: &[f64]) -> f64 {
    let (n, m) = (xs.len(), ys.len());
    let v = n + m;
    let cost = |i: usize, j: usize| (xs[i] - ys[j]).powi(2);
    let mut supply = a.to_vec();
    let mut demand = b.to_vec();
    let mut flow = vec![vec![0.0f64; m]; n];
    let mut potential = vec![0.0f64; v];
    let dust = 1e-15;
    // residual arc weight from node p to node q, if the arc exists
    let arc = |flow: &Vec<Vec<f64>>, p: usize, q: usize| -> Option<f64> {
        if p < n && q >= n {
            Some(cost(p, q - n))
        } else if p >= n && q < n && flow[q][p - n] > dust {
            Some(-cost(q, p - n))
        } else {
            None
        }
    };
    for _ in 0..(4 * v * v) {
        if supply.iter().all(|s| *s <= dust) || demand.iter().all(|d| *d <= dust) {
            break;
        }
        let mut dist = vec![f64::INFINITY; v];
        let mut prev = vec![usize::MAX; v];
        let mut done = vec![false; v];
        for i in 0..n {
            if supply[i] > dust {
                dist[i] = 0.0;
            }
        }
        loop {
            let next = (0..v).filter(|&p| !done[p] && dist[p].is_finite()).min_by(|&p, &q| dist[p].total_cmp(&dist[q]));
            let Some(p) = next else { break };
            done[p] = true;
            for q in 0..v {
                if done[q] {
                    continue;
                }
                if let Some(w) = arc(&flow, p, q) {
                    let reduced = (w + potential[p] - potential[q]).max(0.0);
                    if dist[p] + reduced < dist[q] {
                        dist[q] = dist[p] + reduced;
                        prev[q] = p;
                    }
                }
            }
        }
        let sink = (0..m)
            .filter(|&j| demand[j] > dust && dist[n + j].is_finite())
            .min_by(|&p, &q| dist[n + p].total_cmp(&dist[n + q]))
            .expect("feasible transport");
        for p in 0..v {
            if dist[p].is_finite() {
                potential[p] += dist[p];
            }
        }
        let mut amount = demand[sink];
        let mut path = Vec::new();
        let mut node = n + sink;
        while prev[node] != usize::MAX {
            let p = prev[node];
            if node < n {
                amount = amount.min(flow[node][p - n]);
            }
            path.push((p, node));
            node = p;
            assert!(path.len() <= v, "cycle in shortest path tree");
        }
        amount = amount.min(supply[node]);
        for &(p, q) in &path {
            if p < n {
                flow[p][q - n] += amount;
            } else {
                flow[q][p - n] -= amount;
            }
        }
        supply[node] -= amount;
        demand[sink] -= amount;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..m {
            total += flow[i][j] * cost(i, j);
        }
    }
    total
}

/// Sorted multiset of pairwise Euclidean distances.
pub fn distance_multiset(x: &Array2<f64>) -> Vec<f64> {
    let n = x.nrows();
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = &x.row(i) - &x.row(j);
            out.push(d.dot(&d).sqrt());
        }
    }
    out.sort_by(f64::total_cmp);
    out
}
