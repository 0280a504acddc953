//! Signed axis matching: sign-resolved cost matrices, exact assignment,
//! a brute-force oracle over the signed permutation group, and an entropic
//! (soft) relaxation.

use ndarray::Array2;
use rayon::prelude::*;

use crate::embed::AxisMarginals;
use crate::error::{Result, RiswieError};
use crate::ot1d::{pair_cost, w2sq, PairCost};

/// Brute force enumerates `2^k k!` signed permutations; beyond this it is impractical.
pub const BRUTE_FORCE_MAX_K: usize = 8;

/// A signed permutation with its per-pair costs.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedMatch {
    /// `permutation[l]` is the target axis (0-based) matched to source axis `l`.
    pub permutation: Vec<usize>,
    /// `signs[l] = -1` means target axis `permutation[l]` is reflected.
    pub signs: Vec<i8>,
    pub pair_costs: Vec<f64>,
    pub total: f64,
}

impl SignedMatch {
    pub fn k(&self) -> usize {
        self.permutation.len()
    }
}

/// Sign-resolved `k x k` costs between two sets of axis marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    /// `min(plus, minus)`.
    pub cost: Array2<f64>,
    pub signs: Array2<i8>,
    pub plus: Array2<f64>,
    pub minus: Array2<f64>,
}

impl CostMatrix {
    pub fn k(&self) -> usize {
        self.cost.nrows()
    }
}

pub fn cost_matrix(a: &AxisMarginals, b: &AxisMarginals) -> Result<CostMatrix> {
    let k = a.k();
    if b.k() != k {
        return Err(RiswieError::AxisCountMismatch {
            left: k,
            right: b.k(),
        });
    }
    let row = |l: usize| -> Vec<PairCost> {
        (0..k).map(|m| pair_cost(&a.axes[l], &b.axes[m])).collect()
    };
    let work: usize = a.axes.iter().map(|s| s.len()).sum::<usize>() * k;
    let rows: Vec<Vec<PairCost>> = if work > 1 << 16 {
        (0..k).into_par_iter().map(row).collect()
    } else {
        (0..k).map(row).collect()
    };
    let mut out = CostMatrix {
        cost: Array2::zeros((k, k)),
        signs: Array2::zeros((k, k)),
        plus: Array2::zeros((k, k)),
        minus: Array2::zeros((k, k)),
    };
    for (l, r) in rows.iter().enumerate() {
        for (m, pc) in r.iter().enumerate() {
            out.cost[[l, m]] = pc.cost;
            out.signs[[l, m]] = pc.sign;
            out.plus[[l, m]] = pc.plus;
            out.minus[[l, m]] = pc.minus;
        }
    }
    Ok(out)
}

/// Minimum-cost perfect assignment of a square cost matrix.
///
/// Returns `(permutation, total)` with `permutation[row] = col`. Among optimal
/// assignments the lexicographically smallest permutation is returned.
pub fn hungarian(cost: &Array2<f64>) -> Result<(Vec<usize>, f64)> {
    let n = cost.nrows();
    if cost.ncols() != n {
        return Err(RiswieError::DimensionMismatch {
            expected: n,
            got: cost.ncols(),
        });
    }
    if let Some(((r, c), _)) = cost.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(RiswieError::NonFinite { row: r, col: c });
    }
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }

    // Shortest augmenting path with potentials; arrays are 1-based with a
    // sentinel column 0.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[[i0 - 1, j - 1]] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[owner[j] - 1] = j - 1;
    }

    let scale = cost.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let tol = 64.0 * f64::EPSILON * n as f64 * scale;
    let tight = |r: usize, c: usize| cost[[r, c]] - u[r + 1] - v[c + 1] <= tol;
    lexicographic_refine(n, &mut row_to_col, tight);

    let total = row_to_col
        .iter()
        .enumerate()
        .map(|(r, &c)| cost[[r, c]])
        .sum();
    Ok((row_to_col, total))
}

/// Move to the lexicographically smallest perfect matching inside the tight
/// (zero reduced cost) subgraph. Every optimal assignment lives there.
fn lexicographic_refine(n: usize, row_to_col: &mut [usize], tight: impl Fn(usize, usize) -> bool) {
    let mut col_to_row = vec![0usize; n];
    for (r, &c) in row_to_col.iter().enumerate() {
        col_to_row[c] = r;
    }
    for r in 0..n {
        let current = row_to_col[r];
        for c in 0..current {
            // columns owned by earlier rows are fixed
            if col_to_row[c] < r || !tight(r, c) {
                continue;
            }
            // Give c to r; its owner must reach the column r frees via an
            // alternating path over unfixed rows.
            let start = col_to_row[c];
            if let Some(path) = alternating_path(n, r, start, c, current, row_to_col, &col_to_row, &tight) {
                for (row, col) in path {
                    row_to_col[row] = col;
                    col_to_row[col] = row;
                }
                row_to_col[r] = c;
                col_to_row[c] = r;
                break;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn alternating_path(
    n: usize,
    fixed_upto: usize,
    start: usize,
    banned_col: usize,
    target_col: usize,
    row_to_col: &[usize],
    col_to_row: &[usize],
    tight: &impl Fn(usize, usize) -> bool,
) -> Option<Vec<(usize, usize)>> {
    // BFS over rows; parent[col] = row that reached it.
    let mut parent_of_col = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(start);
    let mut seen_row = vec![false; n];
    seen_row[start] = true;
    while let Some(row) = queue.pop_front() {
        for col in 0..n {
            if col == banned_col
                || col == row_to_col[row]
                || parent_of_col[col] != usize::MAX
                || !tight(row, col)
            {
                continue;
            }
            let owner = col_to_row[col];
            if col != target_col && (owner <= fixed_upto || seen_row[owner]) {
                continue;
            }
            parent_of_col[col] = row;
            if col == target_col {
                let mut path = Vec::new();
                let mut c = col;
                loop {
                    let r = parent_of_col[c];
                    path.push((r, c));
                    if r == start {
                        return Some(path);
                    }
                    c = row_to_col[r];
                }
            }
            seen_row[owner] = true;
            queue.push_back(owner);
        }
    }
    None
}

/// Exact signed matching: cost matrix plus Hungarian assignment.
pub fn signed_match(a: &AxisMarginals, b: &AxisMarginals) -> Result<SignedMatch> {
    let cm = cost_matrix(a, b)?;
    signed_match_from_costs(&cm)
}

pub fn signed_match_from_costs(cm: &CostMatrix) -> Result<SignedMatch> {
    let (permutation, total) = hungarian(&cm.cost)?;
    let signs = permutation
        .iter()
        .enumerate()
        .map(|(l, &m)| cm.signs[[l, m]])
        .collect();
    let pair_costs = permutation
        .iter()
        .enumerate()
        .map(|(l, &m)| cm.cost[[l, m]])
        .collect();
    Ok(SignedMatch {
        permutation,
        signs,
        pair_costs,
        total,
    })
}

/// Exhaustive minimum over all `2^k k!` signed permutations.
///
/// Costs for both signs are evaluated directly (the reflected marginal is
/// materialized) and every sign vector is enumerated, so this shares nothing
/// with the Hungarian path beyond the 1D W2 kernel.
pub fn brute_force_signed(a: &AxisMarginals, b: &AxisMarginals) -> Result<SignedMatch> {
    let k = a.k();
    if b.k() != k {
        return Err(RiswieError::AxisCountMismatch {
            left: k,
            right: b.k(),
        });
    }
    if k > BRUTE_FORCE_MAX_K {
        return Err(RiswieError::KTooLarge {
            k,
            max: BRUTE_FORCE_MAX_K,
        });
    }
    let reflected: Vec<_> = b.axes.iter().map(|s| s.reflect()).collect();
    let mut plus = vec![vec![0.0; k]; k];
    let mut minus = vec![vec![0.0; k]; k];
    for l in 0..k {
        for m in 0..k {
            plus[l][m] = w2sq(&a.axes[l], &b.axes[m]);
            minus[l][m] = w2sq(&a.axes[l], &reflected[m]);
        }
    }

    let mut perm: Vec<usize> = (0..k).collect();
    let mut best: Option<SignedMatch> = None;
    loop {
        for mask in 0u32..(1u32 << k) {
            let mut total = 0.0;
            let mut costs = Vec::with_capacity(k);
            for (l, &m) in perm.iter().enumerate() {
                let c = if mask & (1 << l) != 0 { minus[l][m] } else { plus[l][m] };
                costs.push(c);
                total += c;
            }
            if best.as_ref().is_none_or(|b| total < b.total) {
                best = Some(SignedMatch {
                    permutation: perm.clone(),
                    signs: (0..k)
                        .map(|l| if mask & (1 << l) != 0 { -1 } else { 1 })
                        .collect(),
                    pair_costs: costs,
                    total,
                });
            }
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(best.expect("k >= 0 yields at least one permutation"))
}

/// Advance to the next permutation in lexicographic order.
pub fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// A parameter given either directly or relative to a data-driven scale.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scaled {
    Absolute(f64),
    /// For beta: `factor / median |C+ - C-|`. For eps: `factor * mean(C~)`.
    Relative(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SoftParams {
    pub beta: Scaled,
    pub eps: Scaled,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for SoftParams {
    fn default() -> Self {
        Self {
            beta: Scaled::Relative(10.0),
            eps: Scaled::Relative(1e-2),
            max_iter: 10_000,
            tol: 1e-9,
        }
    }
}

/// Entropic doubly stochastic plan over sigmoid-blended sign costs.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftMatch {
    pub plan: Array2<f64>,
    pub soft_costs: Array2<f64>,
    pub sign_weights: Array2<f64>,
    /// `(1/k) <P, C~> + eps sum P log P`.
    pub objective: f64,
    /// `(1/k) <P, C~>`.
    pub transport: f64,
    pub beta: f64,
    pub eps: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest row-sum violation after the final column update.
    pub marginal_error: f64,
    /// Dual value after each scaling iteration at the target `eps`;
    /// nondecreasing.
    pub dual_history: Vec<f64>,
}

fn sigmoid_weight(beta: f64, plus: f64, minus: f64) -> f64 {
    let z = beta * (plus - minus);
    if z > 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Resolve relative `beta` against the sign gaps of a cost matrix.
pub fn resolve_beta(cm: &CostMatrix, beta: Scaled) -> f64 {
    match beta {
        Scaled::Absolute(b) => b,
        Scaled::Relative(factor) => {
            let mut gaps: Vec<f64> = cm
                .plus
                .iter()
                .zip(cm.minus.iter())
                .map(|(p, m)| (p - m).abs())
                .collect();
            let med = median(&mut gaps);
            if med > 0.0 {
                factor / med
            } else {
                let nonzero: Vec<f64> = gaps.into_iter().filter(|g| *g > 0.0).collect();
                if nonzero.is_empty() {
                    // all gaps zero: the blend is 1/2 for every beta
                    1.0
                } else {
                    factor * nonzero.len() as f64 / nonzero.iter().sum::<f64>()
                }
            }
        }
    }
}

/// Soft matching with explicit `beta` and `eps`.
pub fn soft_match(a: &AxisMarginals, b: &AxisMarginals, beta: f64, eps: f64) -> Result<SoftMatch> {
    let params = SoftParams {
        beta: Scaled::Absolute(beta),
        eps: Scaled::Absolute(eps),
        ..SoftParams::default()
    };
    soft_match_with(a, b, &params)
}

pub fn soft_match_with(a: &AxisMarginals, b: &AxisMarginals, params: &SoftParams) -> Result<SoftMatch> {
    let cm = cost_matrix(a, b)?;
    soft_match_from_costs(&cm, params)
}

/// Entropic plan for a precomputed cost matrix.
///
/// Minimizes `(1/k) <P, C~> + eps sum P log P` over doubly stochastic `P` by
/// log-domain Sinkhorn scaling on `exp(-C~ / (k eps))`. The bandwidth is
/// annealed from `max C~ / k` down to `eps`, halving per stage and warm
/// starting each stage from the last; every iteration counts toward
/// `max_iter`, and `dual_history` covers the final stage only.
pub fn soft_match_from_costs(cm: &CostMatrix, params: &SoftParams) -> Result<SoftMatch> {
    let k = cm.k();
    let beta = resolve_beta(cm, params.beta);
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(RiswieError::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    let mut sign_weights = Array2::zeros((k, k));
    let mut soft_costs = Array2::zeros((k, k));
    for l in 0..k {
        for m in 0..k {
            let (p, n) = (cm.plus[[l, m]], cm.minus[[l, m]]);
            let w = sigmoid_weight(beta, p, n);
            sign_weights[[l, m]] = w;
            soft_costs[[l, m]] = w * p + (1.0 - w) * n;
        }
    }
    let eps = match params.eps {
        Scaled::Absolute(e) => e,
        Scaled::Relative(factor) => {
            let mean = soft_costs.iter().sum::<f64>() / (k * k).max(1) as f64;
            if mean > 0.0 {
                factor * mean
            } else {
                factor
            }
        }
    };
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(RiswieError::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    if params.max_iter == 0 {
        return Err(RiswieError::InvalidParameter("max_iter must be positive".into()));
    }

    let kf = k as f64;
    let scaled = soft_costs.mapv(|c: f64| c / kf);
    // potentials in cost units: P = exp((u_l + v_m - C~/k) / eps)
    let mut u = vec![0.0; k];
    let mut v = vec![0.0; k];
    let mut iterations = 0;
    let top = scaled.iter().fold(0.0f64, |m, c| m.max(*c));
    let mut stage_eps = top.max(eps);
    // the last iteration is kept for the target eps
    while stage_eps > eps && iterations + 1 < params.max_iter {
        let budget = (params.max_iter - iterations - 1).min(STAGE_MAX_ITER);
        let stage = sinkhorn(&scaled, stage_eps, &mut u, &mut v, budget, STAGE_TOL.max(params.tol), None);
        iterations += stage.0;
        stage_eps = (0.5 * stage_eps).max(eps);
        if stage_eps <= eps {
            break;
        }
    }
    let mut dual_history = Vec::new();
    let remaining = params.max_iter - iterations;
    let (used, mut marginal_error) = sinkhorn(
        &scaled,
        eps,
        &mut u,
        &mut v,
        remaining.min(SINKHORN_BEFORE_NEWTON),
        params.tol,
        Some(&mut dual_history),
    );
    iterations += used;
    if marginal_error > params.tol && iterations + 1 < params.max_iter {
        // nearly decoupled blocks make plain scaling crawl; Newton steps on
        // the same dual do not
        iterations += newton(&scaled, eps, &mut u, &mut v, params.max_iter - iterations - 1, params.tol, &mut dual_history);
        let (used, err) = sinkhorn(&scaled, eps, &mut u, &mut v, 1, params.tol, Some(&mut dual_history));
        iterations += used;
        marginal_error = err;
    }
    let converged = marginal_error <= params.tol;
    let log_kernel = scaled.mapv(|c| -c / eps);
    let f: Vec<f64> = u.iter().map(|x| x / eps).collect();
    let g: Vec<f64> = v.iter().map(|x| x / eps).collect();

    let mut plan = Array2::zeros((k, k));
    let mut transport = 0.0;
    let mut entropy = 0.0;
    for l in 0..k {
        for m in 0..k {
            let lp = f[l] + g[m] + log_kernel[[l, m]];
            let p = lp.exp();
            plan[[l, m]] = p;
            transport += p * soft_costs[[l, m]];
            if p > 0.0 {
                entropy += p * lp;
            }
        }
    }
    transport /= kf;
    Ok(SoftMatch {
        plan,
        soft_costs,
        sign_weights,
        objective: transport + eps * entropy,
        transport,
        beta,
        eps,
        iterations,
        converged,
        marginal_error,
        dual_history,
    })
}

const STAGE_TOL: f64 = 1e-6;
const SINKHORN_BEFORE_NEWTON: usize = 200;
const NEWTON_DAMPING: f64 = 1e-10;
const STAGE_MAX_ITER: usize = 500;

/// Log-domain Sinkhorn at a fixed `eps` on uniform marginals, warm-started
/// from `(u, v)`. Returns the iterations used and the final row error; column
/// sums are exact after every iteration.
fn sinkhorn(
    cost: &Array2<f64>,
    eps: f64,
    u: &mut [f64],
    v: &mut [f64],
    max_iter: usize,
    tol: f64,
    mut history: Option<&mut Vec<f64>>,
) -> (usize, f64) {
    let k = u.len();
    let mut scratch = vec![0.0; k];
    let mut error = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        for l in 0..k {
            for m in 0..k {
                scratch[m] = (v[m] - cost[[l, m]]) / eps;
            }
            u[l] = -eps * logsumexp(&scratch);
        }
        for m in 0..k {
            for l in 0..k {
                scratch[l] = (u[l] - cost[[l, m]]) / eps;
            }
            v[m] = -eps * logsumexp(&scratch);
        }
        let mut mass = 0.0;
        error = 0.0f64;
        for l in 0..k {
            let row: f64 = (0..k).map(|m| ((u[l] + v[m] - cost[[l, m]]) / eps).exp()).sum();
            mass += row;
            error = error.max((row - 1.0).abs());
        }
        if let Some(h) = history.as_deref_mut() {
            h.push(u.iter().sum::<f64>() + v.iter().sum::<f64>() - eps * mass + eps * k as f64);
        }
        if error <= tol {
            break;
        }
    }
    (iterations, error)
}

fn marginal_residual(cost: &Array2<f64>, eps: f64, u: &[f64], v: &[f64]) -> f64 {
    let k = u.len();
    let plan = Array2::from_shape_fn((k, k), |(l, m)| ((u[l] + v[m] - cost[[l, m]]) / eps).exp());
    let rows = plan.sum_axis(ndarray::Axis(1));
    let cols = plan.sum_axis(ndarray::Axis(0));
    rows.iter().chain(cols.iter()).fold(0.0f64, |m, s| m.max((s - 1.0).abs()))
}

fn dual_value(cost: &Array2<f64>, eps: f64, u: &[f64], v: &[f64]) -> f64 {
    let k = u.len();
    let mut mass = 0.0;
    for l in 0..k {
        for m in 0..k {
            mass += ((u[l] + v[m] - cost[[l, m]]) / eps).exp();
        }
    }
    u.iter().sum::<f64>() + v.iter().sum::<f64>() - eps * mass + eps * k as f64
}

/// Damped Newton ascent on the entropic dual with the last column potential
/// held fixed. Stops once every row and column sum is within `tol / 2` of 1.
fn newton(
    cost: &Array2<f64>,
    eps: f64,
    u: &mut [f64],
    v: &mut [f64],
    max_steps: usize,
    tol: f64,
    history: &mut Vec<f64>,
) -> usize {
    let k = u.len();
    let dim = 2 * k - 1;
    let mut steps = 0;
    while steps < max_steps {
        let plan = Array2::from_shape_fn((k, k), |(l, m)| ((u[l] + v[m] - cost[[l, m]]) / eps).exp());
        let rows = plan.sum_axis(ndarray::Axis(1));
        let cols = plan.sum_axis(ndarray::Axis(0));
        let mut grad = vec![0.0; dim];
        for l in 0..k {
            grad[l] = 1.0 - rows[l];
        }
        for m in 0..k - 1 {
            grad[k + m] = 1.0 - cols[m];
        }
        if grad.iter().chain(std::iter::once(&(1.0 - cols[k - 1]))).all(|g| g.abs() <= 0.5 * tol) {
            break;
        }
        // negative Hessian times eps
        let mut h = Array2::zeros((dim, dim));
        for l in 0..k {
            h[[l, l]] = rows[l];
            for m in 0..k - 1 {
                h[[l, k + m]] = plan[[l, m]];
                h[[k + m, l]] = plan[[l, m]];
            }
        }
        for m in 0..k - 1 {
            h[[k + m, k + m]] = cols[m];
        }
        // decoupled components leave near-null directions; damp them
        for i in 0..dim {
            h[[i, i]] += NEWTON_DAMPING;
        }
        let Some(dir) = crate::linalg::solve(&h, &grad) else { break };
        let base = dual_value(cost, eps, u, v);
        let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum::<f64>() * eps;
        let residual = grad.iter().fold((1.0 - cols[k - 1]).abs(), |m, g| m.max(g.abs()));
        // near the optimum the dual gain drops below rounding, so a step that
        // keeps the dual within rounding and shrinks the residual also counts
        let noise = 8.0 * f64::EPSILON * (base.abs() + u.iter().chain(v.iter()).map(|x| x.abs()).sum::<f64>());
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let tu: Vec<f64> = (0..k).map(|l| u[l] + t * eps * dir[l]).collect();
            let tv: Vec<f64> = (0..k).map(|m| if m < k - 1 { v[m] + t * eps * dir[k + m] } else { v[m] }).collect();
            let value = dual_value(cost, eps, &tu, &tv);
            if value >= base + 1e-4 * t * slope
                || (value >= base - noise && marginal_residual(cost, eps, &tu, &tv) < residual)
            {
                u.copy_from_slice(&tu);
                v.copy_from_slice(&tv);
                history.push(value);
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        steps += 1;
        if !accepted {
            break;
        }
    }
    steps
}

fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_marginals(k: usize, n: usize, rng: &mut ChaCha8Rng) -> AxisMarginals {
        let axes: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                let spread = rng.random_range(0.2..3.0);
                let shift = rng.random_range(-0.5..0.5);
                (0..n).map(|_| shift + spread * rng.random_range(-1.0..1.0f64).powi(3)).collect()
            })
            .collect();
        AxisMarginals::from_unsorted(&axes).unwrap()
    }

    fn brute_assignment(c: &Array2<f64>) -> f64 {
        let n = c.nrows();
        let mut p: Vec<usize> = (0..n).collect();
        let mut best = f64::INFINITY;
        loop {
            best = best.min(p.iter().enumerate().map(|(r, &col)| c[[r, col]]).sum());
            if !next_permutation(&mut p) {
                return best;
            }
        }
    }

    #[test]
    fn hungarian_small_cases() {
        assert_eq!(hungarian(&array![[1.0, 2.0], [2.0, 1.0]]).unwrap(), (vec![0, 1], 2.0));
        assert_eq!(hungarian(&array![[0.0, 1.0], [1.0, 0.0]]).unwrap(), (vec![0, 1], 0.0));
        assert_eq!(hungarian(&array![[5.0, 1.0], [1.0, 5.0]]).unwrap(), (vec![1, 0], 2.0));
    }

    #[test]
    fn hungarian_matches_enumeration_5x5() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let c = Array2::from_shape_fn((5, 5), |_| rng.random_range(0.0..10.0));
            let (_, total) = hungarian(&c).unwrap();
            assert!((total - brute_assignment(&c)).abs() < 1e-12);
        }
    }

    #[test]
    fn hungarian_lexicographic_ties() {
        // every permutation is optimal
        assert_eq!(hungarian(&Array2::ones((4, 4))).unwrap().0, vec![0, 1, 2, 3]);
        // two optimal assignments: (1,0,2) and (0,1,2) -> pick (0,1,2)
        let c = array![[1.0, 1.0, 9.0], [1.0, 1.0, 9.0], [9.0, 9.0, 0.0]];
        assert_eq!(hungarian(&c).unwrap().0, vec![0, 1, 2]);
        // integer matrix with many ties, compare against first optimum in lexicographic enumeration
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let c = Array2::from_shape_fn((5, 5), |_| rng.random_range(0..3) as f64);
            let best = brute_assignment(&c);
            let mut p: Vec<usize> = (0..5).collect();
            let first = loop {
                let t: f64 = p.iter().enumerate().map(|(r, &col)| c[[r, col]]).sum();
                if t == best {
                    break p.clone();
                }
                next_permutation(&mut p);
            };
            assert_eq!(hungarian(&c).unwrap().0, first);
        }
    }

    #[test]
    fn hungarian_rejects_non_finite() {
        assert!(matches!(
            hungarian(&array![[1.0, f64::NAN], [0.0, 1.0]]),
            Err(RiswieError::NonFinite { row: 0, col: 1 })
        ));
    }

    #[test]
    fn hungarian_beats_random_permutations() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let c = Array2::from_shape_fn((7, 7), |_| rng.random_range(-3.0..3.0));
            let (_, total) = hungarian(&c).unwrap();
            let identity: f64 = (0..7).map(|i| c[[i, i]]).sum();
            assert!(total <= identity + 1e-12);
            for _ in 0..100 {
                let mut p: Vec<usize> = (0..7).collect();
                for i in (1..7).rev() {
                    p.swap(i, rng.random_range(0..=i));
                }
                let t: f64 = p.iter().enumerate().map(|(r, &col)| c[[r, col]]).sum();
                assert!(total <= t + 1e-12);
            }
        }
    }

    #[test]
    fn cost_matrix_identical_has_zero_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_marginals(4, 30, &mut rng);
        let cm = cost_matrix(&a, &a).unwrap();
        for l in 0..4 {
            assert_eq!(cm.cost[[l, l]], 0.0);
        }
    }

    #[test]
    fn cost_matrix_k1_is_pair_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_marginals(1, 12, &mut rng);
        let b = random_marginals(1, 12, &mut rng);
        let cm = cost_matrix(&a, &b).unwrap();
        let pc = pair_cost(&a.axes[0], &b.axes[0]);
        assert_eq!(cm.cost[[0, 0]], pc.cost);
        assert_eq!(cm.signs[[0, 0]], pc.sign);
    }

    #[test]
    fn cost_matrix_entries_recomputed() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_marginals(3, 20, &mut rng);
        let b = random_marginals(3, 20, &mut rng);
        let cm = cost_matrix(&a, &b).unwrap();
        for l in 0..3 {
            for m in 0..3 {
                let plus = w2sq(&a.axes[l], &b.axes[m]);
                let minus = w2sq(&a.axes[l], &b.axes[m].reflect());
                assert!((cm.cost[[l, m]] - plus.min(minus)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn cost_matrix_invariant_under_reflecting_b() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = random_marginals(3, 25, &mut rng);
        let b = random_marginals(3, 25, &mut rng);
        let b_ref = AxisMarginals::new(b.axes.iter().map(|s| s.reflect()).collect());
        let c1 = cost_matrix(&a, &b).unwrap();
        let c2 = cost_matrix(&a, &b_ref).unwrap();
        for l in 0..3 {
            for m in 0..3 {
                assert!((c1.cost[[l, m]] - c2.cost[[l, m]]).abs() < 1e-14);
                if c1.plus[[l, m]] != c1.minus[[l, m]] {
                    assert_eq!(c1.signs[[l, m]], -c2.signs[[l, m]]);
                }
            }
        }
    }

    #[test]
    fn cost_matrix_axis_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = random_marginals(3, 5, &mut rng);
        let b = random_marginals(2, 5, &mut rng);
        assert!(matches!(cost_matrix(&a, &b), Err(RiswieError::AxisCountMismatch { .. })));
    }

    #[test]
    fn brute_force_small_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = random_marginals(1, 9, &mut rng);
        let b = random_marginals(1, 9, &mut rng);
        let bf = brute_force_signed(&a, &b).unwrap();
        assert!((bf.total - pair_cost(&a.axes[0], &b.axes[0]).cost).abs() < 1e-15);

        let a = random_marginals(2, 9, &mut rng);
        let bf = brute_force_signed(&a, &a).unwrap();
        assert_eq!(bf.total, 0.0);
        assert_eq!(bf.permutation, vec![0, 1]);
    }

    #[test]
    fn brute_force_agrees_with_hungarian_k3() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let a = random_marginals(3, 15, &mut rng);
            let b = random_marginals(3, 15, &mut rng);
            let bf = brute_force_signed(&a, &b).unwrap();
            let hm = signed_match(&a, &b).unwrap();
            assert!((bf.total - hm.total).abs() < 1e-12);
        }
    }

    #[test]
    fn brute_force_guard() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let a = random_marginals(9, 3, &mut rng);
        assert!(matches!(
            brute_force_signed(&a, &a),
            Err(RiswieError::KTooLarge { k: 9, .. })
        ));
    }

    #[test]
    fn signed_match_total_is_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let a = random_marginals(4, 11, &mut rng);
        let b = random_marginals(4, 11, &mut rng);
        let m = signed_match(&a, &b).unwrap();
        assert!((m.total - m.pair_costs.iter().sum::<f64>()).abs() < 1e-12);
        let mut seen = m.permutation.clone();
        seen.sort();
        assert_eq!(seen, vec![0, 1, 2, 3]);
    }

    #[test]
    fn soft_k1() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let a = random_marginals(1, 10, &mut rng);
        let b = random_marginals(1, 10, &mut rng);
        let sm = soft_match(&a, &b, 1.0, 0.1).unwrap();
        assert!((sm.plan[[0, 0]] - 1.0).abs() < 1e-12);
        assert!((sm.objective - sm.soft_costs[[0, 0]]).abs() < 1e-12);
    }

    #[test]
    fn soft_large_beta_selects_min_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let a = random_marginals(3, 20, &mut rng);
        let b = random_marginals(3, 20, &mut rng);
        let cm = cost_matrix(&a, &b).unwrap();
        let scale = cm.plus.iter().fold(0.0f64, |m, v| m.max(*v));
        let params = SoftParams {
            beta: Scaled::Absolute(1e6 / scale),
            eps: Scaled::Absolute(0.1),
            ..SoftParams::default()
        };
        let sm = soft_match_from_costs(&cm, &params).unwrap();
        for l in 0..3 {
            for m in 0..3 {
                assert!((sm.soft_costs[[l, m]] - cm.cost[[l, m]]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn soft_small_eps_matches_hard() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..20 {
            let a = random_marginals(3, 20, &mut rng);
            let b = random_marginals(3, 20, &mut rng);
            let cm = cost_matrix(&a, &b).unwrap();
            let hard = signed_match_from_costs(&cm).unwrap().total / 3.0;
            let params = SoftParams {
                beta: Scaled::Relative(1e6),
                eps: Scaled::Relative(1e-4),
                ..SoftParams::default()
            };
            let sm = soft_match_from_costs(&cm, &params).unwrap();
            let scale = cm.plus.iter().fold(0.0f64, |m, v| m.max(*v));
            assert!((sm.transport - hard).abs() <= 1e-3 * scale);
        }
    }

    #[test]
    fn soft_plan_is_doubly_stochastic_and_dual_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..20 {
            let k = rng.random_range(2..6);
            let a = random_marginals(k, 15, &mut rng);
            let b = random_marginals(k, 15, &mut rng);
            let sm = soft_match_with(&a, &b, &SoftParams::default()).unwrap();
            // the last update is a column scaling, so columns are exact and
            // rows carry the reported violation
            for l in 0..k {
                let row: f64 = sm.plan.row(l).sum();
                let col: f64 = sm.plan.column(l).sum();
                assert!((col - 1.0).abs() < 1e-12);
                assert!((row - 1.0).abs() <= sm.marginal_error + 1e-12);
            }
            assert!(sm.marginal_error < 1e-3);
            assert!(sm.plan.iter().all(|p| *p >= 0.0));
            let slack = 1e-12 * sm.dual_history.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            assert!(sm.dual_history.windows(2).all(|w| w[1] >= w[0] - slack));
        }
    }

    #[test]
    fn soft_transport_nonincreasing_as_eps_shrinks() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let a = random_marginals(4, 15, &mut rng);
            let b = random_marginals(4, 15, &mut rng);
            let cm = cost_matrix(&a, &b).unwrap();
            let scale = cm.cost.iter().sum::<f64>() / 16.0;
            let hard = signed_match_from_costs(&cm).unwrap().total / 4.0;
            let mut last = f64::INFINITY;
            for f in [1e-1, 1e-2, 1e-3] {
                let params = SoftParams {
                    beta: Scaled::Absolute(1.0 / scale),
                    eps: Scaled::Absolute(f * scale),
                    ..SoftParams::default()
                };
                let sm = soft_match_from_costs(&cm, &params).unwrap();
                assert!(sm.transport <= last + 1e-9);
                last = sm.transport;
            }
            // soft costs are at least the hard minimum entrywise
            assert!(last >= hard - 1e-9);
        }
    }

    #[test]
    fn soft_rejects_bad_params() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let a = random_marginals(2, 5, &mut rng);
        assert!(soft_match(&a, &a, 0.0, 1.0).is_err());
        assert!(soft_match(&a, &a, 1.0, -1.0).is_err());
        let zero = SoftParams {
            max_iter: 0,
            ..SoftParams::default()
        };
        assert!(soft_match_with(&a, &a, &zero).is_err());
    }

    #[test]
    fn soft_iterations_stay_within_budget() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for max_iter in [1, 2, 3, 7, 40, 600] {
            let a = random_marginals(4, 15, &mut rng);
            let b = random_marginals(4, 15, &mut rng);
            let params = SoftParams {
                max_iter,
                tol: 1e-15,
                ..SoftParams::default()
            };
            let sm = soft_match_with(&a, &b, &params).unwrap();
            assert!(sm.iterations <= max_iter, "{} > {max_iter}", sm.iterations);
        }
    }
}
