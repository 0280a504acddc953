use std::collections::BTreeMap;

use ndarray::Array2;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::DistanceMatrix;
use crate::error::{Result, RiswieError};
use crate::matching::hungarian;
use crate::rng::stream_rng;

/// Balanced partition of `0..m` into `K` stacks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackAssignment {
    /// Members sorted ascending; stacks ordered by their smallest member.
    pub stacks: Vec<Vec<usize>>,
    /// Sum of within-stack pairwise distances.
    pub cost: f64,
}

impl StackAssignment {
    pub fn len(&self) -> usize {
        self.stacks.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stack index of every item.
    pub fn labels(&self) -> Vec<usize> {
        let mut out = vec![0; self.len()];
        for (s, members) in self.stacks.iter().enumerate() {
            for &i in members {
                out[i] = s;
            }
        }
        out
    }

    fn canonical(mut stacks: Vec<Vec<usize>>, d: &Array2<f64>) -> Self {
        for s in &mut stacks {
            s.sort_unstable();
        }
        stacks.sort_by_key(|s| s.first().copied());
        let cost = within_cost(&stacks, d);
        Self { stacks, cost }
    }
}

fn within_cost(stacks: &[Vec<usize>], d: &Array2<f64>) -> f64 {
    let mut cost = 0.0;
    for s in stacks {
        for (a, &i) in s.iter().enumerate() {
            for &j in &s[a + 1..] {
                cost += d[[i, j]];
            }
        }
    }
    cost
}

/// Farthest-point seeding from `start`: repeatedly add the item whose
/// nearest chosen seed is farthest (lowest index on ties).
fn farthest_point_seeds(d: &Array2<f64>, start: usize, k: usize) -> Vec<usize> {
    let m = d.nrows();
    let mut seeds = vec![start];
    let mut nearest: Vec<f64> = (0..m).map(|t| d[[t, start]]).collect();
    let mut chosen = vec![false; m];
    chosen[start] = true;
    while seeds.len() < k {
        let mut best = None;
        for t in 0..m {
            if chosen[t] {
                continue;
            }
            if best.is_none_or(|b: usize| nearest[t] > nearest[b]) {
                best = Some(t);
            }
        }
        let t = best.expect("k <= m leaves a candidate");
        chosen[t] = true;
        seeds.push(t);
        for u in 0..m {
            nearest[u] = nearest[u].min(d[[u, t]]);
        }
    }
    seeds
}

/// Greedy fill: repeatedly place the unassigned item and open stack with the
/// smallest added cost `c[r][k] = sum_{b in stack k} D[r][b]`, ties to the
/// lowest item then lowest stack.
fn greedy_fill(d: &Array2<f64>, seeds: &[usize]) -> Vec<Vec<usize>> {
    let m = d.nrows();
    let k = seeds.len();
    let cap = m / k;
    let mut stacks: Vec<Vec<usize>> = seeds.iter().map(|&s| vec![s]).collect();
    let mut assigned = vec![false; m];
    for &s in seeds {
        assigned[s] = true;
    }
    let mut added = Array2::<f64>::zeros((m, k));
    for r in 0..m {
        for (s, &seed) in seeds.iter().enumerate() {
            added[[r, s]] = d[[r, seed]];
        }
    }
    for _ in 0..(m - k) {
        let mut best: Option<(usize, usize)> = None;
        for r in (0..m).filter(|&r| !assigned[r]) {
            for s in (0..k).filter(|&s| stacks[s].len() < cap) {
                if best.is_none_or(|(br, bs)| added[[r, s]] < added[[br, bs]]) {
                    best = Some((r, s));
                }
            }
        }
        let (r, s) = best.expect("open stack and free item exist");
        assigned[r] = true;
        stacks[s].push(r);
        for u in 0..m {
            added[[u, s]] += d[[u, r]];
        }
    }
    stacks
}

/// Balanced stack assignment by farthest-point seeding and greedy filling.
///
/// Every item is tried as the first seed; `restarts` additional runs use `K`
/// distinct random seeds drawn from `seed`. The lowest-cost partition wins,
/// earliest start on ties.
pub fn stack_assign(d: &DistanceMatrix, k: usize, restarts: usize, seed: u64) -> Result<StackAssignment> {
    let m = d.len();
    if k == 0 || m == 0 || !m.is_multiple_of(k) {
        return Err(RiswieError::NotDivisible { items: m, stacks: k });
    }
    let values = d.values();
    let mut best: Option<StackAssignment> = None;
    let mut consider = |stacks: Vec<Vec<usize>>| {
        let cost = within_cost(&stacks, values);
        if best.as_ref().is_none_or(|b| cost < b.cost) {
            best = Some(StackAssignment::canonical(stacks, values));
        }
    };
    for start in 0..m {
        consider(greedy_fill(values, &farthest_point_seeds(values, start, k)));
    }
    for r in 0..restarts {
        let mut rng = stream_rng(seed, r as u64);
        let seeds = sample(&mut rng, m, k).into_vec();
        consider(greedy_fill(values, &seeds));
    }
    Ok(best.expect("at least one start"))
}

/// Fraction of items whose stack agrees with `truth` under the best
/// one-to-one relabeling of stacks.
pub fn match_accuracy<T: Ord + Clone>(predicted: &StackAssignment, truth: &[T]) -> Result<f64> {
    let m = predicted.len();
    if truth.len() != m {
        return Err(RiswieError::LabelCardinalityMismatch(format!(
            "{} labels for {m} items",
            truth.len()
        )));
    }
    let mut index = BTreeMap::new();
    for t in truth {
        let next = index.len();
        index.entry(t.clone()).or_insert(next);
    }
    let k = predicted.stacks.len();
    if index.len() != k {
        return Err(RiswieError::LabelCardinalityMismatch(format!(
            "{} distinct labels for {k} stacks",
            index.len()
        )));
    }
    let mut overlap = Array2::<f64>::zeros((k, k));
    for (s, members) in predicted.stacks.iter().enumerate() {
        for &i in members {
            overlap[[s, index[&truth[i]]]] += 1.0;
        }
    }
    let (_, total) = hungarian(&overlap.mapv(|c| -c))?;
    Ok(-total / m as f64)
}
