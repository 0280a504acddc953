//! Deterministic symmetric eigensolver (cyclic Jacobi).

use ndarray::Array2;

use crate::error::{Result, RiswieError};

const SYMMETRY_TOL: f64 = 1e-9;
const OFF_DIAGONAL_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Eigenvalues sorted descending with matching orthonormal eigenvector columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricSpectrum {
    pub eigenvalues: Vec<f64>,
    /// Column `j` is the eigenvector for `eigenvalues[j]`.
    pub eigenvectors: Array2<f64>,
}

impl SymmetricSpectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V diag(lambda) V^T`.
    pub fn reconstruct(&self) -> Array2<f64> {
        let d = self.dim();
        let mut out = Array2::zeros((d, d));
        for (j, &lambda) in self.eigenvalues.iter().enumerate() {
            let v = self.eigenvectors.column(j);
            for a in 0..d {
                let va = lambda * v[a];
                for b in 0..d {
                    out[[a, b]] += va * v[b];
                }
            }
        }
        out
    }
}

/// Largest absolute asymmetry `|m_ij - m_ji|`.
pub fn asymmetry(matrix: &Array2<f64>) -> f64 {
    let n = matrix.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((matrix[[i, j]] - matrix[[j, i]]).abs());
        }
    }
    worst
}

/// Eigendecomposition of a symmetric matrix.
///
/// The input is symmetrized by averaging with its transpose, then diagonalized
/// by cyclic Jacobi sweeps over `(p, q)` pairs in row-major order until the
/// off-diagonal Frobenius norm drops below `1e-12` times the diagonal norm
/// (at most 100 sweeps). Eigenpairs are stably sorted by descending eigenvalue,
/// and each eigenvector is flipped so that its largest-magnitude component is
/// positive (lowest index wins ties). Identical input bits give identical
/// output bits.
pub fn eig_sym(matrix: &Array2<f64>) -> Result<SymmetricSpectrum> {
    let n = matrix.nrows();
    if matrix.ncols() != n {
        return Err(RiswieError::DimensionMismatch {
            expected: n,
            got: matrix.ncols(),
        });
    }
    if let Some(((r, c), _)) = matrix.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(RiswieError::NonFinite { row: r, col: c });
    }
    let scale = matrix.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let asym = asymmetry(matrix);
    if asym > SYMMETRY_TOL * scale {
        return Err(RiswieError::NonSymmetric { asymmetry: asym });
    }

    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (matrix[[i, j]] + matrix[[j, i]]);
        }
    }
    // Row r of `vt` is eigenvector r.
    let mut vt = vec![0.0; n * n];
    for i in 0..n {
        vt[i * n + i] = 1.0;
    }

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let (off, diag) = norms(&a, n);
        if off <= OFF_DIAGONAL_TOL * diag {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut vt, n, p, q);
            }
        }
    }
    if !converged {
        let (off, diag) = norms(&a, n);
        converged = off <= OFF_DIAGONAL_TOL * diag;
        if !converged {
            log::warn!("jacobi stopped after {MAX_SWEEPS} sweeps (off={off:e}, diag={diag:e})");
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    // sort_by is stable, so equal eigenvalues keep sweep order
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));

    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = Array2::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        eigenvalues.push(a[src * n + src]);
        let row = &vt[src * n..(src + 1) * n];
        let mut pivot = 0;
        for (i, v) in row.iter().enumerate() {
            if v.abs() > row[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if row[pivot] < 0.0 { -1.0 } else { 1.0 };
        for (i, v) in row.iter().enumerate() {
            eigenvectors[[i, col]] = sign * v;
        }
    }
    Ok(SymmetricSpectrum {
        eigenvalues,
        eigenvectors,
    })
}

fn norms(a: &[f64], n: usize) -> (f64, f64) {
    let mut off = 0.0;
    let mut diag = 0.0;
    for i in 0..n {
        for j in 0..n {
            let v = a[i * n + j];
            if i == j {
                diag += v * v;
            } else {
                off += v * v;
            }
        }
    }
    (off.sqrt(), diag.sqrt())
}

fn rotate(a: &mut [f64], vt: &mut [f64], n: usize, p: usize, q: usize) {
    let apq = a[p * n + q];
    if apq == 0.0 {
        return;
    }
    let app = a[p * n + p];
    let aqq = a[q * n + q];
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for r in 0..n {
        if r == p || r == q {
            continue;
        }
        let arp = a[p * n + r];
        let arq = a[q * n + r];
        let new_p = c * arp - s * arq;
        let new_q = s * arp + c * arq;
        a[p * n + r] = new_p;
        a[q * n + r] = new_q;
        a[r * n + p] = new_p;
        a[r * n + q] = new_q;
    }
    a[p * n + p] = app - t * apq;
    a[q * n + q] = aqq + t * apq;
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;

    let (head, tail) = vt.split_at_mut(q * n);
    let row_p = &mut head[p * n..(p + 1) * n];
    let row_q = &mut tail[..n];
    for (vp, vq) in row_p.iter_mut().zip(row_q.iter_mut()) {
        let x = *vp;
        let y = *vq;
        *vp = c * x - s * y;
        *vq = s * x + c * y;
    }
}

/// Solve `a x = b` by Gaussian elimination with partial pivoting. `None` if a
/// pivot vanishes.
pub fn solve(a: &Array2<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m = a.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[[i, col]].abs().total_cmp(&m[[j, col]].abs()))?;
        if m[[pivot, col]] == 0.0 || !m[[pivot, col]].is_finite() {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                m.swap([col, j], [pivot, j]);
            }
            x.swap(col, pivot);
        }
        for i in (col + 1)..n {
            let f = m[[i, col]] / m[[col, col]];
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                m[[i, j]] -= f * m[[col, j]];
            }
            x[i] -= f * x[col];
        }
    }
    for i in (0..n).rev() {
        let mut acc = x[i];
        for j in (i + 1)..n {
            acc -= m[[i, j]] * x[j];
        }
        x[i] = acc / m[[i, i]];
    }
    Some(x)
}

/// Spectral norm of a symmetric matrix (largest absolute eigenvalue).
pub fn spectral_norm_sym(matrix: &Array2<f64>) -> Result<f64> {
    let spec = eig_sym(matrix)?;
    Ok(spec.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        a.iter()
            .zip(b.iter())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    }

    fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        let mut m = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.random_range(-1.0..1.0);
                m[[i, j]] = v;
                m[[j, i]] = v;
            }
        }
        m
    }

    #[test]
    fn solve_small_system() {
        let a = array![[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]];
        let x = solve(&a, &[3.0, 5.0, 5.0]).unwrap();
        for (v, e) in x.iter().zip([1.0, 1.0, 1.0]) {
            assert!((v - e).abs() < 1e-14);
        }
        assert!(solve(&array![[1.0, 2.0], [2.0, 4.0]], &[1.0, 1.0]).is_none());
    }

    #[test]
    fn rank_one_two_by_two() {
        let spec = eig_sym(&array![[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!((spec.eigenvalues[0] - 2.0).abs() < 1e-15);
        assert!(spec.eigenvalues[1].abs() < 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((spec.eigenvectors[[0, 0]] - h).abs() < 1e-15);
        assert!((spec.eigenvectors[[1, 0]] - h).abs() < 1e-15);
    }

    #[test]
    fn identity_keeps_identity_columns() {
        let spec = eig_sym(&Array2::eye(4)).unwrap();
        assert_eq!(spec.eigenvalues, vec![1.0; 4]);
        assert_eq!(spec.eigenvectors, Array2::eye(4));
    }

    #[test]
    fn reconstructs_random_five_by_five() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = random_symmetric(5, &mut rng);
            let spec = eig_sym(&m).unwrap();
            let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(max_abs_diff(&spec.reconstruct(), &m) <= 1e-7 * (1.0 + scale));
            let v = &spec.eigenvectors;
            assert!(max_abs_diff(&v.t().dot(v), &Array2::eye(5)) <= 1e-8);
            assert!(spec.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn sign_convention_largest_component_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = eig_sym(&random_symmetric(6, &mut rng)).unwrap();
        for col in spec.eigenvectors.columns() {
            let mut pivot = 0;
            for i in 0..col.len() {
                if col[i].abs() > col[pivot].abs() {
                    pivot = i;
                }
            }
            assert!(col[pivot] > 0.0);
        }
    }

    #[test]
    fn deterministic_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = random_symmetric(7, &mut rng);
        assert_eq!(eig_sym(&m).unwrap(), eig_sym(&m).unwrap());
    }

    #[test]
    fn rejects_asymmetric() {
        let err = eig_sym(&array![[1.0, 2.0], [0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, RiswieError::NonSymmetric { .. }));
        // tiny asymmetry is averaged away
        assert!(eig_sym(&array![[1.0, 0.5 + 1e-12], [0.5, 1.0]]).is_ok());
    }

    #[test]
    fn spectral_norm_uses_absolute_values() {
        let n = spectral_norm_sym(&array![[-3.0, 0.0], [0.0, 2.0]]).unwrap();
        assert_eq!(n, 3.0);
    }
}
