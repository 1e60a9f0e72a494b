//! Exact symmetric eigendecomposition by cyclic Jacobi rotations, the
//! ground-truth inverse square root built on it, and the spectral analysis
//! of the normalized iteration matrix `A = I - Σ_ε / ‖Σ_ε‖_F`.

use crate::error::{Error, Result};
use crate::matrix::{Matrix, SymmetricMatrix};

const MAX_SWEEPS: usize = 100;

/// Smallest eigenvalue accepted by [`oracle_inverse_sqrt`].
pub const INVERSE_SQRT_THRESHOLD: f64 = 1e-12;

/// Largest disagreement tolerated between the closed-form and directly
/// computed eigenvalues of `A`.
pub const CROSS_CHECK_TOLERANCE: f64 = 1e-10;

/// Eigenvector components below this magnitude are skipped when fixing signs.
const SIGN_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Orthogonal; column `k` pairs with `eigenvalues[k]`.
    pub eigenvectors: Matrix,
}

impl EigenDecomposition {
    pub fn order(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Q f(Λ) Q^T`.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> SymmetricMatrix {
        let values: Vec<f64> = self.eigenvalues.iter().map(|&v| f(v)).collect();
        SymmetricMatrix::from_eigen(&self.eigenvectors, &values)
    }

    pub fn reconstruct(&self) -> SymmetricMatrix {
        self.map_spectrum(|v| v)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }
}

/// Cyclic Jacobi with a fixed row-by-row sweep order.
///
/// A rotation is skipped when `|a_pq| <= eps * sqrt(|a_pp a_qq|)`, which
/// keeps small eigenvalues relatively accurate; the sweep loop ends once a
/// full sweep performs no rotation. Eigenvectors are signed so that their
/// first non-negligible component is positive.
pub fn eigendecompose(m: &SymmetricMatrix) -> Result<EigenDecomposition> {
    let n = m.order();
    let mut a = m.as_slice().to_vec();
    let mut v = Matrix::identity(n).into_vec();
    let floor = f64::EPSILON * f64::EPSILON * m.frobenius_norm();

    let mut converged = n <= 1;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let threshold = (f64::EPSILON * (app * aqq).abs().sqrt()).max(floor);
                if apq.abs() <= threshold {
                    continue;
                }
                rotated = true;
                rotate(&mut a, &mut v, n, p, q);
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(Error::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let diag: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]));

    let eigenvalues = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let sign = (0..n)
            .map(|row| v[row * n + src])
            .find(|c| c.abs() > SIGN_THRESHOLD)
            .map_or(1.0, f64::signum);
        for row in 0..n {
            vectors.set(row, col, sign * v[row * n + src]);
        }
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors: vectors,
    })
}

/// Applies the rotation that annihilates `a[p][q]`: `A <- P^T A P`, `V <- V P`.
fn rotate(a: &mut [f64], v: &mut [f64], n: usize, p: usize, q: usize) {
    let apq = a[p * n + q];
    let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    a[p * n + p] -= t * apq;
    a[q * n + q] += t * apq;
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[k * n + p];
        let akq = a[k * n + q];
        let new_kp = c * akp - s * akq;
        let new_kq = s * akp + c * akq;
        a[k * n + p] = new_kp;
        a[p * n + k] = new_kp;
        a[k * n + q] = new_kq;
        a[q * n + k] = new_kq;
    }
    for k in 0..n {
        let vkp = v[k * n + p];
        let vkq = v[k * n + q];
        v[k * n + p] = c * vkp - s * vkq;
        v[k * n + q] = s * vkp + c * vkq;
    }
}

/// Ground-truth `m^{-1/2} = Q Λ^{-1/2} Q^T`.
pub fn oracle_inverse_sqrt(m: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let eig = eigendecompose(m)?;
    let smallest = eig.min_eigenvalue();
    if smallest < INVERSE_SQRT_THRESHOLD {
        return Err(Error::EigenvalueTooSmall {
            value: smallest,
            threshold: INVERSE_SQRT_THRESHOLD,
        });
    }
    Ok(eig.map_spectrum(|v| 1.0 / v.sqrt()))
}

/// Singular values of a symmetric matrix, `|λ_i|` sorted descending.
pub fn singular_values(m: &SymmetricMatrix) -> Result<Vec<f64>> {
    let mut values: Vec<f64> = eigendecompose(m)?.eigenvalues.iter().map(|v| v.abs()).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// Spectrum of `A = I - Σ_ε / ‖Σ_ε‖_F` and the `‖A‖_2 < 1` verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub frobenius_norm: f64,
    /// `1 - σ_i / sqrt(Σ_j σ_j²)` from the spectrum of `Σ_ε`, descending.
    pub a_eigenvalues: Vec<f64>,
    /// Eigenvalues of the explicitly formed `A`, descending.
    pub a_eigenvalues_direct: Vec<f64>,
    pub cross_check_deviation: f64,
    pub a_singular_values: Vec<f64>,
    pub sigma_max_a: f64,
    pub satisfies_criterion: bool,
}

pub fn analyze_convergence(sigma_eps: &SymmetricMatrix) -> Result<SpectralReport> {
    let norm = sigma_eps.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let spectrum = eigendecompose(sigma_eps)?;
    let min = spectrum.min_eigenvalue();
    if min < -1e-9 * norm.max(1.0) {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue: min });
    }

    // For a PSD matrix the singular values are the eigenvalues.
    let spectral_norm = spectrum.eigenvalues.iter().map(|s| s * s).sum::<f64>().sqrt();
    let a_eigenvalues: Vec<f64> = spectrum
        .eigenvalues
        .iter()
        .rev()
        .map(|s| 1.0 - s / spectral_norm)
        .collect();

    let a = SymmetricMatrix::symmetrized(
        Matrix::identity(sigma_eps.order()).sub(&sigma_eps.as_matrix().scale(1.0 / norm)),
    );
    let a_eigenvalues_direct = eigendecompose(&a)?.eigenvalues;

    let deviation = a_eigenvalues
        .iter()
        .zip(&a_eigenvalues_direct)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if !(deviation <= CROSS_CHECK_TOLERANCE) {
        return Err(Error::CrossCheck { deviation });
    }

    let a_singular_values: Vec<f64> = a_eigenvalues.iter().map(|v| v.abs()).collect();
    let sigma_max_a = a_singular_values.iter().copied().fold(0.0, f64::max);
    Ok(SpectralReport {
        frobenius_norm: norm,
        a_eigenvalues,
        a_eigenvalues_direct,
        cross_check_deviation: deviation,
        a_singular_values,
        sigma_max_a,
        satisfies_criterion: sigma_max_a < 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_spectrum() {
        let eig = eigendecompose(&SymmetricMatrix::identity(3)).unwrap();
        assert_eq!(eig.eigenvalues, vec![1.0; 3]);
        assert_eq!(eig.eigenvectors, Matrix::identity(3));
    }

    #[test]
    fn diagonal_is_sorted_with_axis_vectors() {
        let eig = eigendecompose(&SymmetricMatrix::from_diagonal(&[1.0, 4.0])).unwrap();
        assert_eq!(eig.eigenvalues, vec![4.0, 1.0]);
        assert_eq!(eig.eigenvectors.as_slice(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn rank_one_two_by_two() {
        let m = SymmetricMatrix::new(2, vec![2.0, 2.0, 2.0, 2.0]).unwrap();
        let eig = eigendecompose(&m).unwrap();
        assert!((eig.eigenvalues[0] - 4.0).abs() < 1e-14);
        assert!(eig.eigenvalues[1].abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((eig.eigenvectors.get(0, 0) - h).abs() < 1e-14);
        assert!((eig.eigenvectors.get(1, 0) - h).abs() < 1e-14);
        assert!(eig.eigenvectors.get(0, 1) > 0.0);
    }

    #[test]
    fn inverse_sqrt_examples() {
        let id = SymmetricMatrix::identity(3);
        assert_eq!(oracle_inverse_sqrt(&id).unwrap(), id);
        let w = oracle_inverse_sqrt(&SymmetricMatrix::from_diagonal(&[4.0, 1.0])).unwrap();
        assert_eq!(w.as_slice(), &[0.5, 0.0, 0.0, 1.0]);
        let w = oracle_inverse_sqrt(&SymmetricMatrix::from_diagonal(&[9.0])).unwrap();
        assert!((w.get(0, 0) - 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn inverse_sqrt_rejects_singular() {
        let m = SymmetricMatrix::new(2, vec![2.0, 2.0, 2.0, 2.0]).unwrap();
        assert!(matches!(
            oracle_inverse_sqrt(&m),
            Err(Error::EigenvalueTooSmall { .. })
        ));
    }

    #[test]
    fn analyze_diag_three_four() {
        let r = analyze_convergence(&SymmetricMatrix::from_diagonal(&[3.0, 4.0])).unwrap();
        assert_eq!(r.frobenius_norm, 5.0);
        assert!((r.a_eigenvalues[0] - 0.4).abs() < 1e-15);
        assert!((r.a_eigenvalues[1] - 0.2).abs() < 1e-15);
        assert!((r.sigma_max_a - 0.4).abs() < 1e-15);
        assert!(r.satisfies_criterion);
    }

    #[test]
    fn analyze_identity_and_scalar() {
        let r = analyze_convergence(&SymmetricMatrix::identity(2)).unwrap();
        let expected = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
        for v in &r.a_eigenvalues {
            assert!((v - expected).abs() < 1e-15);
        }
        assert!(r.satisfies_criterion);

        for c in [1e-8, 0.3, 7.0, 1e8] {
            let r = analyze_convergence(&SymmetricMatrix::from_diagonal(&[c])).unwrap();
            assert_eq!(r.a_eigenvalues, vec![0.0]);
            assert_eq!(r.sigma_max_a, 0.0);
        }
    }

    #[test]
    fn analyze_rejects_zero_and_indefinite() {
        assert_eq!(analyze_convergence(&SymmetricMatrix::zeros(3)), Err(Error::ZeroNorm));
        assert!(matches!(
            analyze_convergence(&SymmetricMatrix::from_diagonal(&[1.0, -1.0])),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn singular_values_of_indefinite() {
        let s = singular_values(&SymmetricMatrix::from_diagonal(&[1.0, -3.0, 2.0])).unwrap();
        assert_eq!(s, vec![3.0, 2.0, 1.0]);
    }
}
