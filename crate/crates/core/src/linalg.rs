//! Small dense helpers shared by the bound and estimator code.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Relative eigenvalue threshold below which a direction counts as null.
pub const NULLSPACE_REL_TOL: f64 = 1e-10;

/// Relative threshold used by the positive-definiteness check.
pub const SPD_REL_TOL: f64 = 1e-12;

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(1.0);
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > tol * scale {
                return false;
            }
        }
    }
    true
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Symmetric positive-definite check: smallest eigenvalue must exceed
/// `SPD_REL_TOL` times the largest.
pub fn is_spd(m: &DMatrix<f64>) -> bool {
    if !is_symmetric(m, 1e-12) || m.nrows() == 0 || !m.iter().all(|v| v.is_finite()) {
        return false;
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    max > 0.0 && min > SPD_REL_TOL * max
}

/// Moore–Penrose pseudo-inverse of a symmetric PSD matrix via its eigen
/// decomposition, dropping eigenvalues below `NULLSPACE_REL_TOL * max`.
pub fn pseudo_inverse_sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let eig = SymmetricEigen::new(symmetrize(m));
    let max = eig.eigenvalues.amax();
    let mut out = DMatrix::zeros(n, n);
    if max == 0.0 {
        return out;
    }
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > NULLSPACE_REL_TOL * max {
            let v = eig.eigenvectors.column(i);
            out += (v * v.transpose()) / lambda;
        }
    }
    out
}

/// Σ^{-1/2} for a symmetric positive-definite Σ.
pub fn inv_sqrt_spd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let d = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| 1.0 / l.sqrt()),
    );
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose()
}

/// Numerical rank from singular values, relative to the largest one.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}

pub fn trace(m: &DMatrix<f64>) -> f64 {
    m.diagonal().iter().sum()
}

/// Pairwise (cascade) summation. The result depends only on the order of
/// `values`, never on how the values were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_centering_is_itself() {
        let n = 5;
        let p = DMatrix::<f64>::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
        let pi = pseudo_inverse_sym(&p);
        assert!((pi - &p).amax() < 1e-12);
    }

    #[test]
    fn inv_sqrt_squares_to_inverse() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let w = inv_sqrt_spd(&m);
        let inv = m.clone().try_inverse().unwrap();
        assert!((&w * &w - inv).amax() < 1e-12);
    }

    #[test]
    fn spd_check_rejects_singular_and_asymmetric() {
        assert!(!is_spd(&DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0])));
        assert!(!is_spd(&DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0])));
        assert!(is_spd(&DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])));
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise_sum(&v), 500_500.0);
    }
}
