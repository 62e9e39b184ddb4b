//! Test-only oracles, independent of the library's structured code paths.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Rank by Gaussian elimination with partial pivoting.
pub fn row_reduce_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    let mut a = m.clone();
    let (rows, cols) = a.shape();
    let mut rank = 0;
    for col in 0..cols {
        if rank == rows {
            break;
        }
        let pivot = (rank..rows)
            .max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs()))
            .unwrap();
        if a[(pivot, col)].abs() <= tol {
            continue;
        }
        a.swap_rows(rank, pivot);
        for r in 0..rows {
            if r != rank {
                let f = a[(r, col)] / a[(rank, col)];
                for c in col..cols {
                    let v = a[(rank, c)];
                    a[(r, c)] -= f * v;
                }
            }
        }
        rank += 1;
    }
    rank
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Dense `Σ` with a well-conditioned spectrum.
pub fn random_spd<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.5
}

pub fn random_variances<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| 10f64.powf(rng.random_range(-4.0..-1.0))).collect()
}

pub fn random_matrix<R: Rng>(rng: &mut R, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

/// Constrained WLS on the full `NK`-dimensional system, with every Kronecker
/// factor materialized and the KKT system solved directly.
pub fn dense_constrained_wls(
    y: &DMatrix<f64>,
    w: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DVector<f64>,
) -> DVector<f64> {
    let (n, k) = y.shape();
    let ik = DMatrix::identity(k, k);
    let p = DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    let h = kron(&DMatrix::identity(n, n), &DMatrix::from_element(k, 1, 1.0));
    let wp = kron(w, &ik) * kron(&p, &ik);
    let a = &wp * &h;
    let yv = DVector::from_fn(n * k, |i, _| y[(i / k, i % k)]);
    let m = c.nrows();
    let mut kkt = DMatrix::zeros(n + m, n + m);
    kkt.view_mut((0, 0), (n, n)).copy_from(&(a.transpose() * &a));
    kkt.view_mut((0, n), (n, m)).copy_from(&c.transpose());
    kkt.view_mut((n, 0), (m, n)).copy_from(c);
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(a.transpose() * (&wp * yv)));
    rhs.rows_mut(n, m).copy_from(d);
    kkt.lu().solve(&rhs).unwrap().rows(0, n).into_owned()
}

/// Nullspace route: `θ = θ₀ + Uα` with `Cθ₀ = d`, unconstrained in `α`.
pub fn nullspace_constrained_wls(
    y: &DMatrix<f64>,
    w: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DVector<f64>,
    u: &DMatrix<f64>,
) -> DVector<f64> {
    let (n, k) = y.shape();
    let p = DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    let b = w * p;
    let a = b.transpose() * &b;
    let theta0 = c.transpose() * (c * c.transpose()).try_inverse().unwrap() * d;
    let means = DVector::from_fn(n, |i, _| y.row(i).sum() / k as f64);
    let lhs = u.transpose() * &a * u;
    let rhs = u.transpose() * &a * (means - &theta0);
    theta0 + u * lhs.try_inverse().unwrap() * rhs
}
