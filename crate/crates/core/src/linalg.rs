//! Dense helpers: symmetric eigendecomposition, power iteration, inner products.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use crate::error::{ensure, Result};
use crate::rng::{substream, Stream};
use crate::Real;

/// Frobenius inner product `⟨A, B⟩ = tr(AᵀB)`.
pub fn frob_inner<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    a.iter().zip(b.iter()).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn frob_norm_sq<T: Real>(a: &DMatrix<T>) -> T {
    a.iter().fold(T::zero(), |acc, &x| acc + x * x)
}

/// `(A + Aᵀ)/2`.
pub fn symmetrize<T: Real>(a: &DMatrix<T>) -> DMatrix<T> {
    (a + a.transpose()) * T::lit(0.5)
}

/// Eigenpairs of a symmetric matrix sorted by descending eigenvalue.
///
/// Ties keep the order the underlying solver produced.
pub fn sym_eigen_desc<T: Real>(a: &DMatrix<T>) -> Result<(DVector<T>, DMatrix<T>)> {
    ensure!(a.is_square(), Dimension, "eigendecomposition of a {}x{} matrix", a.nrows(), a.ncols());
    let eig = SymmetricEigen::new(symmetrize(a));
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(a.nrows(), a.nrows());
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

pub fn lambda_max_sym<T: Real>(a: &DMatrix<T>) -> Result<T> {
    Ok(sym_eigen_desc(a)?.0[0])
}

pub fn lambda_min_sym<T: Real>(a: &DMatrix<T>) -> Result<T> {
    let (values, _) = sym_eigen_desc(a)?;
    Ok(values[values.len() - 1])
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
///
/// Stops once successive Rayleigh quotients agree to `rel_tol`. The start
/// vector is a fixed pseudo-random draw, so the estimate is deterministic.
pub fn power_iteration<T: Real>(a: &DMatrix<T>, rel_tol: T, max_iter: usize) -> Result<T> {
    ensure!(a.is_square(), Dimension, "power iteration on a {}x{} matrix", a.nrows(), a.ncols());
    let n = a.nrows();
    let mut rng = substream(0x5eed, Stream::Verify, n as u64);
    let mut x = DVector::<T>::from_fn(n, |_, _| T::lit(rng.random::<f64>() + 0.5));
    x /= x.norm();
    let mut lambda = T::zero();
    for _ in 0..max_iter {
        let y = a * &x;
        let next = x.dot(&y);
        let norm = y.norm();
        if norm == T::zero() {
            return Ok(T::zero());
        }
        x = y / norm;
        if (next - lambda).abs() <= rel_tol * next.abs() {
            return Ok(next);
        }
        lambda = next;
    }
    Ok(lambda)
}
