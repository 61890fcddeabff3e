//! One-shot comparison methods: distributed PCA with deflation-based
//! personalization, individual per-client PCA, and centralized pooled PCA.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, PerPcaError, Result};
use crate::linalg::sym_eigen_desc;
use crate::model::{ComponentState, CovarianceMatrix};
use crate::stiefel::OrthonormalFrame;
use crate::{Real, Tolerances};

/// Leading eigenpairs of a symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis<T: Real> {
    pub vectors: OrthonormalFrame<T>,
    /// Descending.
    pub values: DVector<T>,
}

/// Flips each column so its largest-magnitude entry is positive
/// (lowest index wins ties).
pub(crate) fn canonical_signs<T: Real>(m: &mut DMatrix<T>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < T::zero() {
            col.neg_mut();
        }
    }
}

/// Top-`k` eigenpairs of the symmetric matrix `s`, descending, with
/// deterministic column signs.
pub fn top_eigvecs<T: Real>(s: &DMatrix<T>, k: usize) -> Result<EigenBasis<T>> {
    ensure!(s.is_square(), Dimension, "eigenbasis of a {}x{} matrix", s.nrows(), s.ncols());
    ensure!(k >= 1 && k <= s.nrows(), Input, "requested {k} eigenvectors of a {0}x{0} matrix", s.nrows());
    let (values, vectors) = sym_eigen_desc(s)?;
    let mut top = vectors.columns(0, k).clone_owned();
    canonical_signs(&mut top);
    Ok(EigenBasis {
        vectors: OrthonormalFrame::new(top, Tolerances::<T>::default().orth_tol * T::lit(100.0))?,
        values: values.rows(0, k).clone_owned(),
    })
}

/// How client frames are combined at the server in [`distpca`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stacking {
    /// Columns are the clients' orthonormal eigenvectors as-is.
    Unweighted,
    /// Each eigenvector is scaled by the square root of its eigenvalue, so
    /// the stacked Gram matrix is the average of rank-truncated covariances.
    #[default]
    Scaled,
}

impl std::str::FromStr for Stacking {
    type Err = PerPcaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unweighted" => Ok(Stacking::Unweighted),
            "scaled" => Ok(Stacking::Scaled),
            other => Err(PerPcaError::Input(format!("unknown stacking `{other}`"))),
        }
    }
}

fn check_ranks<T: Real>(covs: &[CovarianceMatrix<T>], r1: usize, r2: &[usize]) -> Result<usize> {
    ensure!(!covs.is_empty(), Input, "no client covariances");
    ensure!(r2.len() == covs.len(), Input, "{} local ranks for {} clients", r2.len(), covs.len());
    let d = covs[0].dim();
    for (i, s) in covs.iter().enumerate() {
        ensure!(s.dim() == d, Dimension, "client {i} has dimension {}, client 0 has {d}", s.dim());
        ensure!(r1 >= 1 && r2[i] >= 1, Input, "ranks must be positive (r1={r1}, r2[{i}]={})", r2[i]);
        ensure!(r1 + r2[i] <= d, Input, "r1 + r2[{i}] = {} exceeds d = {d}", r1 + r2[i]);
    }
    Ok(d)
}

/// Global frame from the server-side PCA of the stacked client eigenvectors.
pub fn distpca_global<T: Real>(
    covs: &[CovarianceMatrix<T>],
    r1: usize,
    r2: &[usize],
    stacking: Stacking,
) -> Result<OrthonormalFrame<T>> {
    let d = check_ranks(covs, r1, r2)?;
    // Gram matrix of the stacked d × Σ(r1 + r2_i) matrix, accumulated in client order.
    let mut gram = DMatrix::<T>::zeros(d, d);
    for (s, &r2_i) in covs.iter().zip(r2) {
        let basis = top_eigvecs(s.matrix(), r1 + r2_i)?;
        let mut cols = basis.vectors.into_matrix();
        if stacking == Stacking::Scaled {
            for (mut col, &lambda) in cols.column_iter_mut().zip(basis.values.iter()) {
                col *= lambda.max(T::zero()).sqrt();
            }
        }
        gram += &cols * cols.transpose();
    }
    let top = top_eigvecs(&gram, r1)?;
    let floor = T::eps() * T::lit(1e3) * gram.amax().max(T::min_value().unwrap());
    ensure!(
        top.values[r1 - 1] > floor,
        Singular,
        "stacked client frames have rank below r1 = {r1}"
    );
    Ok(top.vectors)
}

/// Orthonormal basis of `col(U)^⊥`.
pub(crate) fn complement<T: Real>(u: &OrthonormalFrame<T>) -> Result<DMatrix<T>> {
    let d = u.dim();
    let deflator = DMatrix::<T>::identity(d, d) - u.projector();
    let (_, vecs) = sym_eigen_desc(&deflator)?;
    let basis = vecs.columns(0, d - u.rank()).clone_owned();
    // Re-project to remove O(eps) leakage into col(U).
    let cleaned = &basis - u.matrix() * u.matrix().tr_mul(&basis);
    Ok(OrthonormalFrame::orthonormalize(&cleaned)?.into_matrix())
}

/// Top-`r2` eigenvectors of `(I − P_U) S (I − P_U)`, restricted to `col(U)^⊥`.
pub fn deflated_local<T: Real>(
    s: &CovarianceMatrix<T>,
    u: &OrthonormalFrame<T>,
    r2: usize,
) -> Result<OrthonormalFrame<T>> {
    ensure!(s.dim() == u.dim(), Dimension, "covariance dimension {} vs frame {}", s.dim(), u.dim());
    ensure!(u.rank() + r2 <= u.dim(), Input, "r1 + r2 = {} exceeds d = {}", u.rank() + r2, u.dim());
    let comp = complement(u)?;
    let compressed = comp.tr_mul(&(s.matrix() * &comp));
    let inner = top_eigvecs(&compressed, r2)?;
    let mut v = comp * inner.vectors.matrix();
    canonical_signs(&mut v);
    OrthonormalFrame::new(v, Tolerances::<T>::default().orth_tol * T::lit(100.0))
}

/// Distributed PCA personalized by local deflation.
///
/// Each client sends its top `r1 + r2_i` eigenvectors; the server keeps the
/// top `r1` principal directions of the stacked matrix as `U`; each client
/// takes the top `r2_i` eigenvectors of its covariance deflated by `U`.
pub fn distpca<T: Real>(
    covs: &[CovarianceMatrix<T>],
    r1: usize,
    r2: &[usize],
    stacking: Stacking,
) -> Result<ComponentState<T>> {
    let u = distpca_global(covs, r1, r2, stacking)?;
    let local = covs
        .iter()
        .zip(r2)
        .map(|(s, &r2_i)| deflated_local(s, &u, r2_i))
        .collect::<Result<Vec<_>>>()?;
    ComponentState::new(u, local, Tolerances::default().cross_tol)
}

/// Each client's own top-`r_total` eigenvectors; nothing is shared.
pub fn indiv_pca<T: Real>(covs: &[CovarianceMatrix<T>], r_total: usize) -> Result<Vec<OrthonormalFrame<T>>> {
    covs.iter()
        .map(|s| Ok(top_eigvecs(s.matrix(), r_total)?.vectors))
        .collect()
}

/// Observation-weighted pooled covariance `Σ n_i S_i / Σ n_i`.
pub fn pooled_covariance<T: Real>(covs: &[CovarianceMatrix<T>]) -> Result<CovarianceMatrix<T>> {
    ensure!(!covs.is_empty(), Input, "no client covariances");
    let d = covs[0].dim();
    let mut pooled = DMatrix::<T>::zeros(d, d);
    let mut total = 0usize;
    for (i, s) in covs.iter().enumerate() {
        ensure!(s.dim() == d, Dimension, "client {i} has dimension {}, client 0 has {d}", s.dim());
        pooled += s.matrix() * T::from_usize_lossy(s.count());
        total += s.count();
    }
    CovarianceMatrix::from_matrix(pooled / T::from_usize_lossy(total), total)
}

/// Top-`r_total` eigenvectors of the pooled covariance.
pub fn central_pca<T: Real>(covs: &[CovarianceMatrix<T>], r_total: usize) -> Result<OrthonormalFrame<T>> {
    Ok(top_eigvecs(pooled_covariance(covs)?.matrix(), r_total)?.vectors)
}
