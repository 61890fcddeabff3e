//! Stiefel manifold primitives.
//!
//! Points of `St(d, r)` are `d × r` matrices with orthonormal columns. The
//! tangent space at `U` is `{ξ : ξᵀU + Uᵀξ = 0}` and its orthogonal
//! complement, the normal space, is `{U·S : S symmetric}`. A generalized
//! retraction maps *any* `U + ξ` of full column rank back onto the manifold
//! while keeping its column space.

use nalgebra::{DMatrix, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, PerPcaError, Result};
use crate::linalg::frob_norm_sq;
use crate::{Real, Tolerances};

/// A `d × r` matrix with orthonormal columns, `1 ≤ r ≤ d`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalFrame<T: Real> {
    data: DMatrix<T>,
}

impl<T: Real> OrthonormalFrame<T> {
    /// Validates `dataᵀ·data = I` entrywise within `orth_tol`.
    pub fn new(data: DMatrix<T>, orth_tol: T) -> Result<Self> {
        ensure!(
            data.ncols() >= 1 && data.ncols() <= data.nrows(),
            Dimension,
            "frame of shape {}x{} needs 1 <= r <= d",
            data.nrows(),
            data.ncols()
        );
        let frame = OrthonormalFrame { data };
        let defect = frame.orthogonality_defect();
        ensure!(
            defect <= orth_tol,
            Contract,
            "columns are not orthonormal (max |XᵀX - I| = {defect:e})"
        );
        Ok(frame)
    }

    /// [`OrthonormalFrame::new`] with the default `orth_tol`.
    pub fn from_matrix(data: DMatrix<T>) -> Result<Self> {
        Self::new(data, Tolerances::default().orth_tol)
    }

    pub(crate) fn from_matrix_unchecked(data: DMatrix<T>) -> Self {
        debug_assert!(data.ncols() >= 1 && data.ncols() <= data.nrows());
        debug_assert!(
            OrthonormalFrame { data: data.clone() }.orthogonality_defect()
                <= Tolerances::<T>::default().orth_tol * T::lit(100.0)
        );
        OrthonormalFrame { data }
    }

    /// Orthonormal basis of `col(m)` by QR with a nonnegative `R` diagonal.
    pub fn orthonormalize(m: &DMatrix<T>) -> Result<Self> {
        Ok(qr_factor(m, Tolerances::default().rank_tol)?.0)
    }

    /// The first `r` columns of the `d × d` identity.
    pub fn canonical(d: usize, r: usize) -> Result<Self> {
        ensure!(r >= 1 && r <= d, Dimension, "canonical frame needs 1 <= r <= d (got d={d}, r={r})");
        Ok(OrthonormalFrame { data: DMatrix::identity(d, r) })
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn rank(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.data
    }

    /// `max |XᵀX − I|` over all entries.
    pub fn orthogonality_defect(&self) -> T {
        let gram = self.data.tr_mul(&self.data);
        let r = gram.nrows();
        let mut worst = T::zero();
        for j in 0..r {
            for i in 0..r {
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// `P = UUᵀ`.
    pub fn projector(&self) -> DMatrix<T> {
        &self.data * self.data.transpose()
    }

    /// `U·Q` for an `r × r` orthogonal `Q`; spans the same subspace.
    pub fn rotated(&self, q: &DMatrix<T>) -> Result<Self> {
        ensure!(
            q.nrows() == self.rank() && q.ncols() == self.rank(),
            Dimension,
            "rotation is {}x{}, frame rank is {}",
            q.nrows(),
            q.ncols(),
            self.rank()
        );
        Self::new(&self.data * q, Tolerances::<T>::default().orth_tol * T::lit(10.0))
    }

    /// Columns `[U, V]` side by side.
    pub fn concat(&self, other: &OrthonormalFrame<T>) -> Result<DMatrix<T>> {
        ensure!(
            self.dim() == other.dim(),
            Dimension,
            "cannot concatenate frames in dimensions {} and {}",
            self.dim(),
            other.dim()
        );
        let mut out = DMatrix::zeros(self.dim(), self.rank() + other.rank());
        out.columns_mut(0, self.rank()).copy_from(&self.data);
        out.columns_mut(self.rank(), other.rank()).copy_from(&other.data);
        Ok(out)
    }
}

fn check_shape<T: Real>(u: &OrthonormalFrame<T>, xi: &DMatrix<T>) -> Result<()> {
    ensure!(
        xi.shape() == u.matrix().shape(),
        Dimension,
        "direction is {}x{}, frame is {}x{}",
        xi.nrows(),
        xi.ncols(),
        u.dim(),
        u.rank()
    );
    Ok(())
}

/// `P_N(ξ) = ½·U(Uᵀξ + ξᵀU)`.
pub fn project_normal<T: Real>(u: &OrthonormalFrame<T>, xi: &DMatrix<T>) -> Result<DMatrix<T>> {
    check_shape(u, xi)?;
    let utxi = u.matrix().tr_mul(xi);
    let sym = (&utxi + utxi.transpose()) * T::lit(0.5);
    Ok(u.matrix() * sym)
}

/// `P_T(ξ) = ξ − P_N(ξ)`.
pub fn project_tangent<T: Real>(u: &OrthonormalFrame<T>, xi: &DMatrix<T>) -> Result<DMatrix<T>> {
    Ok(xi - project_normal(u, xi)?)
}

/// The retraction used at every retraction site of the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Retraction {
    #[default]
    Polar,
    Qr,
}

impl Retraction {
    pub fn retract<T: Real>(self, u: &OrthonormalFrame<T>, xi: &DMatrix<T>, rank_tol: T) -> Result<OrthonormalFrame<T>> {
        match self {
            Retraction::Polar => polar_retract_with_tol(u, xi, rank_tol),
            Retraction::Qr => qr_retract_with_tol(u, xi, rank_tol),
        }
    }
}

impl std::str::FromStr for Retraction {
    type Err = PerPcaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "polar" => Ok(Retraction::Polar),
            "qr" => Ok(Retraction::Qr),
            other => Err(PerPcaError::Input(format!("unknown retraction `{other}`"))),
        }
    }
}

/// Orthogonal polar factor `W = L·Rᵀ` of `m = L·Σ·Rᵀ`: Newton–Schulz when
/// `m` is nearly orthonormal, thin SVD otherwise.
///
/// `W` is the Frobenius-nearest orthonormal frame to `m` and equals
/// `m (mᵀm)^{-1/2}`.
pub fn polar_factor<T: Real>(m: &DMatrix<T>, rank_tol: T) -> Result<DMatrix<T>> {
    ensure!(
        m.ncols() >= 1 && m.ncols() <= m.nrows(),
        Dimension,
        "polar factor of a {}x{} matrix",
        m.nrows(),
        m.ncols()
    );
    if let Some(w) = newton_schulz_polar(m, rank_tol) {
        return Ok(w);
    }
    let svd = SVD::new(m.clone(), true, true);
    let smallest = svd.singular_values.iter().copied().fold(T::max_value().unwrap(), |a, b| a.min(b));
    if !(smallest >= rank_tol) {
        return Err(PerPcaError::Singular(format!(
            "smallest singular value {smallest:e} below rank tolerance {rank_tol:e}"
        )));
    }
    let left = svd.u.expect("left singular vectors requested");
    let right_t = svd.v_t.expect("right singular vectors requested");
    Ok(left * right_t)
}

/// Newton–Schulz iteration `X ← X(3I − XᵀX)/2` for nearly orthonormal `m`.
///
/// Maps every singular value σ to σ(3 − σ²)/2 while keeping the singular
/// vectors, so it converges quadratically to the polar factor once
/// `‖mᵀm − I‖ < 1`. Retraction inputs sit this close after a small step and
/// the iteration is several times cheaper than an SVD. Returns `None` when
/// the input is too far from orthonormal (callers fall back to the SVD).
fn newton_schulz_polar<T: Real>(m: &DMatrix<T>, rank_tol: T) -> Option<DMatrix<T>> {
    let r = m.ncols();
    let half = T::lit(0.5);
    // ‖XᵀX − I‖_2 ≤ ½ keeps σ_min ≥ 1/√2
    if rank_tol > T::lit(0.7) {
        return None;
    }
    let defect = |g: &DMatrix<T>| {
        let mut acc = T::zero();
        for j in 0..r {
            for i in 0..r {
                let e = if i == j { g[(i, j)] - T::one() } else { g[(i, j)] };
                acc += e * e;
            }
        }
        acc.sqrt()
    };
    let floor = T::eps() * T::lit(4.0) * T::from_usize_lossy(r);
    let mut x = m.clone();
    let mut g = x.tr_mul(&x);
    let mut prev = defect(&g);
    if !(prev <= half) {
        return None;
    }
    for _ in 0..60 {
        if prev <= floor {
            return Some(x);
        }
        let mut c = -g;
        for k in 0..r {
            c[(k, k)] += T::lit(3.0);
        }
        x = (&x * c) * half;
        g = x.tr_mul(&x);
        let next = defect(&g);
        // rounding floor reached
        if !(next < prev) {
            return Some(x);
        }
        prev = next;
    }
    None
}

/// Thin QR of `m` with the sign of each column chosen so `diag(R) ≥ 0`.
pub(crate) fn qr_factor<T: Real>(m: &DMatrix<T>, rank_tol: T) -> Result<(OrthonormalFrame<T>, DMatrix<T>)> {
    ensure!(
        m.ncols() >= 1 && m.ncols() <= m.nrows(),
        Dimension,
        "QR of a {}x{} matrix",
        m.nrows(),
        m.ncols()
    );
    let qr = m.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for k in 0..m.ncols() {
        let diag = r[(k, k)];
        // |R_kk| is an upper bound on the smallest singular value only up to
        // conditioning, so this catches exact and near-exact collapse.
        if !(diag.abs() >= rank_tol) {
            return Err(PerPcaError::Singular(format!(
                "QR diagonal entry {k} is {diag:e}, below rank tolerance {rank_tol:e}"
            )));
        }
        if diag < T::zero() {
            q.column_mut(k).neg_mut();
            r.row_mut(k).neg_mut();
        }
    }
    Ok((OrthonormalFrame { data: q }, r))
}

/// Polar retraction `(U+ξ)(I + ξᵀU + Uᵀξ + ξᵀξ)^{-1/2}`, computed by SVD.
pub fn polar_retract<T: Real>(u: &OrthonormalFrame<T>, xi: &DMatrix<T>) -> Result<OrthonormalFrame<T>> {
    polar_retract_with_tol(u, xi, Tolerances::default().rank_tol)
}

pub fn polar_retract_with_tol<T: Real>(
    u: &OrthonormalFrame<T>,
    xi: &DMatrix<T>,
    rank_tol: T,
) -> Result<OrthonormalFrame<T>> {
    check_shape(u, xi)?;
    if xi.iter().all(|x| *x == T::zero()) {
        return Ok(u.clone());
    }
    Ok(OrthonormalFrame { data: polar_factor(&(u.matrix() + xi), rank_tol)? })
}

/// QR retraction: the `Q` factor of `U + ξ`, with nonnegative `diag(R)`.
pub fn qr_retract<T: Real>(u: &OrthonormalFrame<T>, xi: &DMatrix<T>) -> Result<OrthonormalFrame<T>> {
    qr_retract_with_tol(u, xi, Tolerances::default().rank_tol)
}

pub fn qr_retract_with_tol<T: Real>(
    u: &OrthonormalFrame<T>,
    xi: &DMatrix<T>,
    rank_tol: T,
) -> Result<OrthonormalFrame<T>> {
    check_shape(u, xi)?;
    if xi.iter().all(|x| *x == T::zero()) {
        return Ok(u.clone());
    }
    Ok(qr_factor(&(u.matrix() + xi), rank_tol)?.0)
}

/// `P_U = UUᵀ`.
pub fn projector<T: Real>(u: &OrthonormalFrame<T>) -> DMatrix<T> {
    u.projector()
}

/// `‖P_A − P_B‖_F²`; ranks may differ, ambient dimensions may not.
pub fn subspace_distance<T: Real>(a: &OrthonormalFrame<T>, b: &OrthonormalFrame<T>) -> Result<T> {
    ensure!(
        a.dim() == b.dim(),
        Dimension,
        "subspace distance between dimensions {} and {}",
        a.dim(),
        b.dim()
    );
    // ‖P_A − P_B‖² = r_A + r_B − 2‖AᵀB‖² = ‖(I − P_B)A‖² + ‖(I − P_A)B‖².
    // The residual form avoids cancellation when the subspaces nearly agree.
    let (a, b) = (a.matrix(), b.matrix());
    let ra = a - b * b.tr_mul(a);
    let rb = b - a * a.tr_mul(b);
    Ok(frob_norm_sq(&ra) + frob_norm_sq(&rb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frob_inner;
    use crate::rng::{gaussian_matrix, substream, Stream};
    use nalgebra::dmatrix;

    fn random_frame(seed: u64, d: usize, r: usize) -> OrthonormalFrame<f64> {
        OrthonormalFrame::orthonormalize(&gaussian_matrix(&mut substream(seed, Stream::Verify, 0), d, r)).unwrap()
    }

    fn random_direction(seed: u64, d: usize, r: usize) -> DMatrix<f64> {
        gaussian_matrix(&mut substream(seed, Stream::Verify, 1), d, r)
    }

    /// Independent Gram-Schmidt orthonormalization, used as an oracle.
    fn gram_schmidt(m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut q = m.clone();
        for j in 0..q.ncols() {
            for k in 0..j {
                let proj = q.column(k).dot(&q.column(j));
                let qk = q.column(k).clone_owned();
                q.column_mut(j).axpy(-proj, &qk, 1.0);
            }
            let norm = q.column(j).norm();
            q.column_mut(j).unscale_mut(norm);
        }
        q
    }

    #[test]
    fn frame_rejects_bad_shapes_and_non_orthonormal() {
        assert!(matches!(
            OrthonormalFrame::from_matrix(DMatrix::<f64>::zeros(2, 3)),
            Err(PerPcaError::Dimension(_))
        ));
        assert!(matches!(
            OrthonormalFrame::from_matrix(dmatrix![1.0, 1.0; 0.0, 1.0]),
            Err(PerPcaError::Contract(_))
        ));
    }

    #[test]
    fn tangent_of_zero_is_zero() {
        let u = random_frame(1, 5, 2);
        let z = DMatrix::zeros(5, 2);
        assert_eq!(project_tangent(&u, &z).unwrap(), z);
    }

    #[test]
    fn tangent_keeps_already_tangent_direction() {
        let u = OrthonormalFrame::from_matrix(dmatrix![1.0; 0.0]).unwrap();
        let xi = dmatrix![0.0; 1.0];
        assert_eq!(project_tangent(&u, &xi).unwrap(), xi);
    }

    #[test]
    fn tangent_and_normal_split_orthogonally() {
        let u = random_frame(2, 5, 2);
        let xi = random_direction(2, 5, 2);
        // Both computed straight from their formulas.
        let utxi = u.matrix().transpose() * &xi;
        let normal = u.matrix() * (&utxi + utxi.transpose()) * 0.5;
        let tangent = &xi - u.matrix() * (&utxi + utxi.transpose()) * 0.5;
        assert!((project_tangent(&u, &xi).unwrap() - &tangent).amax() < 1e-14);
        assert!((project_normal(&u, &xi).unwrap() - &normal).amax() < 1e-14);
        assert!((&tangent + &normal - &xi).amax() < 1e-14);
        assert!(frob_inner(&tangent, &normal).abs() < 1e-12);
        let skew = tangent.transpose() * u.matrix() + u.matrix().transpose() * &tangent;
        assert!(skew.amax() < 1e-10);
    }

    #[test]
    fn normal_of_frame_is_frame() {
        let u = random_frame(3, 6, 3);
        let n = project_normal(&u, u.matrix()).unwrap();
        assert!((n - u.matrix()).amax() < 1e-14);
    }

    #[test]
    fn normal_of_tangent_vanishes_and_pythagoras_holds() {
        let u = random_frame(4, 6, 3);
        let xi = random_direction(4, 6, 3);
        let t = project_tangent(&u, &xi).unwrap();
        assert!(project_normal(&u, &t).unwrap().amax() < 1e-12);
        let n = project_normal(&u, &xi).unwrap();
        let lhs = frob_norm_sq(&n) + frob_norm_sq(&t);
        assert!((lhs - frob_norm_sq(&xi)).abs() < 1e-10 * frob_norm_sq(&xi));
    }

    #[test]
    fn tangent_projection_is_idempotent() {
        let u = random_frame(5, 7, 3);
        let xi = random_direction(5, 7, 3);
        let once = project_tangent(&u, &xi).unwrap();
        let twice = project_tangent(&u, &once).unwrap();
        assert!((once - twice).amax() < 1e-12);
    }

    #[test]
    fn retractions_of_zero_return_input() {
        let u = random_frame(6, 5, 2);
        let z = DMatrix::zeros(5, 2);
        assert_eq!(polar_retract(&u, &z).unwrap(), u);
        assert_eq!(qr_retract(&u, &z).unwrap(), u);
        // Through the factorization path, too: a negligible nonzero ξ.
        let tiny = DMatrix::from_element(5, 2, 1e-300);
        assert!((qr_retract(&u, &tiny).unwrap().matrix() - u.matrix()).amax() < 1e-14);
        assert!((polar_retract(&u, &tiny).unwrap().matrix() - u.matrix()).amax() < 1e-14);
    }

    #[test]
    fn polar_closed_form_in_the_plane() {
        let u = OrthonormalFrame::from_matrix(dmatrix![1.0; 0.0]).unwrap();
        for t in [0.1f64, 0.5, 2.0] {
            let w = polar_retract(&u, &dmatrix![0.0; t]).unwrap();
            let s = (1.0 + t * t).sqrt();
            assert!((w.matrix() - dmatrix![1.0 / s; t / s]).amax() < 1e-15);
        }
    }

    #[test]
    fn qr_of_orthogonal_directions_normalizes_columns() {
        let u = OrthonormalFrame::from_matrix(dmatrix![1.0, 0.0; 0.0, 1.0; 0.0, 0.0]).unwrap();
        let xi = dmatrix![1.0, 0.0; 0.0, 2.0; 0.0, 0.0];
        let q = qr_retract(&u, &xi).unwrap();
        assert!((q.matrix() - u.matrix()).amax() < 1e-15);
        let (_, r) = qr_factor(&(u.matrix() + &xi), 1e-12).unwrap();
        assert!((r - dmatrix![2.0, 0.0; 0.0, 3.0]).amax() < 1e-15);
    }

    #[test]
    fn retractions_preserve_column_space() {
        for seed in 0..20 {
            let u = random_frame(seed, 6, 3);
            let xi = random_direction(seed, 6, 3) * 0.3;
            let oracle = OrthonormalFrame::new(gram_schmidt(&(u.matrix() + &xi)), 1e-10).unwrap();
            for kind in [Retraction::Polar, Retraction::Qr] {
                let w = kind.retract(&u, &xi, 1e-12).unwrap();
                assert!(w.orthogonality_defect() < 1e-12);
                assert!((w.projector() - oracle.projector()).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn qr_reconstructs_input_with_upper_triangular_r() {
        let u = random_frame(9, 6, 3);
        let xi = random_direction(9, 6, 3) * 0.2;
        let m = u.matrix() + &xi;
        let (q, r) = qr_factor(&m, 1e-12).unwrap();
        assert!((q.matrix() * &r - &m).amax() < 1e-13);
        for j in 0..3 {
            assert!(r[(j, j)] >= 0.0);
            for i in j + 1..3 {
                assert_eq!(r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn polar_is_nearest_frame() {
        for seed in 0..20 {
            let u = random_frame(seed + 100, 6, 3);
            let xi = random_direction(seed + 100, 6, 3) * 0.4;
            let m = u.matrix() + &xi;
            let polar = polar_retract(&u, &xi).unwrap();
            let best = (&m - polar.matrix()).norm();
            let qr = qr_retract(&u, &xi).unwrap();
            assert!(best <= (&m - qr.matrix()).norm() + 1e-10);
            for k in 0..10 {
                let rot = OrthonormalFrame::orthonormalize(&gaussian_matrix(&mut substream(seed, Stream::Verify, 50 + k), 3, 3))
                    .unwrap();
                let other = polar.rotated(rot.matrix()).unwrap();
                assert!(best <= (&m - other.matrix()).norm() + 1e-10);
            }
        }
    }

    #[test]
    fn tangent_residual_is_second_order() {
        let u = random_frame(11, 6, 2);
        let dir = project_tangent(&u, &random_direction(11, 6, 2)).unwrap();
        let dir = &dir / dir.norm();
        for kind in [Retraction::Polar, Retraction::Qr] {
            let resid = |scale: f64| {
                let xi = &dir * scale;
                (kind.retract(&u, &xi, 1e-12).unwrap().matrix() - (u.matrix() + &xi)).norm()
            };
            let ratio = resid(1e-2) / resid(5e-3);
            assert!((ratio - 4.0).abs() < 0.1, "{kind:?}: halving ξ scaled residual by 1/{ratio}");
        }
    }

    #[test]
    fn rank_deficient_input_is_singular() {
        let u = OrthonormalFrame::from_matrix(dmatrix![1.0, 0.0; 0.0, 1.0; 0.0, 0.0]).unwrap();
        let xi = dmatrix![0.0, 1.0; 0.0, -1.0; 0.0, 0.0];
        assert!(matches!(polar_retract(&u, &xi), Err(PerPcaError::Singular(_))));
        assert!(matches!(qr_retract(&u, &xi), Err(PerPcaError::Singular(_))));
        assert!(matches!(project_tangent(&u, &DMatrix::zeros(3, 1)), Err(PerPcaError::Dimension(_))));
    }

    #[test]
    fn projector_examples() {
        let p = OrthonormalFrame::<f64>::canonical(4, 2).unwrap().projector();
        assert_eq!(p, DMatrix::from_diagonal(&nalgebra::dvector![1.0, 1.0, 0.0, 0.0]));
        let s = 0.5f64.sqrt();
        let p = OrthonormalFrame::from_matrix(dmatrix![s; s]).unwrap().projector();
        assert!((p - dmatrix![0.5, 0.5; 0.5, 0.5]).amax() < 1e-15);
        let u = random_frame(12, 7, 3);
        let p = projector(&u);
        assert!((&p * &p - &p).amax() < 1e-10);
        assert!((&p - p.transpose()).amax() < 1e-10);
        assert!((p.trace() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn subspace_distance_examples() {
        let a = random_frame(13, 6, 2);
        assert!(subspace_distance(&a, &a).unwrap() < 1e-14);
        let e1 = OrthonormalFrame::from_matrix(dmatrix![1.0f64; 0.0]).unwrap();
        let e2 = OrthonormalFrame::from_matrix(dmatrix![0.0; 1.0]).unwrap();
        assert!((subspace_distance(&e1, &e2).unwrap() - 2.0).abs() < 1e-15);
        let b = random_frame(14, 6, 2);
        let direct = (a.projector() - b.projector()).norm_squared();
        let identity = 4.0 - 2.0 * (a.projector() * b.projector()).trace();
        let ours = subspace_distance(&a, &b).unwrap();
        assert!((direct - ours).abs() < 1e-12 && (identity - ours).abs() < 1e-12);
        let c = random_frame(15, 6, 4);
        let direct = (a.projector() - c.projector()).norm_squared();
        assert!((direct - subspace_distance(&a, &c).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn f32_retraction_works() {
        let u = OrthonormalFrame::<f32>::canonical(4, 2).unwrap();
        let xi = DMatrix::<f32>::from_fn(4, 2, |i, j| 0.05 * (i as f32 - j as f32));
        let w = polar_retract(&u, &xi).unwrap();
        assert!(w.orthogonality_defect() < 1e-5);
    }
}
