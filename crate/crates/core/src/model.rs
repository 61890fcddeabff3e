//! Client datasets, covariance statistics, the PerPCA objective and its
//! stationarity diagnostics.

use nalgebra::DMatrix;

use crate::error::{ensure, Result};
use crate::linalg::{frob_norm_sq, symmetrize};
use crate::stiefel::OrthonormalFrame;
use crate::{Real, Tolerances};

/// Observations of one client, stored `d × n` (one observation per column).
#[derive(Debug, Clone, PartialEq)]
pub struct ClientDataset<T: Real> {
    pub client_id: usize,
    data: DMatrix<T>,
}

impl<T: Real> ClientDataset<T> {
    pub fn new(client_id: usize, data: DMatrix<T>) -> Result<Self> {
        ensure!(data.nrows() >= 1, Input, "client {client_id}: dataset has zero features");
        ensure!(data.ncols() >= 1, Input, "client {client_id}: dataset has no observations");
        Ok(ClientDataset { client_id, data })
    }

    /// Builds from an `n × d` matrix with one observation per row.
    pub fn from_rows(client_id: usize, rows: &DMatrix<T>) -> Result<Self> {
        Self::new(client_id, rows.transpose())
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.data
    }

    /// Subtracts the per-feature mean across this client's observations.
    pub fn centered(&self) -> Self {
        let mut data = self.data.clone();
        let n = T::from_usize_lossy(data.ncols());
        for mut row in data.row_iter_mut() {
            let mean = row.sum() / n;
            row.add_scalar_mut(-mean);
        }
        ClientDataset { client_id: self.client_id, data }
    }

    /// Splits columns into `(first, rest)` with `first` holding `n_first` observations.
    pub fn split_at(&self, n_first: usize) -> Result<(Self, Self)> {
        ensure!(
            n_first >= 1 && n_first < self.len(),
            Input,
            "client {}: cannot split {} observations at {n_first}",
            self.client_id,
            self.len()
        );
        let first = self.data.columns(0, n_first).clone_owned();
        let rest = self.data.columns(n_first, self.len() - n_first).clone_owned();
        Ok((
            ClientDataset { client_id: self.client_id, data: first },
            ClientDataset { client_id: self.client_id, data: rest },
        ))
    }
}

/// `S = (1/n)·Y·Yᵀ`, the per-client sufficient statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix<T: Real> {
    s: DMatrix<T>,
    n: usize,
}

impl<T: Real> CovarianceMatrix<T> {
    /// Wraps a precomputed covariance; checks squareness and symmetry.
    pub fn from_matrix(s: DMatrix<T>, n: usize) -> Result<Self> {
        ensure!(s.is_square(), Dimension, "covariance must be square, got {}x{}", s.nrows(), s.ncols());
        ensure!(n >= 1, Input, "covariance built from zero observations");
        let scale = s.amax().max(T::one());
        ensure!(
            (&s - s.transpose()).amax() <= T::lit(1e-12).max(T::eps() * T::lit(10.0)) * scale,
            Contract,
            "covariance is not symmetric"
        );
        Ok(CovarianceMatrix { s: symmetrize(&s), n })
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.s
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.s.nrows()
    }
}

pub fn covariance<T: Real>(y: &ClientDataset<T>) -> Result<CovarianceMatrix<T>> {
    ensure!(!y.is_empty(), Input, "client {}: empty dataset", y.client_id);
    let n = T::from_usize_lossy(y.len());
    let s = (y.matrix() * y.matrix().transpose()) / n;
    Ok(CovarianceMatrix { s: symmetrize(&s), n: y.len() })
}

/// Global frame `U` plus one local frame `V_(i)` per client, with `UᵀV_(i) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentState<T: Real> {
    pub global: OrthonormalFrame<T>,
    pub local: Vec<OrthonormalFrame<T>>,
}

impl<T: Real> ComponentState<T> {
    /// Validates dimensions and cross-orthogonality against `cross_tol`.
    pub fn new(global: OrthonormalFrame<T>, local: Vec<OrthonormalFrame<T>>, cross_tol: T) -> Result<Self> {
        let state = ComponentState { global, local };
        state.validate(cross_tol)?;
        Ok(state)
    }

    pub fn validate(&self, cross_tol: T) -> Result<()> {
        for (i, v) in self.local.iter().enumerate() {
            ensure!(
                v.dim() == self.global.dim(),
                Dimension,
                "local frame {i} lives in dimension {}, global in {}",
                v.dim(),
                self.global.dim()
            );
            ensure!(
                self.global.rank() + v.rank() <= self.global.dim(),
                Dimension,
                "r1 + r2 = {} exceeds d = {} for client {i}",
                self.global.rank() + v.rank(),
                self.global.dim()
            );
            let cross = self.cross_norm(i);
            ensure!(cross <= cross_tol, Contract, "‖UᵀV_({i})‖_F = {cross:e} exceeds {cross_tol:e}");
        }
        Ok(())
    }

    /// `‖UᵀV_(i)‖_F`.
    pub fn cross_norm(&self, client: usize) -> T {
        self.global.matrix().tr_mul(self.local[client].matrix()).norm()
    }

    pub fn max_cross_norm(&self) -> T {
        (0..self.local.len()).fold(T::zero(), |acc, i| acc.max(self.cross_norm(i)))
    }

    pub fn dim(&self) -> usize {
        self.global.dim()
    }

    pub fn num_clients(&self) -> usize {
        self.local.len()
    }
}

/// Ground-truth subspaces `(U*, {V*_(i)})` for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth<T: Real> {
    pub global: OrthonormalFrame<T>,
    pub local: Vec<OrthonormalFrame<T>>,
}

fn check_covs<T: Real>(state: &ComponentState<T>, covs: &[CovarianceMatrix<T>]) -> Result<()> {
    ensure!(
        covs.len() == state.num_clients(),
        Dimension,
        "{} covariances for {} local frames",
        covs.len(),
        state.num_clients()
    );
    for (i, s) in covs.iter().enumerate() {
        ensure!(
            s.dim() == state.dim(),
            Dimension,
            "covariance {i} is {}x{}, state dimension is {}",
            s.dim(),
            s.dim(),
            state.dim()
        );
    }
    Ok(())
}

/// `tr(XᵀSX)`.
fn quad_trace<T: Real>(x: &DMatrix<T>, s: &DMatrix<T>) -> T {
    let sx = s * x;
    x.iter().zip(sx.iter()).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
}

/// `f_i = ½tr(UᵀS_iU) + ½tr(V_iᵀS_iV_i)` for each client.
pub fn objective_terms<T: Real>(state: &ComponentState<T>, covs: &[CovarianceMatrix<T>]) -> Result<Vec<T>> {
    check_covs(state, covs)?;
    let half = T::lit(0.5);
    Ok(covs
        .iter()
        .zip(&state.local)
        .map(|(s, v)| half * (quad_trace(state.global.matrix(), s.matrix()) + quad_trace(v.matrix(), s.matrix())))
        .collect())
}

/// `f = Σ_i f_i`, summed in ascending client order.
pub fn objective_f<T: Real>(state: &ComponentState<T>, covs: &[CovarianceMatrix<T>]) -> Result<T> {
    Ok(objective_terms(state, covs)?.into_iter().fold(T::zero(), |a, b| a + b))
}

/// `(1/n)‖Y − (P_U + P_V)Y‖_F²`.
pub fn reconstruction_error<T: Real>(
    y: &ClientDataset<T>,
    u: &OrthonormalFrame<T>,
    v: &OrthonormalFrame<T>,
) -> Result<T> {
    reconstruction_error_with_tol(y, u, v, Tolerances::default().cross_tol)
}

pub fn reconstruction_error_with_tol<T: Real>(
    y: &ClientDataset<T>,
    u: &OrthonormalFrame<T>,
    v: &OrthonormalFrame<T>,
    cross_tol: T,
) -> Result<T> {
    ensure!(
        u.dim() == y.dim() && v.dim() == y.dim(),
        Dimension,
        "frames of dimension {}/{} for data of dimension {}",
        u.dim(),
        v.dim(),
        y.dim()
    );
    let cross = u.matrix().tr_mul(v.matrix()).norm();
    ensure!(cross <= cross_tol, Contract, "‖UᵀV‖_F = {cross:e} exceeds {cross_tol:e}");
    let residual = y.matrix() - u.matrix() * u.matrix().tr_mul(y.matrix()) - v.matrix() * v.matrix().tr_mul(y.matrix());
    Ok(frob_norm_sq(&residual) / T::from_usize_lossy(y.len()))
}

/// Reconstruction error evaluated from the covariance alone via
/// `tr(S) − tr(UᵀSU) − tr(VᵀSV)`.
pub fn reconstruction_error_from_cov<T: Real>(
    s: &CovarianceMatrix<T>,
    u: &OrthonormalFrame<T>,
    v: &OrthonormalFrame<T>,
) -> T {
    s.matrix().trace() - quad_trace(u.matrix(), s.matrix()) - quad_trace(v.matrix(), s.matrix())
}

/// Squared norms of the projected stationarity conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResidual<T> {
    /// `‖Σ_i (I − P_U − P_{V_i}) S_i U‖_F²`
    pub global: T,
    /// `Σ_i ‖(I − P_U − P_{V_i}) S_i V_i‖_F²`
    pub local: T,
}

impl<T: Real> KktResidual<T> {
    pub fn total(&self) -> T {
        self.global + self.local
    }
}

/// Applies `(I − P_U − P_V)` to `m` without forming d×d projectors.
fn deflate<T: Real>(u: &DMatrix<T>, v: &DMatrix<T>, m: &DMatrix<T>) -> DMatrix<T> {
    m - u * u.tr_mul(m) - v * v.tr_mul(m)
}

pub fn kkt_residual<T: Real>(state: &ComponentState<T>, covs: &[CovarianceMatrix<T>]) -> Result<KktResidual<T>> {
    check_covs(state, covs)?;
    let u = state.global.matrix();
    let mut global_sum = DMatrix::zeros(u.nrows(), u.ncols());
    let mut local = T::zero();
    for (s, v) in covs.iter().zip(&state.local) {
        let v = v.matrix();
        global_sum += deflate(u, v, &(s.matrix() * u));
        local += frob_norm_sq(&deflate(u, v, &(s.matrix() * v)));
    }
    Ok(KktResidual { global: frob_norm_sq(&global_sum), local })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, substream, Stream};
    use nalgebra::{dmatrix, DVector};

    fn random_state(seed: u64, d: usize, r1: usize, r2: usize, n_clients: usize) -> ComponentState<f64> {
        let mut rng = substream(seed, Stream::Verify, 0);
        let u = OrthonormalFrame::orthonormalize(&gaussian_matrix(&mut rng, d, r1)).unwrap();
        let local = (0..n_clients)
            .map(|_| {
                let mut m = gaussian_matrix::<f64, _>(&mut rng, d, r1 + r2);
                m.columns_mut(0, r1).copy_from(u.matrix());
                let q = OrthonormalFrame::orthonormalize(&m).unwrap();
                OrthonormalFrame::from_matrix(q.matrix().columns(r1, r2).clone_owned()).unwrap()
            })
            .collect();
        ComponentState::new(u, local, 1e-10).unwrap()
    }

    fn random_covs(seed: u64, d: usize, n: usize, count: usize) -> Vec<CovarianceMatrix<f64>> {
        (0..count)
            .map(|i| {
                let y = gaussian_matrix(&mut substream(seed, Stream::Scores, i as u64), d, n);
                covariance(&ClientDataset::new(i, y).unwrap()).unwrap()
            })
            .collect()
    }

    fn random_rotation(seed: u64, r: usize) -> DMatrix<f64> {
        OrthonormalFrame::orthonormalize(&gaussian_matrix(&mut substream(seed, Stream::Verify, 99), r, r))
            .unwrap()
            .into_matrix()
    }

    #[test]
    fn covariance_examples() {
        let s = covariance(&ClientDataset::new(0, dmatrix![1.0; 0.0]).unwrap()).unwrap();
        assert_eq!(s.matrix(), &dmatrix![1.0, 0.0; 0.0, 0.0]);
        let s = covariance(&ClientDataset::new(0, DMatrix::<f64>::identity(2, 2)).unwrap()).unwrap();
        assert_eq!(s.matrix(), &(DMatrix::identity(2, 2) * 0.5));
        let y = gaussian_matrix::<f64, _>(&mut substream(1, Stream::Scores, 0), 3, 5);
        let s = covariance(&ClientDataset::new(0, y.clone()).unwrap()).unwrap();
        assert!((s.matrix().trace() - y.norm_squared() / 5.0).abs() < 1e-12);
        assert_eq!(s.matrix(), &s.matrix().transpose());
    }

    #[test]
    fn empty_dataset_is_rejected() {
        assert!(ClientDataset::new(3, DMatrix::<f64>::zeros(4, 0)).is_err());
    }

    #[test]
    fn objective_examples() {
        let state = random_state(1, 5, 2, 1, 3);
        let zero = vec![CovarianceMatrix::from_matrix(DMatrix::zeros(5, 5), 1).unwrap(); 3];
        assert_eq!(objective_f(&state, &zero).unwrap(), 0.0);

        let s = CovarianceMatrix::from_matrix(DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0])), 1)
            .unwrap();
        let u = OrthonormalFrame::canonical(3, 1).unwrap();
        let v = OrthonormalFrame::from_matrix(dmatrix![0.0; 1.0; 0.0]).unwrap();
        let state = ComponentState::new(u, vec![v], 1e-12).unwrap();
        assert_eq!(objective_f(&state, &[s]).unwrap(), 2.5);
    }

    #[test]
    fn objective_depends_only_on_subspaces() {
        let state = random_state(2, 6, 2, 2, 3);
        let covs = random_covs(2, 6, 10, 3);
        let f = objective_f(&state, &covs).unwrap();
        assert!(f > 0.0);
        let mut rotated = state.clone();
        rotated.global = state.global.rotated(&random_rotation(1, 2)).unwrap();
        rotated.local[1] = state.local[1].rotated(&random_rotation(2, 2)).unwrap();
        assert!((objective_f(&rotated, &covs).unwrap() - f).abs() < 1e-12);
    }

    #[test]
    fn reconstruction_examples() {
        let u = OrthonormalFrame::canonical(3, 1).unwrap();
        let v = OrthonormalFrame::from_matrix(dmatrix![0.0; 1.0; 0.0]).unwrap();
        let inside = ClientDataset::new(0, dmatrix![1.0, 2.0; -3.0, 0.5; 0.0, 0.0]).unwrap();
        assert!(reconstruction_error(&inside, &u, &v).unwrap() < 1e-12);
        let e3 = ClientDataset::new(0, dmatrix![0.0; 0.0; 1.0]).unwrap();
        assert_eq!(reconstruction_error(&e3, &u, &v).unwrap(), 1.0);
    }

    #[test]
    fn reconstruction_matches_trace_identity() {
        let state = random_state(3, 6, 2, 2, 1);
        let y = ClientDataset::new(0, gaussian_matrix(&mut substream(3, Stream::Scores, 0), 6, 9)).unwrap();
        let s = covariance(&y).unwrap();
        let direct = reconstruction_error(&y, &state.global, &state.local[0]).unwrap();
        let via_cov = reconstruction_error_from_cov(&s, &state.global, &state.local[0]);
        assert!((direct - via_cov).abs() < 1e-10);
    }

    #[test]
    fn reconstruction_rejects_non_orthogonal_pair() {
        let u = OrthonormalFrame::canonical(3, 1).unwrap();
        let y = ClientDataset::new(0, dmatrix![1.0; 1.0; 1.0]).unwrap();
        assert!(matches!(
            reconstruction_error(&y, &u, &u),
            Err(crate::PerPcaError::Contract(_))
        ));
    }

    #[test]
    fn reconstruction_plus_objective_is_total_energy() {
        let state = random_state(4, 7, 2, 3, 4);
        let data: Vec<_> = (0..4)
            .map(|i| ClientDataset::new(i, gaussian_matrix(&mut substream(4, Stream::Scores, i as u64), 7, 5 + 3 * i)).unwrap())
            .collect();
        let covs: Vec<_> = data.iter().map(|y| covariance(y).unwrap()).collect();
        let recon: f64 = data
            .iter()
            .zip(&state.local)
            .map(|(y, v)| reconstruction_error(y, &state.global, v).unwrap())
            .sum();
        let energy: f64 = data.iter().map(|y| y.matrix().norm_squared() / y.len() as f64).sum();
        let f = objective_f(&state, &covs).unwrap();
        assert!((recon + 2.0 * f - energy).abs() < 1e-9);
    }

    #[test]
    fn kkt_vanishes_at_eigenvectors() {
        let b = gaussian_matrix::<f64, _>(&mut substream(5, Stream::Scores, 0), 6, 6);
        let s = &b * b.transpose();
        let (_, vecs) = crate::linalg::sym_eigen_desc(&s).unwrap();
        let u = OrthonormalFrame::from_matrix(vecs.columns(0, 2).clone_owned()).unwrap();
        let v = OrthonormalFrame::from_matrix(vecs.columns(2, 2).clone_owned()).unwrap();
        let state = ComponentState::new(u, vec![v], 1e-10).unwrap();
        let kkt = kkt_residual(&state, &[CovarianceMatrix::from_matrix(s, 6).unwrap()]).unwrap();
        assert!(kkt.global < 1e-9 && kkt.local < 1e-9, "{kkt:?}");
    }

    #[test]
    fn kkt_positive_off_stationarity_and_rotation_invariant() {
        let state = random_state(6, 6, 2, 2, 3);
        let covs = random_covs(6, 6, 12, 3);
        let kkt = kkt_residual(&state, &covs).unwrap();
        assert!(kkt.global > 0.0 && kkt.local > 0.0);
        let mut rotated = state.clone();
        for (k, v) in rotated.local.iter_mut().enumerate() {
            *v = v.rotated(&random_rotation(10 + k as u64, 2)).unwrap();
        }
        let again = kkt_residual(&rotated, &covs).unwrap();
        assert!((kkt.global - again.global).abs() < 1e-10 * kkt.global.max(1.0));
        assert!((kkt.local - again.local).abs() < 1e-10 * kkt.local.max(1.0));
    }

    #[test]
    fn state_rejects_cross_correlated_frames() {
        let u = OrthonormalFrame::canonical(3, 1).unwrap();
        let s = 0.5f64.sqrt();
        let v = OrthonormalFrame::from_matrix(dmatrix![s; s; 0.0]).unwrap();
        assert!(ComponentState::new(u, vec![v], 1e-8).is_err());
    }

    #[test]
    fn centering_removes_means() {
        let y = ClientDataset::new(0, dmatrix![1.0, 3.0; 2.0, 2.0]).unwrap().centered();
        assert_eq!(y.matrix(), &dmatrix![-1.0, 1.0; 0.0, 0.0]);
    }
}
