//! Round-based federated solver ("PerPCA by Stiefel gradient descent").
//!
//! Each round every client takes a gradient step on `[U, V_(i)]` from the
//! broadcast global frame, the server averages the clients' global
//! candidates and retracts the mean, and each client re-orthogonalizes its
//! local frame against the new global frame (the correction step).
//!
//! Client work within a round is independent and runs on the rayon pool; the
//! server reduction always sums candidates in ascending client order, so the
//! result is bitwise identical for any worker count.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{distpca_global, Stacking};
use crate::error::{ensure, PerPcaError, Result};
use crate::linalg::power_iteration;
use crate::metrics::subspace_error;
use crate::model::{kkt_residual, objective_f, reconstruction_error_from_cov, ComponentState, CovarianceMatrix, GroundTruth};
use crate::rng::{gaussian_matrix, substream, Stream};
use crate::stiefel::{polar_factor, project_tangent, OrthonormalFrame, Retraction};
use crate::{Real, Tolerances};

/// Client-side update rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Choice {
    /// Tangent-projected gradient step; `V` is retracted, `U` is left for the server.
    #[default]
    #[serde(rename = "1")]
    One,
    /// Joint polar projection of `[U, V] + η·S·[U, V]`.
    #[serde(rename = "2")]
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stepsize<T> {
    /// `c / (G_max · √r)` with `G_max = max_i ‖S_i‖_op`.
    Auto { c: T },
    Fixed(T),
}

impl<T: Real> Default for Stepsize<T> {
    fn default() -> Self {
        Stepsize::Auto { c: T::lit(DEFAULT_STEP_CONSTANT) }
    }
}

pub const DEFAULT_STEP_CONSTANT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    #[default]
    DistPca,
    Random,
}

/// Local ranks `r2_(i)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LocalRanks {
    Uniform(usize),
    PerClient(Vec<usize>),
}

impl LocalRanks {
    pub fn resolve(&self, n_clients: usize) -> Result<Vec<usize>> {
        match self {
            LocalRanks::Uniform(r) => Ok(vec![*r; n_clients]),
            LocalRanks::PerClient(list) => {
                ensure!(
                    list.len() == n_clients,
                    Input,
                    "{} local ranks given for {n_clients} clients",
                    list.len()
                );
                Ok(list.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig<T: Real> {
    pub rounds: usize,
    pub stepsize: Stepsize<T>,
    pub choice: Choice,
    pub retraction: Retraction,
    pub init: Init,
    /// Server combination rule used by [`Init::DistPca`].
    pub init_stacking: Stacking,
    pub seed: u64,
    pub r1: usize,
    pub r2: LocalRanks,
    pub record_trace: bool,
    /// Stop early once the total KKT residual falls to this level.
    pub stop_tol: Option<T>,
    pub tolerances: Tolerances<T>,
}

impl<T: Real> SolverConfig<T> {
    pub fn new(r1: usize, r2: usize) -> Self {
        SolverConfig {
            rounds: 100,
            stepsize: Stepsize::default(),
            choice: Choice::One,
            retraction: Retraction::Polar,
            init: Init::DistPca,
            init_stacking: Stacking::Scaled,
            seed: 0,
            r1,
            r2: LocalRanks::Uniform(r2),
            record_trace: true,
            stop_tol: None,
            tolerances: Tolerances::default(),
        }
    }

    pub fn rounds(mut self, rounds: usize) -> Self {
        self.rounds = rounds;
        self
    }

    pub fn stepsize(mut self, stepsize: Stepsize<T>) -> Self {
        self.stepsize = stepsize;
        self
    }

    pub fn choice(mut self, choice: Choice) -> Self {
        self.choice = choice;
        self
    }

    pub fn retraction(mut self, retraction: Retraction) -> Self {
        self.retraction = retraction;
        self
    }

    pub fn init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn record_trace(mut self, record: bool) -> Self {
        self.record_trace = record;
        self
    }

    pub fn stop_tol(mut self, tol: T) -> Self {
        self.stop_tol = Some(tol);
        self
    }
}

/// Metrics of the feasible state at the end of one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace<T> {
    pub round: usize,
    pub objective: T,
    pub kkt_global: T,
    pub kkt_local: T,
    pub recon_error_mean: T,
    pub subspace_error: Option<T>,
}

/// Output of a client's local step.
#[derive(Debug, Clone)]
pub struct ClientUpdate<T: Real> {
    /// `d × r1` global candidate; generally not orthonormal.
    pub u_candidate: DMatrix<T>,
    pub v_half: OrthonormalFrame<T>,
}

/// Re-orthogonalizes `V` against `U`: `GR(V; −U Uᵀ V)`.
pub fn correction_step<T: Real>(
    v_half: &OrthonormalFrame<T>,
    u_next: &OrthonormalFrame<T>,
    retraction: Retraction,
    rank_tol: T,
) -> Result<OrthonormalFrame<T>> {
    ensure!(
        v_half.dim() == u_next.dim(),
        Dimension,
        "local frame in dimension {}, global in {}",
        v_half.dim(),
        u_next.dim()
    );
    let xi = -(u_next.matrix() * u_next.matrix().tr_mul(v_half.matrix()));
    retraction.retract(v_half, &xi, rank_tol)
}

fn split_columns<T: Real>(m: &DMatrix<T>, r1: usize) -> (DMatrix<T>, DMatrix<T>) {
    let r2 = m.ncols() - r1;
    (m.columns(0, r1).clone_owned(), m.columns(r1, r2).clone_owned())
}

fn check_client<T: Real>(u: &OrthonormalFrame<T>, v: &OrthonormalFrame<T>, s: &CovarianceMatrix<T>) -> Result<()> {
    ensure!(
        u.dim() == v.dim() && u.dim() == s.dim(),
        Dimension,
        "U, V and S have dimensions {}, {}, {}",
        u.dim(),
        v.dim(),
        s.dim()
    );
    Ok(())
}

/// Choice 1: `g = P_T([U,V]; S[U,V])`, `U' = U + η g_U`, `V' = GR(V; η g_V)`.
pub fn client_update_choice1<T: Real>(
    u: &OrthonormalFrame<T>,
    v: &OrthonormalFrame<T>,
    s: &CovarianceMatrix<T>,
    eta: T,
    retraction: Retraction,
    rank_tol: T,
) -> Result<ClientUpdate<T>> {
    check_client(u, v, s)?;
    let joint = OrthonormalFrame::from_matrix_unchecked(u.concat(v)?);
    let grad = s.matrix() * joint.matrix();
    let g = project_tangent(&joint, &grad)?;
    let (g_u, g_v) = split_columns(&g, u.rank());
    Ok(ClientUpdate {
        u_candidate: u.matrix() + g_u * eta,
        v_half: retraction.retract(v, &(g_v * eta), rank_tol)?,
    })
}

/// Choice 2: `[U', V'] = Polar([U,V]; η S [U,V])`.
pub fn client_update_choice2<T: Real>(
    u: &OrthonormalFrame<T>,
    v: &OrthonormalFrame<T>,
    s: &CovarianceMatrix<T>,
    eta: T,
    rank_tol: T,
) -> Result<ClientUpdate<T>> {
    check_client(u, v, s)?;
    let joint = u.concat(v)?;
    let step = s.matrix() * &joint * eta;
    let w = if step.iter().all(|x| *x == T::zero()) {
        joint
    } else {
        polar_factor(&(joint + step), rank_tol)?
    };
    let (u_cand, v_half) = split_columns(&w, u.rank());
    Ok(ClientUpdate {
        u_candidate: u_cand,
        v_half: OrthonormalFrame::from_matrix_unchecked(v_half),
    })
}

/// `U_next = GR(U_prev; mean(candidates) − U_prev)`, averaging in list order.
pub fn server_aggregate<T: Real>(
    candidates: &[DMatrix<T>],
    u_prev: &OrthonormalFrame<T>,
    retraction: Retraction,
    rank_tol: T,
) -> Result<OrthonormalFrame<T>> {
    ensure!(!candidates.is_empty(), Input, "no global candidates to aggregate");
    let shape = u_prev.matrix().shape();
    let mut mean = DMatrix::<T>::zeros(shape.0, shape.1);
    for (i, c) in candidates.iter().enumerate() {
        ensure!(
            c.shape() == shape,
            Dimension,
            "candidate {i} is {}x{}, expected {}x{}",
            c.nrows(),
            c.ncols(),
            shape.0,
            shape.1
        );
        mean += c;
    }
    mean /= T::from_usize_lossy(candidates.len());
    retraction.retract(u_prev, &(mean - u_prev.matrix()), rank_tol)
}

/// `c / (G_max · √r)` where `G_max` is the largest client operator norm,
/// estimated by power iteration to `1e-6` relative accuracy.
pub fn auto_stepsize<T: Real>(covs: &[CovarianceMatrix<T>], r: usize, c: T) -> Result<T> {
    ensure!(!covs.is_empty(), Input, "no client covariances");
    ensure!(r >= 1, Input, "rank must be positive");
    ensure!(c > T::zero(), Input, "step constant must be positive");
    let mut g_max = T::zero();
    for s in covs {
        g_max = g_max.max(power_iteration(s.matrix(), T::lit(1e-6), 100_000)?);
    }
    ensure!(g_max > T::zero(), Input, "all client covariances are zero");
    Ok(c / (g_max * T::from_usize_lossy(r).sqrt()))
}

/// Local frame drawn at random and made orthonormal to `u`.
fn random_local<T: Real>(u: &OrthonormalFrame<T>, r2: usize, seed: u64, client: usize) -> Result<OrthonormalFrame<T>> {
    let d = u.dim();
    let r1 = u.rank();
    let mut m: DMatrix<T> = gaussian_matrix(&mut substream(seed, Stream::Init, 1 + client as u64), d, r1 + r2);
    m.columns_mut(0, r1).copy_from(u.matrix());
    let q = OrthonormalFrame::orthonormalize(&m)?;
    let v = q.matrix().columns(r1, r2).clone_owned();
    // QR of [U, G] reproduces U in its first block, so V ⊥ U; one projection
    // pass removes the rounding residue.
    let v = &v - u.matrix() * u.matrix().tr_mul(&v);
    OrthonormalFrame::orthonormalize(&v)
}

fn check_init_ranks(d: usize, r1: usize, r2: &[usize]) -> Result<()> {
    ensure!(!r2.is_empty(), Input, "no clients");
    ensure!(r1 >= 1, Input, "r1 must be positive");
    for (i, &r) in r2.iter().enumerate() {
        ensure!(r >= 1, Input, "r2[{i}] must be positive");
        ensure!(r1 + r <= d, Input, "r1 + r2[{i}] = {} exceeds d = {d}", r1 + r);
    }
    Ok(())
}

/// Gaussian frames, jointly orthonormalized per client.
pub fn init_random<T: Real>(d: usize, r1: usize, r2: &[usize], seed: u64) -> Result<ComponentState<T>> {
    check_init_ranks(d, r1, r2)?;
    let u = OrthonormalFrame::orthonormalize(&gaussian_matrix(&mut substream(seed, Stream::Init, 0), d, r1))?;
    let local = r2
        .iter()
        .enumerate()
        .map(|(i, &r)| random_local(&u, r, seed, i))
        .collect::<Result<Vec<_>>>()?;
    ComponentState::new(u, local, Tolerances::default().cross_tol)
}

/// Global frame from distributed PCA, local frames random and orthogonalized against it.
pub fn init_distpca<T: Real>(
    covs: &[CovarianceMatrix<T>],
    r1: usize,
    r2: &[usize],
    seed: u64,
    stacking: Stacking,
) -> Result<ComponentState<T>> {
    let u = distpca_global(covs, r1, r2, stacking)?;
    let local = r2
        .iter()
        .enumerate()
        .map(|(i, &r)| random_local(&u, r, seed, i))
        .collect::<Result<Vec<_>>>()?;
    ComponentState::new(u, local, Tolerances::default().cross_tol)
}

/// Final state and per-round trace of a run.
#[derive(Debug, Clone)]
pub struct FitResult<T: Real> {
    pub state: ComponentState<T>,
    pub trace: Vec<RoundTrace<T>>,
    pub stepsize: T,
}

/// Stateful driver; one [`PerPcaSolver::step`] is one communication round.
pub struct PerPcaSolver<'a, T: Real> {
    covs: &'a [CovarianceMatrix<T>],
    config: SolverConfig<T>,
    eta: T,
    state: ComponentState<T>,
    round: usize,
}

impl<'a, T: Real> PerPcaSolver<'a, T> {
    /// Validates inputs, resolves the stepsize, and initializes per `config.init`.
    pub fn new(covs: &'a [CovarianceMatrix<T>], config: SolverConfig<T>) -> Result<Self> {
        let r2 = Self::validate(covs, &config)?;
        let state = match config.init {
            Init::Random => init_random(covs[0].dim(), config.r1, &r2, config.seed)?,
            Init::DistPca => init_distpca(covs, config.r1, &r2, config.seed, config.init_stacking)?,
        };
        Self::with_state(covs, config, state)
    }

    /// Starts from a caller-provided feasible state.
    pub fn with_state(covs: &'a [CovarianceMatrix<T>], config: SolverConfig<T>, state: ComponentState<T>) -> Result<Self> {
        let r2 = Self::validate(covs, &config)?;
        ensure!(
            state.num_clients() == covs.len() && state.dim() == covs[0].dim(),
            Dimension,
            "state has {} clients in dimension {}, data has {} in {}",
            state.num_clients(),
            state.dim(),
            covs.len(),
            covs[0].dim()
        );
        ensure!(state.global.rank() == config.r1, Input, "state U has rank {}, config r1 = {}", state.global.rank(), config.r1);
        for (i, (v, &r)) in state.local.iter().zip(&r2).enumerate() {
            ensure!(v.rank() == r, Input, "state V_({i}) has rank {}, config r2 = {r}", v.rank());
        }
        state.validate(config.tolerances.cross_tol)?;
        let r_max = r2.iter().copied().max().unwrap_or(0).max(config.r1);
        let eta = match config.stepsize {
            Stepsize::Auto { c } => auto_stepsize(covs, r_max, c)?,
            Stepsize::Fixed(eta) => {
                ensure!(eta > T::zero(), Input, "stepsize must be positive, got {eta}");
                eta
            }
        };
        Ok(PerPcaSolver { covs, config, eta, state, round: 0 })
    }

    fn validate(covs: &[CovarianceMatrix<T>], config: &SolverConfig<T>) -> Result<Vec<usize>> {
        ensure!(!covs.is_empty(), Input, "no client covariances");
        let d = covs[0].dim();
        for (i, s) in covs.iter().enumerate() {
            ensure!(s.dim() == d, Dimension, "client {i} has dimension {}, client 0 has {d}", s.dim());
        }
        let r2 = config.r2.resolve(covs.len())?;
        check_init_ranks(d, config.r1, &r2)?;
        Ok(r2)
    }

    pub fn state(&self) -> &ComponentState<T> {
        &self.state
    }

    pub fn into_state(self) -> ComponentState<T> {
        self.state
    }

    pub fn stepsize(&self) -> T {
        self.eta
    }

    /// Rounds completed so far.
    pub fn round(&self) -> usize {
        self.round
    }

    /// Runs one communication round.
    pub fn step(&mut self) -> Result<()> {
        let round = self.round + 1;
        let rank_tol = self.config.tolerances.rank_tol;
        let retraction = self.config.retraction;
        let choice = self.config.choice;
        let eta = self.eta;
        let u = &self.state.global;

        let updates: Vec<ClientUpdate<T>> = self
            .covs
            .par_iter()
            .zip(self.state.local.par_iter())
            .enumerate()
            .map(|(i, (s, v))| {
                match choice {
                    Choice::One => client_update_choice1(u, v, s, eta, retraction, rank_tol),
                    Choice::Two => client_update_choice2(u, v, s, eta, rank_tol),
                }
                .map_err(|e| PerPcaError::Client { round, client: i, source: Box::new(e) })
            })
            .collect::<Result<_>>()?;

        let candidates: Vec<DMatrix<T>> = updates.iter().map(|up| up.u_candidate.clone()).collect();
        let u_next = server_aggregate(&candidates, u, retraction, rank_tol)
            .map_err(|e| PerPcaError::Server { round, source: Box::new(e) })?;

        let local: Vec<OrthonormalFrame<T>> = updates
            .into_par_iter()
            .enumerate()
            .map(|(i, up)| {
                correction_step(&up.v_half, &u_next, retraction, rank_tol)
                    .map_err(|e| PerPcaError::Client { round, client: i, source: Box::new(e) })
            })
            .collect::<Result<_>>()?;

        self.state = ComponentState { global: u_next, local };
        debug_assert!(self.state.max_cross_norm() <= self.config.tolerances.cross_tol);
        self.round = round;
        Ok(())
    }

    /// Metrics of the current state.
    pub fn record(&self, truth: Option<&GroundTruth<T>>) -> Result<RoundTrace<T>> {
        let kkt = kkt_residual(&self.state, self.covs)?;
        let recon = self
            .covs
            .iter()
            .zip(&self.state.local)
            .fold(T::zero(), |acc, (s, v)| acc + reconstruction_error_from_cov(s, &self.state.global, v));
        Ok(RoundTrace {
            round: self.round,
            objective: objective_f(&self.state, self.covs)?,
            kkt_global: kkt.global,
            kkt_local: kkt.local,
            recon_error_mean: recon / T::from_usize_lossy(self.covs.len()),
            subspace_error: truth.map(|t| subspace_error(&self.state, t)).transpose()?,
        })
    }

    /// Runs the configured number of rounds.
    pub fn run(mut self, truth: Option<&GroundTruth<T>>) -> Result<FitResult<T>> {
        let mut trace = Vec::with_capacity(if self.config.record_trace { self.config.rounds } else { 0 });
        while self.round < self.config.rounds {
            self.step()?;
            if self.config.record_trace {
                let rec = self.record(truth)?;
                trace.push(rec);
                if self.config.stop_tol.is_some_and(|tol| rec.kkt_global + rec.kkt_local <= tol) {
                    break;
                }
            } else if let Some(tol) = self.config.stop_tol {
                if kkt_residual(&self.state, self.covs)?.total() <= tol {
                    break;
                }
            }
        }
        Ok(FitResult { stepsize: self.eta, state: self.state, trace })
    }
}

/// Initializes per `config` and runs `config.rounds` rounds.
pub fn run_perpca<T: Real>(
    covs: &[CovarianceMatrix<T>],
    config: SolverConfig<T>,
    truth: Option<&GroundTruth<T>>,
) -> Result<FitResult<T>> {
    PerPcaSolver::new(covs, config)?.run(truth)
}
