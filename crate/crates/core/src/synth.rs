//! Planted-subspace data generator.
//!
//! Observations on client `i` follow `y = U·φ + V_(i)·ϕ + ε` with
//! orthonormal, mutually orthogonal `U` and `V_(i)`, i.i.d. scores and
//! isotropic noise. All draws are keyed by `(seed, stream, client)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::linalg::{lambda_max_sym, sym_eigen_desc};
use crate::model::{ClientDataset, GroundTruth};
use crate::rng::{gaussian_matrix, rademacher_matrix, substream, Stream};
use crate::stiefel::OrthonormalFrame;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreDist {
    #[default]
    Gaussian,
    Rademacher,
}

/// How local subspaces relate across clients.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocalLayout {
    /// Each client draws its own random subspace.
    #[default]
    Independent,
    /// Mutually orthogonal local subspaces (needs `r1 + N·r2 ≤ d`).
    Disjoint,
    /// One local subspace shared by every client (θ = 0).
    Shared,
    /// Clients with equal labels share a local subspace.
    Groups(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerativeSpec {
    pub d: usize,
    pub n_clients: usize,
    pub r1: usize,
    pub r2: usize,
    pub n_per_client: Vec<usize>,
    pub global_score_std: f64,
    pub local_score_std: f64,
    pub noise_std: f64,
    /// Exact only for two clients with `r2 = 1`.
    pub theta_target: Option<f64>,
    pub layout: LocalLayout,
    pub score_dist: ScoreDist,
    pub seed: u64,
}

impl GenerativeSpec {
    /// Noiseless spec with unit global scores and 10× larger local scores.
    pub fn new(d: usize, n_clients: usize, r1: usize, r2: usize, n: usize) -> Self {
        GenerativeSpec {
            d,
            n_clients,
            r1,
            r2,
            n_per_client: vec![n; n_clients],
            global_score_std: 1.0,
            local_score_std: 10.0,
            noise_std: 0.0,
            theta_target: None,
            layout: LocalLayout::Independent,
            score_dist: ScoreDist::Gaussian,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.n_clients >= 1, Input, "need at least one client");
        ensure!(self.r1 >= 1 && self.r2 >= 1, Input, "ranks must be positive (r1={}, r2={})", self.r1, self.r2);
        ensure!(
            self.r1 + self.r2 <= self.d,
            Input,
            "r1 + r2 = {} exceeds d = {}",
            self.r1 + self.r2,
            self.d
        );
        ensure!(
            self.n_per_client.len() == self.n_clients,
            Input,
            "{} sample sizes for {} clients",
            self.n_per_client.len(),
            self.n_clients
        );
        ensure!(self.n_per_client.iter().all(|&n| n >= 1), Input, "every client needs at least one observation");
        for (name, s) in [
            ("global_score_std", self.global_score_std),
            ("local_score_std", self.local_score_std),
            ("noise_std", self.noise_std),
        ] {
            ensure!(s.is_finite() && s >= 0.0, Input, "{name} must be finite and nonnegative, got {s}");
        }
        match &self.layout {
            LocalLayout::Disjoint => ensure!(
                self.r1 + self.n_clients * self.r2 <= self.d,
                Input,
                "disjoint layout needs r1 + N·r2 = {} <= d = {}",
                self.r1 + self.n_clients * self.r2,
                self.d
            ),
            LocalLayout::Groups(labels) => ensure!(
                labels.len() == self.n_clients,
                Input,
                "{} group labels for {} clients",
                labels.len(),
                self.n_clients
            ),
            _ => {}
        }
        if let Some(theta) = self.theta_target {
            ensure!(
                self.n_clients == 2 && self.r2 == 1 && self.d >= self.r1 + 2,
                Input,
                "theta_target is only controllable with N = 2, r2 = 1 and d >= r1 + 2"
            );
            ensure!(
                theta > 0.0 && theta <= 0.5,
                Input,
                "theta_target = {theta} is outside (0, 0.5], the range reachable by two lines"
            );
            ensure!(self.layout == LocalLayout::Independent, Input, "theta_target overrides the local layout");
        }
        Ok(())
    }
}

/// True subspaces plus the identifiability constant and eigengap they imply.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedTruth<T: Real> {
    pub global: OrthonormalFrame<T>,
    pub local: Vec<OrthonormalFrame<T>>,
    pub theta_actual: T,
    pub eigengap: T,
}

impl<T: Real> PlantedTruth<T> {
    pub fn ground_truth(&self) -> GroundTruth<T> {
        GroundTruth { global: self.global.clone(), local: self.local.clone() }
    }
}

/// Orthonormal `r`-frame in `col(U)^⊥`, drawn from `(seed, Components, index)`.
fn random_orthogonal_to<T: Real>(u: &OrthonormalFrame<T>, r: usize, seed: u64, index: u64) -> Result<OrthonormalFrame<T>> {
    let g: DMatrix<T> = gaussian_matrix(&mut substream(seed, Stream::Components, index), u.dim(), r);
    let mut w = &g - u.matrix() * u.matrix().tr_mul(&g);
    // second pass keeps ‖UᵀV‖ at rounding level
    w -= u.matrix() * u.matrix().tr_mul(&w);
    let v = OrthonormalFrame::orthonormalize(&w)?;
    let v = v.matrix() - u.matrix() * u.matrix().tr_mul(v.matrix());
    OrthonormalFrame::orthonormalize(&v)
}

pub fn generate_components<T: Real>(spec: &GenerativeSpec) -> Result<PlantedTruth<T>> {
    spec.validate()?;
    let (d, r1, r2, n) = (spec.d, spec.r1, spec.r2, spec.n_clients);
    let seed = spec.seed;
    let u = OrthonormalFrame::orthonormalize(&gaussian_matrix::<T, _>(&mut substream(seed, Stream::Components, 0), d, r1))?;

    let local: Vec<OrthonormalFrame<T>> = if let Some(theta) = spec.theta_target {
        // Two lines in col(U)^⊥ at angle α with cos α = 1 − 2θ give
        // 1 − λ_max((P₁ + P₂)/2) = sin²(α/2) = θ.
        let w = random_orthogonal_to(&u, 2, seed, 1)?;
        let cos_a = T::lit(1.0 - 2.0 * theta);
        let sin_a = (T::one() - cos_a * cos_a).max(T::zero()).sqrt();
        let w1 = w.matrix().column(0).clone_owned();
        let w2 = w.matrix().column(1).clone_owned();
        let v2 = &w1 * cos_a + &w2 * sin_a;
        vec![
            OrthonormalFrame::from_matrix_unchecked(DMatrix::from_column_slice(d, 1, w1.as_slice())),
            OrthonormalFrame::orthonormalize(&DMatrix::from_column_slice(d, 1, v2.as_slice()))?,
        ]
    } else {
        match &spec.layout {
            LocalLayout::Independent => (0..n)
                .map(|i| random_orthogonal_to(&u, r2, seed, 1 + i as u64))
                .collect::<Result<_>>()?,
            LocalLayout::Shared => {
                let v = random_orthogonal_to(&u, r2, seed, 1)?;
                vec![v; n]
            }
            LocalLayout::Disjoint => {
                let w = random_orthogonal_to(&u, n * r2, seed, 1)?;
                (0..n)
                    .map(|i| OrthonormalFrame::from_matrix_unchecked(w.matrix().columns(i * r2, r2).clone_owned()))
                    .collect()
            }
            LocalLayout::Groups(labels) => labels
                .iter()
                .map(|&g| random_orthogonal_to(&u, r2, seed, 1 + g as u64))
                .collect::<Result<_>>()?,
        }
    };

    let theta_actual = theta_of(&local)?;
    let blocks: Vec<_> = local
        .iter()
        .map(|v| population_blocks(&u, v, spec))
        .collect();
    let r2s = vec![r2; n];
    let eigengap = eigengap_of(&blocks, r1, &r2s)?;
    Ok(PlantedTruth { global: u, local, theta_actual, eigengap })
}

fn scores<T: Real>(spec: &GenerativeSpec, stream_index: u64, rows: usize, cols: usize, std: f64) -> DMatrix<T> {
    let mut rng = substream(spec.seed, Stream::Scores, stream_index);
    let z: DMatrix<T> = match spec.score_dist {
        ScoreDist::Gaussian => gaussian_matrix(&mut rng, rows, cols),
        ScoreDist::Rademacher => rademacher_matrix(&mut rng, rows, cols),
    };
    z * T::lit(std)
}

/// Draws `Y_(i)` (`d × n_i`) for every client.
pub fn generate_observations<T: Real>(truth: &PlantedTruth<T>, spec: &GenerativeSpec) -> Result<Vec<ClientDataset<T>>> {
    spec.validate()?;
    ensure!(
        truth.global.dim() == spec.d && truth.global.rank() == spec.r1 && truth.local.len() == spec.n_clients,
        Input,
        "truth does not match the generative spec"
    );
    (0..spec.n_clients)
        .map(|i| {
            let n = spec.n_per_client[i];
            let v = &truth.local[i];
            // global and local scores come from separate halves of the client's score stream index space
            let phi = scores::<T>(spec, 2 * i as u64, spec.r1, n, spec.global_score_std);
            let psi = scores::<T>(spec, 2 * i as u64 + 1, v.rank(), n, spec.local_score_std);
            let mut y = truth.global.matrix() * phi + v.matrix() * psi;
            if spec.noise_std > 0.0 {
                let eps: DMatrix<T> = gaussian_matrix(&mut substream(spec.seed, Stream::Noise, i as u64), spec.d, n);
                y += eps * T::lit(spec.noise_std);
            }
            ClientDataset::new(i, y)
        })
        .collect()
}

/// `σ_g²P_U + σ_l²P_V + σ_ε²I`.
pub fn population_covariance<T: Real>(u: &OrthonormalFrame<T>, v: &OrthonormalFrame<T>, spec: &GenerativeSpec) -> DMatrix<T> {
    let (g, l) = population_blocks(u, v, spec);
    g + l
}

/// Direct-sum split `(Σ_g, Σ_l)` of the population covariance: noise on
/// `col(U)` goes to `Σ_g`, the rest to `Σ_l`.
pub fn population_blocks<T: Real>(
    u: &OrthonormalFrame<T>,
    v: &OrthonormalFrame<T>,
    spec: &GenerativeSpec,
) -> (DMatrix<T>, DMatrix<T>) {
    let pu = u.projector();
    let pv = v.projector();
    let noise = T::lit(spec.noise_std * spec.noise_std);
    let gvar = T::lit(spec.global_score_std * spec.global_score_std);
    let lvar = T::lit(spec.local_score_std * spec.local_score_std);
    let d = u.dim();
    let rest = DMatrix::<T>::identity(d, d) - &pu - &pv;
    (&pu * (gvar + noise), &pv * (lvar + noise) + rest * noise)
}

/// `1 − λ_max((1/N)·Σ P_{V_(i)})`.
pub fn theta_of<T: Real>(local: &[OrthonormalFrame<T>]) -> Result<T> {
    ensure!(!local.is_empty(), Input, "no local frames");
    let d = local[0].dim();
    let mut avg = DMatrix::<T>::zeros(d, d);
    for (i, v) in local.iter().enumerate() {
        ensure!(v.dim() == d, Dimension, "frame {i} lives in dimension {}, frame 0 in {d}", v.dim());
        avg += v.projector();
    }
    avg /= T::from_usize_lossy(local.len());
    Ok((T::one() - lambda_max_sym(&avg)?).max(T::zero()))
}

/// `min_i [min{λ_r1(Σ_g), λ_r2(Σ_l)} − max{λ_r1+1(Σ_g), λ_r2+1(Σ_l)}]`.
///
/// Eigenvalues past the matrix size count as zero. A negative gap is an error.
pub fn eigengap_of<T: Real>(blocks: &[(DMatrix<T>, DMatrix<T>)], r1: usize, r2: &[usize]) -> Result<T> {
    ensure!(!blocks.is_empty(), Input, "no population covariances");
    ensure!(r2.len() == blocks.len(), Input, "{} local ranks for {} clients", r2.len(), blocks.len());
    let mut gap: Option<T> = None;
    for (i, ((g, l), &rl)) in blocks.iter().zip(r2).enumerate() {
        let (eg, _) = sym_eigen_desc(g)?;
        let (el, _) = sym_eigen_desc(l)?;
        let at = |e: &nalgebra::DVector<T>, k: usize| if k < e.len() { e[k] } else { T::zero() };
        ensure!(r1 >= 1 && rl >= 1, Input, "ranks must be positive");
        let retained = at(&eg, r1 - 1).min(at(&el, rl - 1));
        let discarded = at(&eg, r1).max(at(&el, rl));
        let gi = retained - discarded;
        ensure!(gi >= T::zero(), Input, "client {i} has negative eigengap {gi:e}");
        gap = Some(gap.map_or(gi, |g0: T| g0.min(gi)));
    }
    Ok(gap.unwrap())
}
