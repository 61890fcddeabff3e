//! Evaluation metrics and the theory oracles (ℓ(θ), arrowhead spectrum,
//! direct-sum closeness bounds), plus ρ-based client clustering.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::linalg::{frob_inner, lambda_max_sym, lambda_min_sym, sym_eigen_desc, symmetrize};
use crate::model::{ComponentState, GroundTruth};
use crate::rng::{substream, Stream};
use crate::stiefel::{subspace_distance, OrthonormalFrame};
use crate::Real;

/// `‖P_U − Π_g‖_F² + (1/N)Σ‖P_{V_(i)} − Π_(i)‖_F²`.
pub fn subspace_error<T: Real>(state: &ComponentState<T>, truth: &GroundTruth<T>) -> Result<T> {
    ensure!(
        state.num_clients() == truth.local.len(),
        Dimension,
        "state has {} clients, truth has {}",
        state.num_clients(),
        truth.local.len()
    );
    let global = subspace_distance(&state.global, &truth.global)?;
    let mut local = T::zero();
    for (v, v_star) in state.local.iter().zip(&truth.local) {
        local += subspace_distance(v, v_star)?;
    }
    Ok(global + local / T::from_usize_lossy(state.num_clients()))
}

/// `‖P_U − Π_g‖_F²` alone.
pub fn global_subspace_error<T: Real>(state: &ComponentState<T>, truth: &GroundTruth<T>) -> Result<T> {
    subspace_distance(&state.global, &truth.global)
}

/// Pairwise local-subspace distances `ρ_ij = ‖P_{V_i} − P_{V_j}‖_F² / r₂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoMatrix {
    pub values: Vec<Vec<f64>>,
    /// `false` when local ranks differ and pairs were normalized by `max(r_i, r_j)`.
    pub paper_standard: bool,
}

impl RhoMatrix {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| self.values[i][j])
    }
}

pub fn rho_matrix<T: Real>(local: &[OrthonormalFrame<T>]) -> Result<RhoMatrix> {
    let n = local.len();
    let equal_ranks = local.windows(2).all(|w| w[0].rank() == w[1].rank());
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let norm = local[i].rank().max(local[j].rank()) as f64;
            let rho = subspace_distance(&local[i], &local[j])?.as_f64() / norm;
            values[i][j] = rho;
            values[j][i] = rho;
        }
    }
    Ok(RhoMatrix { values, paper_standard: equal_ranks })
}

/// Spectral clustering of clients from their ρ matrix.
///
/// Gaussian affinity `exp(−ρ/σ̄)` with `σ̄` the median off-diagonal ρ,
/// symmetric normalized Laplacian, row-normalized bottom-`k` eigenvectors,
/// then k-means++ with 20 seeded restarts keeping the lowest inertia.
/// Labels are renumbered in order of first appearance.
pub fn spectral_cluster(rho: &RhoMatrix, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n = rho.len();
    ensure!(k >= 1, Input, "need at least one cluster");
    ensure!(k <= n, Input, "k = {k} exceeds the number of clients {n}");
    if k == n {
        return Ok((0..n).collect());
    }
    if k == 1 {
        return Ok(vec![0; n]);
    }

    let mut off: Vec<f64> = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| rho.get(i, j)).collect();
    off.sort_by(f64::total_cmp);
    let median = off[off.len() / 2];
    let bandwidth = if median > 0.0 { median } else { 1.0 };

    let affinity = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { (-rho.get(i, j) / bandwidth).exp() });
    let inv_sqrt_deg: Vec<f64> = affinity
        .row_iter()
        .map(|r| {
            let deg = r.sum();
            if deg > 0.0 { 1.0 / deg.sqrt() } else { 0.0 }
        })
        .collect();
    let lap = DMatrix::from_fn(n, n, |i, j| {
        let a = affinity[(i, j)] * inv_sqrt_deg[i] * inv_sqrt_deg[j];
        if i == j { 1.0 - a } else { -a }
    });
    let (_, vecs) = sym_eigen_desc(&symmetrize(&lap))?;
    let mut embed = vecs.columns(n - k, k).clone_owned();
    for mut row in embed.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    let points: Vec<Vec<f64>> = embed.row_iter().map(|r| r.iter().copied().collect()).collect();
    Ok(relabel(&kmeans(&points, k, seed, 20)))
}

fn relabel(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm with k-means++ seeding; best of `restarts` by inertia.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64, restarts: usize) -> Vec<usize> {
    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..restarts.max(1) {
        let mut rng = substream(seed, Stream::KMeans, restart as u64);
        let (inertia, labels) = lloyd(points, k, &mut rng);
        if best.as_ref().is_none_or(|(b, _)| inertia < *b) {
            best = Some((inertia, labels));
        }
    }
    best.map(|(_, l)| l).unwrap_or_default()
}

fn lloyd<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> (f64, Vec<usize>) {
    let n = points.len();
    let mut centers: Vec<Vec<f64>> = vec![points[rng.random_range(0..n)].clone()];
    while centers.len() < k {
        let d2: Vec<f64> = points
            .iter()
            .map(|p| centers.iter().map(|c| sq_dist(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(points[idx].clone());
    }

    let mut labels = vec![usize::MAX; n];
    for _ in 0..300 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let nearest = (0..k)
                .min_by(|&a, &b| sq_dist(p, &centers[a]).total_cmp(&sq_dist(p, &centers[b])))
                .unwrap();
            if labels[i] != nearest {
                labels[i] = nearest;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let dim = points[0].len();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            sums[l].iter_mut().zip(p).for_each(|(s, x)| *s += x);
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            } else {
                // re-seed an empty cluster at the point farthest from its center
                let far = (0..n)
                    .max_by(|&a, &b| {
                        sq_dist(&points[a], &centers[labels[a]]).total_cmp(&sq_dist(&points[b], &centers[labels[b]]))
                    })
                    .unwrap();
                centers[c] = points[far].clone();
            }
        }
    }
    let inertia = points.iter().zip(&labels).map(|(p, &l)| sq_dist(p, &centers[l])).sum();
    (inertia, labels)
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    ensure!(a.len() == b.len(), Input, "labelings have lengths {} and {}", a.len(), b.len());
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let c2 = |m: u64| (m * m.saturating_sub(1)) as f64 / 2.0;
    let sum_cells: f64 = table.iter().flatten().map(|&m| c2(m)).sum();
    let sum_rows: f64 = table.iter().map(|r| c2(r.iter().sum())).sum();
    let sum_cols: f64 = (0..kb).map(|j| c2(table.iter().map(|r| r[j]).sum())).sum();
    let total = c2(n as u64);
    let expected = if total > 0.0 { sum_rows * sum_cols / total } else { 0.0 };
    let max_index = (sum_rows + sum_cols) / 2.0;
    if max_index == expected {
        return Ok(1.0);
    }
    Ok((sum_cells - expected) / (max_index - expected))
}

/// `ℓ(θ) = θ² / (2 − θ + √((2 − θ)² − θ²))`, the arrowhead eigenvalue bound.
pub fn ell_theta<T: Real>(theta: T) -> Result<T> {
    ensure!(theta >= T::zero() && theta <= T::one(), Input, "θ = {theta} outside [0, 1]");
    let two = T::lit(2.0);
    let a = two - theta;
    Ok(theta * theta / (a + (a * a - theta * theta).max(T::zero()).sqrt()))
}

/// `Q = [[I + N·BBᵀ, 2√N·B], [2√N·Bᵀ, I + N·BᵀB]]` for an `m × Nm` block `B`.
pub fn arrowhead_matrix<T: Real>(b: &DMatrix<T>, n: usize) -> Result<DMatrix<T>> {
    ensure!(n >= 1, Input, "N must be positive");
    let m = b.nrows();
    ensure!(m >= 1 && b.ncols() == n * m, Dimension, "B must be m x N·m, got {}x{} with N={n}", b.nrows(), b.ncols());
    let nn = T::from_usize_lossy(n);
    let k = b.ncols();
    let mut q = DMatrix::<T>::identity(m + k, m + k);
    let mut tl = q.view_mut((0, 0), (m, m));
    tl += b * b.transpose() * nn;
    let off = b * (T::lit(2.0) * nn.sqrt());
    q.view_mut((0, m), (m, k)).copy_from(&off);
    q.view_mut((m, 0), (k, m)).copy_from(&off.transpose());
    let mut br = q.view_mut((m, m), (k, k));
    br += b.tr_mul(b) * nn;
    Ok(symmetrize(&q))
}

/// `(λ_min(Q), ℓ(θ))` with `θ = 1 − λ_max(N·BBᵀ)`.
pub fn arrowhead_min_eig<T: Real>(b: &DMatrix<T>, n: usize) -> Result<(T, T)> {
    arrowhead_min_eig_with(b, n, ell_theta)
}

/// As [`arrowhead_min_eig`] with a caller-supplied bound function.
pub fn arrowhead_min_eig_with<T: Real>(b: &DMatrix<T>, n: usize, bound: impl Fn(T) -> Result<T>) -> Result<(T, T)> {
    let q = arrowhead_matrix(b, n)?;
    let nbbt = symmetrize(&(b * b.transpose() * T::from_usize_lossy(n)));
    let top = lambda_max_sym(&nbbt)?;
    ensure!(top <= T::one() + T::lit(1e-10), Input, "λ_max(N·BBᵀ) = {top} exceeds 1");
    let theta = (T::one() - top).max(T::zero()).min(T::one());
    Ok((lambda_min_sym(&q)?, bound(theta)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Bounds<T> {
    pub lhs: T,
    pub upper: T,
    pub lower: T,
    pub theta: T,
}

/// Closeness of `(U, {V_i})` to a starred family in the direct-sum sense:
///
/// * `lhs   = Σ_i [r₁ + r₂ᵢ − ⟨P_U + P_Vi, P*_U + P*_Vi⟩]`
/// * `upper = N(r₁ − ⟨P*_U, P_U⟩) + Σ_i (r₂ᵢ − ⟨P*_Vi, P_Vi⟩)`
/// * `lower = (θ/2)·upper`, θ from the starred local frames.
pub fn lemma2_bounds<T: Real>(
    u: &OrthonormalFrame<T>,
    v: &[OrthonormalFrame<T>],
    u_star: &OrthonormalFrame<T>,
    v_star: &[OrthonormalFrame<T>],
) -> Result<Lemma2Bounds<T>> {
    ensure!(!v.is_empty() && v.len() == v_star.len(), Input, "need matching nonempty local families");
    ensure!(u.rank() == u_star.rank(), Input, "global ranks differ");
    let pu = u.projector();
    let pu_star = u_star.projector();
    let r1 = T::from_usize_lossy(u.rank());
    let n = T::from_usize_lossy(v.len());
    let mut lhs = T::zero();
    let mut local_gap = T::zero();
    for (i, (vi, vsi)) in v.iter().zip(v_star).enumerate() {
        ensure!(vi.rank() == vsi.rank(), Input, "local ranks differ for client {i}");
        let pv = vi.projector();
        let pvs = vsi.projector();
        let r2 = T::from_usize_lossy(vi.rank());
        lhs += r1 + r2 - frob_inner(&(&pu + &pv), &(&pu_star + &pvs));
        local_gap += r2 - frob_inner(&pvs, &pv);
    }
    let upper = n * (r1 - frob_inner(&pu_star, &pu)) + local_gap;
    let theta = crate::synth::theta_of(v_star)?;
    Ok(Lemma2Bounds { lhs, upper, lower: theta / T::lit(2.0) * upper, theta })
}
