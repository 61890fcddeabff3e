//! Experiment grids shared by the `bench` command and the acceptance suite.
//!
//! Every scenario is a pure function of its parameters and a base seed; the
//! repeat index `k` uses seed `base + k` for all of its draws.

use std::collections::BTreeMap;
use std::time::Instant;

use crate::baselines::{central_pca, distpca, indiv_pca, Stacking};
use crate::error::{ensure, Result};
use crate::metrics::{adjusted_rand_index, global_subspace_error, rho_matrix, spectral_cluster, subspace_error};
use crate::model::{
    covariance, kkt_residual, objective_f, reconstruction_error, reconstruction_error_from_cov, ClientDataset,
    ComponentState, CovarianceMatrix, GroundTruth,
};
use crate::rng::{substream, Stream};
use crate::solver::{run_perpca, Choice, Init, PerPcaSolver, SolverConfig, Stepsize};
use crate::stiefel::OrthonormalFrame;
use crate::synth::{generate_components, generate_observations, GenerativeSpec, LocalLayout, PlantedTruth};
use rand::Rng;

/// One scalar observed for one method at one grid point and one repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub method: &'static str,
    pub x: f64,
    pub metric: &'static str,
    pub repeat: usize,
    pub value: f64,
}

/// Raw measurements of one scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub scenario: &'static str,
    /// Name of the grid variable stored in [`Measurement::x`].
    pub param: &'static str,
    pub measurements: Vec<Measurement>,
    pub seconds: f64,
}

/// Aggregate over repeats, one per (method, grid point, metric).
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub scenario: &'static str,
    pub method: &'static str,
    pub param: &'static str,
    pub x: f64,
    pub metric: &'static str,
    pub mean: f64,
    pub std: f64,
    pub repeats: usize,
}

impl ScenarioRun {
    fn new(scenario: &'static str, param: &'static str) -> Self {
        ScenarioRun { scenario, param, measurements: Vec::new(), seconds: 0.0 }
    }

    fn push(&mut self, method: &'static str, x: f64, metric: &'static str, repeat: usize, value: f64) {
        self.measurements.push(Measurement { method, x, metric, repeat, value });
    }

    /// Values grouped by grid point, in ascending `x`.
    pub fn series(&self, method: &str, metric: &str) -> Vec<(f64, Vec<f64>)> {
        let mut by_x: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
        for m in self.measurements.iter().filter(|m| m.method == method && m.metric == metric) {
            by_x.entry(order_key(m.x)).or_insert((m.x, Vec::new())).1.push(m.value);
        }
        by_x.into_values().collect()
    }

    /// Mean per grid point.
    pub fn means(&self, method: &str, metric: &str) -> Vec<(f64, f64)> {
        self.series(method, metric).into_iter().map(|(x, v)| (x, mean(&v))).collect()
    }

    /// Median per grid point.
    pub fn medians(&self, method: &str, metric: &str) -> Vec<(f64, f64)> {
        self.series(method, metric).into_iter().map(|(x, v)| (x, median(&v))).collect()
    }

    /// Least-squares slope of `ln(mean)` against `ln(x)`.
    pub fn loglog_slope(&self, method: &str, metric: &str) -> f64 {
        let pts: Vec<(f64, f64)> = self.means(method, metric).into_iter().map(|(x, y)| (x.ln(), y.ln())).collect();
        linear_fit(&pts).map_or(f64::NAN, |f| f.slope)
    }

    pub fn rows(&self) -> Vec<BenchRow> {
        let mut keys: Vec<(&'static str, &'static str)> = Vec::new();
        for m in &self.measurements {
            if !keys.contains(&(m.method, m.metric)) {
                keys.push((m.method, m.metric));
            }
        }
        let mut rows = Vec::new();
        for (method, metric) in keys {
            for (x, v) in self.series(method, metric) {
                rows.push(BenchRow {
                    scenario: self.scenario,
                    method,
                    param: self.param,
                    x,
                    metric,
                    mean: mean(&v),
                    std: std_dev(&v),
                    repeats: v.len(),
                });
            }
        }
        rows
    }
}

fn order_key(x: f64) -> u64 {
    // Monotone map from finite f64 to u64 for ordered grouping.
    let b = x.to_bits();
    if b >> 63 == 1 { !b } else { b | (1 << 63) }
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation; zero for fewer than two values.
pub fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y ≈ a + b x`; `None` with fewer than two distinct `x`.
pub fn linear_fit(points: &[(f64, f64)]) -> Option<LinearFit> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit { slope, intercept: my - slope * mx, r_squared })
}

/// `f* − f` for noiseless data: half the summed per-client reconstruction error.
pub fn optimality_gap(data: &[ClientDataset<f64>], state: &ComponentState<f64>) -> Result<f64> {
    let mut gap = 0.0;
    for (y, v) in data.iter().zip(&state.local) {
        gap += reconstruction_error(y, &state.global, v)?;
    }
    Ok(0.5 * gap)
}

/// Per-round decay rate of `ln gap` over the rounds whose gap lies in `(lo, hi)`.
pub fn linear_rate(gaps: &[f64], lo: f64, hi: f64) -> Option<LinearFit> {
    let pts: Vec<(f64, f64)> = gaps
        .iter()
        .enumerate()
        .filter(|(_, &g)| g > lo && g < hi)
        .map(|(r, g)| (r as f64, g.ln()))
        .collect();
    if pts.len() < 10 {
        return None;
    }
    linear_fit(&pts)
}

struct Instance {
    truth: PlantedTruth<f64>,
    data: Vec<ClientDataset<f64>>,
    covs: Vec<CovarianceMatrix<f64>>,
}

impl Instance {
    fn new(spec: &GenerativeSpec) -> Result<Self> {
        let truth = generate_components(spec)?;
        let data = generate_observations(&truth, spec)?;
        let covs = data.iter().map(covariance).collect::<Result<Vec<_>>>()?;
        Ok(Instance { truth, data, covs })
    }

    fn ground_truth(&self) -> GroundTruth<f64> {
        self.truth.ground_truth()
    }
}

/// Iterates until the total KKT residual, checked every `every` rounds, drops
/// to `tol`, or `max_rounds` is reached. Returns the state and rounds used.
pub fn fit_to_tolerance(
    covs: &[CovarianceMatrix<f64>],
    config: SolverConfig<f64>,
    tol: f64,
    every: usize,
    max_rounds: usize,
) -> Result<(ComponentState<f64>, usize)> {
    let mut solver = PerPcaSolver::new(covs, config)?;
    while solver.round() < max_rounds {
        solver.step()?;
        if solver.round() % every.max(1) == 0 && kkt_residual(solver.state(), covs)?.total() <= tol {
            break;
        }
    }
    let rounds = solver.round();
    Ok((solver.into_state(), rounds))
}

/// Two-group heterogeneous setup: `N` clients, the first half with `n`
/// observations and the rest with `n/10`; local score variance 100× the global.
pub fn heterogeneous_spec(d: usize, n_clients: usize, r2: usize, n: usize, seed: u64) -> GenerativeSpec {
    let mut spec = GenerativeSpec::new(d, n_clients, 2, r2, n);
    for k in n_clients / 2..n_clients {
        spec.n_per_client[k] = (n / 10).max(1);
    }
    spec.global_score_std = 1.0;
    spec.local_score_std = 10.0;
    spec.noise_std = HETEROGENEOUS_NOISE_STD;
    spec.seed = seed;
    spec
}

pub const HETEROGENEOUS_NOISE_STD: f64 = 0.5;

/// Stepsize `κ / G_max` independent of rank, for the statistical-error grids.
pub const GRID_STEP_KAPPA: f64 = 1.4;
pub const GRID_KKT_TOL: f64 = 1e-6;
pub const GRID_MAX_ROUNDS: usize = 40_000;

/// Solver settings for the statistical-error grids: large constant step,
/// unweighted distPCA start, run to stationarity.
pub fn grid_config(r1: usize, r2: usize, seed: u64) -> SolverConfig<f64> {
    let r = r1.max(r2) as f64;
    let mut cfg = SolverConfig::new(r1, r2)
        .stepsize(Stepsize::Auto { c: GRID_STEP_KAPPA * r.sqrt() })
        .seed(seed)
        .record_trace(false);
    cfg.init_stacking = Stacking::Unweighted;
    cfg
}

fn statistical_point(run: &mut ScenarioRun, x: f64, spec: &GenerativeSpec, repeat: usize) -> Result<()> {
    let inst = Instance::new(spec)?;
    let gt = inst.ground_truth();
    let r2 = vec![spec.r2; spec.n_clients];
    let (state, rounds) = fit_to_tolerance(
        &inst.covs,
        grid_config(spec.r1, spec.r2, spec.seed),
        GRID_KKT_TOL,
        10,
        GRID_MAX_ROUNDS,
    )?;
    run.push("perpca", x, "subspace_error", repeat, subspace_error(&state, &gt)?);
    run.push("perpca", x, "global_error", repeat, global_subspace_error(&state, &gt)?);
    run.push("perpca", x, "rounds", repeat, rounds as f64);
    let dp = distpca(&inst.covs, spec.r1, &r2, Stacking::default())?;
    run.push("distpca", x, "subspace_error", repeat, subspace_error(&dp, &gt)?);
    run.push("distpca", x, "global_error", repeat, global_subspace_error(&dp, &gt)?);
    Ok(())
}

/// Subspace error against observations per client (d = 15, r2 = 10).
pub fn error_vs_n(grid: &[usize], repeats: usize, seed: u64) -> Result<ScenarioRun> {
    let start = Instant::now();
    let mut run = ScenarioRun::new("error-vs-n", "n");
    for &n in grid {
        for k in 0..repeats {
            let spec = heterogeneous_spec(15, 100, 10, n, seed + k as u64);
            statistical_point(&mut run, n as f64, &spec, k)?;
        }
    }
    run.seconds = start.elapsed().as_secs_f64();
    Ok(run)
}

/// Subspace error against dimension at n = 10⁴, with `r2 = d/2`.
pub fn error_vs_d(grid: &[usize], repeats: usize, seed: u64) -> Result<ScenarioRun> {
    let start = Instant::now();
    let mut run = ScenarioRun::new("error-vs-d", "d");
    for &d in grid {
        ensure!(d >= 6, Input, "error-vs-d needs d >= 6, got {d}");
        for k in 0..repeats {
            let spec = heterogeneous_spec(d, 100, d / 2, 10_000, seed + k as u64);
            statistical_point(&mut run, d as f64, &spec, k)?;
        }
    }
    run.seconds = start.elapsed().as_secs_f64();
    Ok(run)
}

/// Subspace error against the number of clients (d = 15, n = 10⁴).
pub fn error_vs_clients(grid: &[usize], repeats: usize, seed: u64) -> Result<ScenarioRun> {
    let start = Instant::now();
    let mut run = ScenarioRun::new("error-vs-N", "N");
    for &n_clients in grid {
        ensure!(n_clients >= 2, Input, "error-vs-N needs at least two clients");
        for k in 0..repeats {
            let spec = heterogeneous_spec(15, n_clients, 10, 10_000, seed + k as u64);
            statistical_point(&mut run, n_clients as f64, &spec, k)?;
        }
    }
    run.seconds = start.elapsed().as_secs_f64();
    Ok(run)
}

/// Window of `f* − f` used to fit the linear rate: above the rounding floor,
/// below the initial transient.
pub const RATE_WINDOW: (f64, f64) = (1e-24, 1e-3);

/// Convergence speed against heterogeneity θ: two clients in d = 3 with one
/// global and one local direction, matched unit spectra, noiseless, random init.
pub fn theta_sweep(thetas: &[f64], repeats: usize, rounds: usize, seed: u64) -> Result<ScenarioRun> {
    let start = Instant::now();
    let mut run = ScenarioRun::new("theta-sweep", "theta");
    for &theta in thetas {
        for k in 0..repeats {
            let mut spec = GenerativeSpec::new(3, 2, 1, 1, 1000);
            spec.local_score_std = 1.0;
            spec.theta_target = Some(theta);
            spec.seed = seed + k as u64;
            let inst = Instance::new(&spec)?;
            let cfg = SolverConfig::new(1, 1).init(Init::Random).seed(spec.seed).record_trace(false);
            let mut solver = PerPcaSolver::new(&inst.covs, cfg)?;
            let mut gaps = vec![optimality_gap(&inst.data, solver.state())?];
            for _ in 0..rounds {
                solver.step()?;
                gaps.push(optimality_gap(&inst.data, solver.state())?);
            }
            let rate = linear_rate(&gaps, RATE_WINDOW.0, RATE_WINDOW.1).map_or(f64::NAN, |f| f.slope);
            run.push("perpca", theta, "rate", k, rate);
            run.push("perpca", theta, "log_error_100", k, gaps[rounds.min(100)].max(f64::MIN_POSITIVE).ln());
            run.push("perpca", theta, "theta_actual", k, inst.truth.theta_actual);
        }
    }
    run.seconds = start.elapsed().as_secs_f64();
    Ok(run)
}

fn split_frame(f: &OrthonormalFrame<f64>, r1: usize) -> Result<(OrthonormalFrame<f64>, OrthonormalFrame<f64>)> {
    let m = f.matrix();
    Ok((
        OrthonormalFrame::from_matrix(m.columns(0, r1).clone_owned())?,
        OrthonormalFrame::from_matrix(m.columns(r1, m.ncols() - r1).clone_owned())?,
    ))
}

pub const SHARING_NOISE_STD: f64 = 0.3;

/// Held-out reconstruction error per client group (§ knowledge sharing):
/// d = 15, r1 = 2, r2 = 10, `N` clients, half with `n` and half with `n/10`
/// training observations, and an independent test sample of the same size.
pub fn knowledge_sharing(n_clients: usize, n: usize, repeats: usize, seed: u64) -> Result<ScenarioRun> {
    let start = Instant::now();
    let mut run = ScenarioRun::new("knowledge-sharing", "n");
    let (r1, r2) = (2, 10);
    for k in 0..repeats {
        let mut spec = heterogeneous_spec(15, n_clients, r2, n, seed + k as u64);
        spec.local_score_std = 1.0;
        spec.noise_std = SHARING_NOISE_STD;
        let inst = Instance::new(&spec)?;
        let mut test_spec = spec.clone();
        test_spec.seed = substream(spec.seed, Stream::Split, 0).random();
        let test = generate_observations(&inst.truth, &test_spec)?
            .iter()
            .map(covariance)
            .collect::<Result<Vec<_>>>()?;

        let (perpca, _) = fit_to_tolerance(&inst.covs, grid_config(r1, r2, spec.seed), 1e-8, 10, 5000)?;
        let dp = distpca(&inst.covs, r1, &vec![r2; n_clients], Stacking::default())?;
        let indiv = indiv_pca(&inst.covs, r1 + r2)?
            .iter()
            .map(|f| split_frame(f, r1))
            .collect::<Result<Vec<_>>>()?;
        let central = split_frame(&central_pca(&inst.covs, r1 + r2)?, r1)?;

        let rich = n_clients / 2;
        for (group, range) in [("test_error_rich", 0..rich), ("test_error_sparse", rich..n_clients)] {
            let size = range.len() as f64;
            let mut acc = [0.0; 5];
            for i in range {
                let s = &test[i];
                acc[0] += reconstruction_error_from_cov(s, &perpca.global, &perpca.local[i]);
                acc[1] += reconstruction_error_from_cov(s, &indiv[i].0, &indiv[i].1);
                acc[2] += reconstruction_error_from_cov(s, &dp.global, &dp.local[i]);
                acc[3] += reconstruction_error_from_cov(s, &central.0, &central.1);
                acc[4] += reconstruction_error_from_cov(s, &inst.truth.global, &inst.truth.local[i]);
            }
            for (method, v) in ["perpca", "indivpca", "distpca", "cpca", "truth"].into_iter().zip(acc) {
                run.push(method, n as f64, group, k, v / size);
            }
        }
    }
    run.seconds = start.elapsed().as_secs_f64();
    Ok(run)
}

/// Spectral clustering of clients on the ρ matrix after `rounds` rounds:
/// `groups` planted groups of `per_group` clients sharing local subspaces.
pub fn clustering(groups: usize, per_group: usize, rounds: usize, repeats: usize, seed: u64) -> Result<ScenarioRun> {
    let start = Instant::now();
    let mut run = ScenarioRun::new("clustering", "rounds");
    let labels: Vec<usize> = (0..groups * per_group).map(|i| i / per_group).collect();
    for k in 0..repeats {
        let mut spec = GenerativeSpec::new(15, labels.len(), 2, 3, 100);
        spec.layout = LocalLayout::Groups(labels.clone());
        spec.local_score_std = 2.0;
        spec.noise_std = 1.0;
        spec.seed = seed + k as u64;
        let inst = Instance::new(&spec)?;
        let cfg = SolverConfig::new(2, 3).rounds(rounds).seed(spec.seed).record_trace(false);
        let fit = run_perpca(&inst.covs, cfg, None)?;
        let pred = spectral_cluster(&rho_matrix(&fit.state.local)?, groups, spec.seed)?;
        run.push("perpca", rounds as f64, "ari", k, adjusted_rand_index(&pred, &labels)?);
    }
    run.seconds = start.elapsed().as_secs_f64();
    Ok(run)
}

/// Noiseless identifiable instances (d = 15, N = 5, r1 = 2, r2 = 3) from the
/// distPCA start: final error, rounds to 1e-8, linearity of `ln(f* − f)` over
/// the last `tail` rounds, and agreement between the two client updates.
pub fn exact_recovery(rounds: usize, tail: usize, repeats: usize, seed: u64) -> Result<ScenarioRun> {
    let start = Instant::now();
    let mut run = ScenarioRun::new("exact-recovery", "rounds");
    let x = rounds as f64;
    for k in 0..repeats {
        let mut spec = GenerativeSpec::new(15, 5, 2, 3, 500);
        spec.local_score_std = 1.5;
        spec.seed = seed + k as u64;
        let inst = Instance::new(&spec)?;
        let gt = inst.ground_truth();
        run.push("perpca", x, "theta", k, inst.truth.theta_actual);

        let t0 = Instant::now();
        let cfg = SolverConfig::new(2, 3).seed(spec.seed).record_trace(false);
        let mut solver = PerPcaSolver::new(&inst.covs, cfg.clone())?;
        let mut gaps = Vec::with_capacity(rounds);
        let mut hit = f64::NAN;
        while solver.round() < rounds {
            solver.step()?;
            gaps.push(optimality_gap(&inst.data, solver.state())?);
            if hit.is_nan() && subspace_error(solver.state(), &gt)? < 1e-8 {
                hit = solver.round() as f64;
            }
        }
        run.push("perpca", x, "seconds", k, t0.elapsed().as_secs_f64());
        let one = solver.into_state();
        run.push("perpca", x, "subspace_error", k, subspace_error(&one, &gt)?);
        run.push("perpca", x, "rounds_to_1e-8", k, hit);
        let tail_pts: Vec<(f64, f64)> = gaps[gaps.len().saturating_sub(tail)..]
            .iter()
            .enumerate()
            .map(|(r, g)| (r as f64, g.ln()))
            .collect();
        let fit = linear_fit(&tail_pts);
        run.push("perpca", x, "tail_r_squared", k, fit.map_or(f64::NAN, |f| f.r_squared));
        run.push("perpca", x, "tail_slope", k, fit.map_or(f64::NAN, |f| f.slope));

        let two = run_perpca(&inst.covs, cfg.rounds(rounds).choice(Choice::Two), None)?.state;
        let other = GroundTruth { global: two.global.clone(), local: two.local.clone() };
        run.push("perpca", x, "choice_gap", k, subspace_error(&one, &other)?);
        run.push("perpca-choice2", x, "subspace_error", k, subspace_error(&two, &gt)?);
    }
    run.seconds = start.elapsed().as_secs_f64();
    Ok(run)
}

fn noisy_spec(seed: u64) -> GenerativeSpec {
    let mut spec = GenerativeSpec::new(10, 4, 2, 2, 200);
    spec.local_score_std = 2.0;
    spec.noise_std = 0.5;
    spec.seed = seed;
    spec
}

/// Minimum-so-far KKT residual at each checkpoint, from random init on
/// noisy instances (d = 10, N = 4, r1 = r2 = 2).
pub fn stationarity(checkpoints: &[usize], repeats: usize, seed: u64) -> Result<ScenarioRun> {
    let start = Instant::now();
    let mut run = ScenarioRun::new("stationarity", "rounds");
    let last = checkpoints.iter().copied().max().unwrap_or(0);
    for k in 0..repeats {
        let spec = noisy_spec(seed + k as u64);
        let inst = Instance::new(&spec)?;
        let cfg = SolverConfig::new(2, 2).init(Init::Random).seed(spec.seed).record_trace(false);
        let mut solver = PerPcaSolver::new(&inst.covs, cfg)?;
        let mut best = f64::INFINITY;
        while solver.round() < last {
            solver.step()?;
            best = best.min(kkt_residual(solver.state(), &inst.covs)?.total());
            if checkpoints.contains(&solver.round()) {
                run.push("perpca", solver.round() as f64, "min_kkt", k, best);
            }
        }
    }
    run.seconds = start.elapsed().as_secs_f64();
    Ok(run)
}

/// Largest per-round decrease of the objective under Choice 1 with the
/// automatic stepsize (non-positive means monotone ascent).
pub fn ascent(rounds: usize, repeats: usize, seed: u64) -> Result<ScenarioRun> {
    let start = Instant::now();
    let mut run = ScenarioRun::new("ascent", "rounds");
    for k in 0..repeats {
        let spec = noisy_spec(seed + k as u64);
        let inst = Instance::new(&spec)?;
        let cfg = SolverConfig::new(2, 2).init(Init::Random).seed(spec.seed).rounds(rounds);
        let solver = PerPcaSolver::new(&inst.covs, cfg)?;
        let mut prev = objective_f(solver.state(), &inst.covs)?;
        let mut worst = f64::NEG_INFINITY;
        for t in solver.run(None)?.trace {
            worst = worst.max(prev - t.objective);
            prev = t.objective;
        }
        run.push("perpca", rounds as f64, "max_decrease", k, worst);
    }
    run.seconds = start.elapsed().as_secs_f64();
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_fit_recovers_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 - 0.5 * i as f64)).collect();
        let f = linear_fit(&pts).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14);
        assert!((f.intercept - 2.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
        assert!(linear_fit(&[(1.0, 2.0), (1.0, 3.0)]).is_none());
    }

    #[test]
    fn summary_statistics() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!((std_dev(&[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-15);
        assert_eq!(std_dev(&[5.0]), 0.0);
    }

    #[test]
    fn linear_rate_uses_window() {
        let gaps: Vec<f64> = (0..60).map(|r| (-0.5 * r as f64).exp()).collect();
        let f = linear_rate(&gaps, 1e-12, 1e-2).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-12);
        assert!(linear_rate(&gaps[..5], 1e-12, 1.0).is_none());
    }

    #[test]
    fn rows_group_by_point() {
        let mut run = ScenarioRun::new("s", "n");
        for (x, v) in [(10.0, 1.0), (2.0, 4.0), (10.0, 3.0)] {
            run.push("m", x, "e", 0, v);
        }
        let rows = run.rows();
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[0].x, rows[0].mean, rows[0].repeats), (2.0, 4.0, 1));
        assert_eq!((rows[1].x, rows[1].mean, rows[1].repeats), (10.0, 2.0, 2));
        let mut exact = ScenarioRun::new("s", "n");
        for (x, v) in [(1.0, 1.0), (10.0, 100.0)] {
            exact.push("m", x, "e", 0, v);
        }
        assert!((exact.loglog_slope("m", "e") - 2.0).abs() < 1e-12);
    }

    #[test]
    fn small_grids_run() {
        let run = exact_recovery(40, 10, 1, 2).unwrap();
        assert_eq!(run.series("perpca", "tail_r_squared").len(), 1);
        let run = theta_sweep(&[0.3], 1, 120, 1).unwrap();
        assert!(run.means("perpca", "rate")[0].1 < 0.0);
        let run = clustering(2, 3, 5, 1, 0).unwrap();
        assert_eq!(run.measurements.len(), 1);
        let run = stationarity(&[5, 10], 1, 0).unwrap();
        let m = run.means("perpca", "min_kkt");
        assert!(m[1].1 <= m[0].1);
    }
}
