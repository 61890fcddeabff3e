//! Randomized verification suites for the retraction axioms and the two
//! spectral lemmas the convergence theory rests on. Each trial draws from
//! its own substream, so suites are deterministic and run in parallel.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ensure, Result};
use crate::linalg::lambda_max_sym;
use crate::metrics::{arrowhead_min_eig_with, ell_theta, lemma2_bounds};
use crate::rng::{gaussian_matrix, substream, Stream};
use crate::stiefel::{project_tangent, subspace_distance, OrthonormalFrame, Retraction};

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub trials: usize,
    pub violations: usize,
    /// Suite-specific worst-case figure, described by `detail`.
    pub worst: f64,
    pub detail: String,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

impl std::fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:<12} {} ({} violations / {} trials; {})",
            self.name,
            if self.passed() { "PASS" } else { "FAIL" },
            self.violations,
            self.trials,
            self.detail
        )
    }
}

fn random_frame<R: Rng>(rng: &mut R, d: usize, r: usize) -> Result<OrthonormalFrame<f64>> {
    OrthonormalFrame::orthonormalize(&gaussian_matrix(rng, d, r))
}

/// Orthonormal `r`-frame orthogonal to `u`.
fn random_frame_perp<R: Rng>(rng: &mut R, u: &OrthonormalFrame<f64>, r: usize) -> Result<OrthonormalFrame<f64>> {
    let g: DMatrix<f64> = gaussian_matrix(rng, u.dim(), r);
    let mut w = &g - u.matrix() * u.matrix().tr_mul(&g);
    w -= u.matrix() * u.matrix().tr_mul(&w);
    OrthonormalFrame::orthonormalize(&w)
}

struct RetractionTrial {
    col_dist: f64,
    slope: f64,
}

fn retraction_trial(kind: Retraction, seed: u64, trial: u64) -> Result<RetractionTrial> {
    let mut rng = substream(seed, Stream::Verify, trial);
    let d = rng.random_range(2..=10);
    let r = rng.random_range(1..=d);
    let u = random_frame(&mut rng, d, r)?;

    // column space of GR(U; ξ) equals col(U + ξ) for a generic full-rank update
    let xi: DMatrix<f64> = gaussian_matrix::<f64, _>(&mut rng, d, r) * 0.5;
    let w = kind.retract(&u, &xi, 1e-12)?;
    let target = OrthonormalFrame::orthonormalize(&(u.matrix() + &xi))?;
    let col_dist = subspace_distance(&w, &target)?.sqrt();

    // tangent residual ‖GR(U; tξ) − (U + tξ)‖ scales as t²
    let dir = project_tangent(&u, &gaussian_matrix(&mut rng, d, r))?;
    let dir = &dir / dir.norm();
    let resid = |t: f64| -> Result<f64> {
        let step = &dir * t;
        Ok((kind.retract(&u, &step, 1e-14)?.matrix() - (u.matrix() + &step)).norm())
    };
    let (t1, t2) = (2e-3, 2e-4);
    let slope = (resid(t1)? / resid(t2)?).ln() / (t1 / t2).ln();
    Ok(RetractionTrial { col_dist, slope })
}

/// Column-space preservation (< 1e-8 projector distance) and second-order
/// tangent residual (log-log slope in [1.9, 2.1]) for one retraction.
pub fn retraction_suite(kind: Retraction, trials: usize, seed: u64) -> Result<SuiteReport> {
    let results: Vec<RetractionTrial> = (0..trials as u64)
        .into_par_iter()
        .map(|t| retraction_trial(kind, seed, t))
        .collect::<Result<_>>()?;
    let mut violations = 0;
    let mut worst_dist = 0.0f64;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in &results {
        if !(t.col_dist < 1e-8 && (1.9..=2.1).contains(&t.slope)) {
            violations += 1;
        }
        worst_dist = worst_dist.max(t.col_dist);
        lo = lo.min(t.slope);
        hi = hi.max(t.slope);
    }
    let name = match kind {
        Retraction::Polar => "retr-polar",
        Retraction::Qr => "retr-qr",
    };
    Ok(SuiteReport {
        name: name.into(),
        trials,
        violations,
        worst: worst_dist,
        detail: format!("max column-space distance {worst_dist:.2e}, residual slopes in [{lo:.4}, {hi:.4}]"),
    })
}

/// Random `m × N·m` block with `λ_max(N·BBᵀ) = 1 − θ`.
pub fn random_arrowhead_block<R: Rng>(rng: &mut R, m: usize, n: usize, theta: f64) -> Result<DMatrix<f64>> {
    let b: DMatrix<f64> = gaussian_matrix(rng, m, n * m);
    let top = lambda_max_sym(&(&b * b.transpose() * n as f64))?;
    Ok(b * ((1.0 - theta) / top).sqrt())
}

/// `λ_min(Q) ≥ bound(θ) − 1e-10` on random θ-block-arrowhead matrices
/// (`rd ≤ 12`, `N ≤ 6`, θ ∈ {0.1, …, 0.9}), plus slack below 1e-9 at the
/// tight scalar configuration.
pub fn arrowhead_suite_with<F>(trials: usize, seed: u64, bound: F) -> Result<SuiteReport>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let margins: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(seed, Stream::Verify, t);
            let m = rng.random_range(1..=12);
            let n = rng.random_range(1..=6);
            let theta = rng.random_range(1..=9) as f64 / 10.0;
            let b = random_arrowhead_block(&mut rng, m, n, theta)?;
            let (lmin, ell) = arrowhead_min_eig_with(&b, n, &bound)?;
            Ok(lmin - ell)
        })
        .collect::<Result<_>>()?;
    let mut violations = margins.iter().filter(|&&m| m < -1e-10).count();
    let worst_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);

    let mut tight_slack = 0.0f64;
    for k in 1..=9 {
        let theta = k as f64 / 10.0;
        let b = DMatrix::from_element(1, 1, (1.0 - theta).sqrt());
        let (lmin, ell) = arrowhead_min_eig_with(&b, 1, &bound)?;
        tight_slack = tight_slack.max((lmin - ell).abs());
    }
    if tight_slack >= 1e-9 {
        violations += 1;
    }
    Ok(SuiteReport {
        name: "arrowhead".into(),
        trials,
        violations,
        worst: worst_margin,
        detail: format!("min λ_min − ℓ(θ) = {worst_margin:.3e}, tight-case slack {tight_slack:.2e}"),
    })
}

pub fn arrowhead_suite(trials: usize, seed: u64) -> Result<SuiteReport> {
    arrowhead_suite_with(trials, seed, ell_theta)
}

struct Lemma2Trial {
    lower_gap: f64,
    upper_gap: f64,
}

fn lemma2_trial(seed: u64, trial: u64) -> Result<Option<Lemma2Trial>> {
    let mut rng = substream(seed, Stream::Verify, trial);
    let d = rng.random_range(4..=12);
    let n = rng.random_range(2..=5);
    // r2 < d − r1 keeps random local families identifiable (θ > 0)
    let r1 = rng.random_range(1..=d - 2);
    let r2 = rng.random_range(1..=(d - r1 - 1).min(3));
    let u_star = random_frame(&mut rng, d, r1)?;
    let v_star: Vec<_> = (0..n).map(|_| random_frame_perp(&mut rng, &u_star, r2)).collect::<Result<_>>()?;

    // half the trials draw an unrelated family, half a small perturbation of the starred one
    let (u, v) = if trial % 2 == 0 {
        let u = random_frame(&mut rng, d, r1)?;
        let v = (0..n).map(|_| random_frame_perp(&mut rng, &u, r2)).collect::<Result<Vec<_>>>()?;
        (u, v)
    } else {
        let scale = 10f64.powf(-rng.random_range(1.0..4.0));
        let u = Retraction::Polar.retract(&u_star, &(gaussian_matrix::<f64, _>(&mut rng, d, r1) * scale), 1e-12)?;
        let v = v_star
            .iter()
            .map(|vs| {
                let moved = Retraction::Polar.retract(vs, &(gaussian_matrix::<f64, _>(&mut rng, d, r2) * scale), 1e-12)?;
                let w = moved.matrix() - u.matrix() * u.matrix().tr_mul(moved.matrix());
                OrthonormalFrame::orthonormalize(&w)
            })
            .collect::<Result<Vec<_>>>()?;
        (u, v)
    };
    let b = lemma2_bounds(&u, &v, &u_star, &v_star)?;
    if b.theta <= 1e-6 {
        return Ok(None);
    }
    Ok(Some(Lemma2Trial { lower_gap: b.lhs - b.lower, upper_gap: b.upper - b.lhs }))
}

/// `lower ≤ lhs ≤ upper` within 1e-10 on `trials` random feasible projector
/// families with θ > 0; draws with θ ≈ 0 are replaced by fresh ones.
pub fn lemma2_suite(trials: usize, seed: u64) -> Result<SuiteReport> {
    let mut kept: Vec<Lemma2Trial> = Vec::with_capacity(trials);
    let mut drawn = 0u64;
    while kept.len() < trials {
        ensure!(drawn < 20 * trials.max(1) as u64, Input, "too many degenerate lemma 2 draws");
        let batch = (trials - kept.len()) as u64;
        let results: Vec<Option<Lemma2Trial>> = (drawn..drawn + batch)
            .into_par_iter()
            .map(|t| lemma2_trial(seed, t))
            .collect::<Result<_>>()?;
        kept.extend(results.into_iter().flatten());
        drawn += batch;
    }
    let violations = kept.iter().filter(|t| t.lower_gap < -1e-10 || t.upper_gap < -1e-10).count();
    let worst = kept.iter().map(|t| t.lower_gap.min(t.upper_gap)).fold(f64::INFINITY, f64::min);
    Ok(SuiteReport {
        name: "lemma2".into(),
        trials: kept.len(),
        violations,
        worst,
        detail: format!("smallest bracket margin {worst:.3e}, {} degenerate draws replaced", drawn as usize - kept.len()),
    })
}

/// Every suite at its default size, in a fixed order.
pub fn run_all(seed: u64) -> Result<Vec<SuiteReport>> {
    Ok(vec![
        retraction_suite(Retraction::Polar, 1000, seed)?,
        retraction_suite(Retraction::Qr, 1000, seed)?,
        arrowhead_suite(1000, seed)?,
        lemma2_suite(500, seed)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        for kind in [Retraction::Polar, Retraction::Qr] {
            let r = retraction_suite(kind, 50, 1).unwrap();
            assert!(r.passed(), "{r}");
        }
        assert!(arrowhead_suite(100, 1).unwrap().passed());
        let l = lemma2_suite(100, 1).unwrap();
        assert!(l.passed(), "{l}");
        assert_eq!(l.trials, 100);
    }

    #[test]
    fn inflated_bound_is_caught() {
        let r = arrowhead_suite_with(50, 2, |t| Ok(ell_theta(t)? * 1.5 + 1e-3)).unwrap();
        assert!(!r.passed());
        assert_eq!(r.name, "arrowhead");
    }

    #[test]
    fn arrowhead_block_has_requested_theta() {
        let mut rng = substream(3, Stream::Verify, 0);
        let b = random_arrowhead_block(&mut rng, 4, 3, 0.3).unwrap();
        let top = lambda_max_sym(&(&b * b.transpose() * 3.0)).unwrap();
        assert!((top - 0.7).abs() < 1e-12);
    }
}
