//! Acceptance suite: one PASS/FAIL line per criterion and a closing summary.
//!
//! Runs sequentially (no libtest harness) so the long statistical grids do not
//! compete for cores with each other. `ACCEPTANCE_ONLY=3,4` runs a subset.
//! Failures are reported but only fail the process with `ACCEPTANCE_STRICT=1`,
//! so one statistical miss does not stop the rest of `cargo test`.

use std::process::ExitCode;
use std::time::Instant;

use perpca::scenarios::{self, median, ScenarioRun};
use perpca::stiefel::Retraction;
use perpca::verify;
use perpca::Result;

const SEED: u64 = 2024;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn exact_recovery() -> Result<ScenarioRun> {
    scenarios::exact_recovery(500, 200, 10, SEED)
}

fn c1_exact_recovery(run: &ScenarioRun) -> Result<Outcome> {
    let col = |metric: &str| run.series("perpca", metric).remove(0).1;
    let (theta, err, r2, secs, hit) = (col("theta"), col("subspace_error"), col("tail_r_squared"), col("seconds"), col("rounds_to_1e-8"));
    let mut bad = Vec::new();
    for k in 0..err.len() {
        let ok = theta[k] >= 0.1 && err[k] < 1e-8 && hit[k] <= 500.0 && r2[k] > 0.98 && secs[k] < 30.0;
        if !ok {
            bad.push(format!("seed {k}: θ={:.3} err={:.1e} R²={:.4} t={:.1}s", theta[k], err[k], r2[k], secs[k]));
        }
    }
    let worst = |v: &[f64], min: bool| v.iter().copied().fold(if min { f64::INFINITY } else { 0.0 }, if min { f64::min } else { f64::max });
    outcome(
        bad.is_empty(),
        format!(
            "{}/{} instances; max err {:.1e}, max rounds to 1e-8 {}, min tail R² {:.4}, min θ {:.3}, max {:.2}s{}",
            err.len() - bad.len(),
            err.len(),
            worst(&err, false),
            worst(&hit, false),
            worst(&r2, true),
            worst(&theta, true),
            worst(&secs, false),
            if bad.is_empty() { String::new() } else { format!("; failing: {}", bad.join("; ")) }
        ),
    )
}

fn c2_theta_monotone() -> Result<Outcome> {
    let run = scenarios::theta_sweep(&[0.05, 0.1, 0.2, 0.3], 10, 400, SEED)?;
    let rates = run.medians("perpca", "rate");
    let slopes: Vec<f64> = rates.iter().map(|p| p.1).collect();
    let monotone = slopes.iter().all(|s| s.is_finite()) && slopes.windows(2).all(|w| w[1] < w[0]);
    outcome(monotone, format!("median ln-gap slope per round at θ = 0.05, 0.1, 0.2, 0.3: {}", fmt_list(&slopes)))
}

fn c3_consistency() -> Result<Outcome> {
    let run = scenarios::error_vs_n(&[200, 800, 3200, 12800], 3, SEED)?;
    let ours = run.loglog_slope("perpca", "subspace_error");
    let dist = run.loglog_slope("distpca", "subspace_error");
    let errs: Vec<f64> = run.means("perpca", "subspace_error").iter().map(|p| p.1).collect();
    let ok = (-1.25..=-0.75).contains(&ours) && (-0.15..=0.15).contains(&dist) && run.seconds < 300.0;
    outcome(
        ok,
        format!("PerPCA slope {ours:.3} (errors {}), distPCA slope {dist:.3}, {:.0}s", fmt_list(&errs), run.seconds),
    )
}

fn c4_dimension() -> Result<Outcome> {
    let run = scenarios::error_vs_d(&[10, 20, 40, 80], 5, SEED)?;
    let slope = run.loglog_slope("perpca", "subspace_error");
    let errs: Vec<f64> = run.means("perpca", "subspace_error").iter().map(|p| p.1).collect();
    outcome(
        (1.5..=2.5).contains(&slope),
        format!("PerPCA slope {slope:.3} over d = 10..80 (errors {}), {:.0}s", fmt_list(&errs), run.seconds),
    )
}

fn c5_knowledge_sharing() -> Result<Outcome> {
    let run = scenarios::knowledge_sharing(100, 100, 5, SEED)?;
    let mut ok = true;
    let mut parts = Vec::new();
    for group in ["test_error_rich", "test_error_sparse"] {
        let per_seed = |m: &str| run.series(m, group).remove(0).1;
        let (ours, indiv, dist, cpca) = (per_seed("perpca"), per_seed("indivpca"), per_seed("distpca"), per_seed("cpca"));
        for k in 0..ours.len() {
            ok &= ours[k] < indiv[k] && ours[k] < dist[k] && ours[k] < cpca[k];
            if group == "test_error_rich" {
                ok &= cpca[k] > indiv[k] && cpca[k] > dist[k];
            }
        }
        let m = |v: &[f64]| scenarios::mean(v);
        parts.push(format!(
            "{}: PerPCA {:.3}, indivPCA {:.3}, distPCA {:.3}, CPCA {:.3}, truth {:.3}",
            group.trim_start_matches("test_error_"),
            m(&ours),
            m(&indiv),
            m(&dist),
            m(&cpca),
            m(&per_seed("truth"))
        ));
    }
    outcome(ok, parts.join("; "))
}

fn c6_stationarity() -> Result<Outcome> {
    let run = scenarios::stationarity(&[50, 100, 200, 400], 10, SEED)?;
    let mins: Vec<f64> = run.medians("perpca", "min_kkt").iter().map(|p| p.1).collect();
    let ratios: Vec<f64> = mins.windows(2).map(|w| w[1] / w[0]).collect();
    outcome(
        ratios.len() == 3 && ratios.iter().all(|&r| r <= 0.7),
        format!("median min KKT at R = 50..400: {}; ratios {}", fmt_list(&mins), fmt_list(&ratios)),
    )
}

fn c7_ascent() -> Result<Outcome> {
    let run = scenarios::ascent(200, 20, SEED)?;
    let worst = run.series("perpca", "max_decrease").remove(0).1.into_iter().fold(f64::NEG_INFINITY, f64::max);
    outcome(worst <= 1e-12, format!("largest one-round objective decrease over 20 seeds × 200 rounds: {worst:.2e}"))
}

fn c8_retractions() -> Result<Outcome> {
    let start = Instant::now();
    let polar = verify::retraction_suite(Retraction::Polar, 1000, SEED)?;
    let qr = verify::retraction_suite(Retraction::Qr, 1000, SEED)?;
    let secs = start.elapsed().as_secs_f64();
    outcome(polar.passed() && qr.passed() && secs < 10.0, format!("{polar}; {qr}; {secs:.1}s"))
}

fn c9_arrowhead() -> Result<Outcome> {
    let report = verify::arrowhead_suite(1000, SEED)?;
    outcome(report.passed(), report.to_string())
}

fn c10_lemma2() -> Result<Outcome> {
    let report = verify::lemma2_suite(500, SEED)?;
    outcome(report.passed(), report.to_string())
}

fn c11_clustering() -> Result<Outcome> {
    let run = scenarios::clustering(3, 10, 30, 10, SEED)?;
    let ari = run.series("perpca", "ari").remove(0).1;
    let perfect = ari.iter().filter(|&&a| a == 1.0).count();
    outcome(perfect >= 9, format!("ARI = 1 on {perfect}/10 seeds (median ARI {:.3})", median(&ari)))
}

fn c12_choices(run: &ScenarioRun) -> Result<Outcome> {
    let gaps = run.series("perpca", "choice_gap").remove(0).1;
    let worst = gaps.iter().copied().fold(0.0, f64::max);
    outcome(worst < 1e-6, format!("max mutual subspace error between Choice 1 and Choice 2: {worst:.2e}"))
}

fn main() -> ExitCode {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |c: usize| only.as_ref().is_none_or(|o| o.contains(&c));

    let recovery = if wanted(1) || wanted(12) { Some(exact_recovery()) } else { None };
    let with_recovery = |f: fn(&ScenarioRun) -> Result<Outcome>| -> Result<Outcome> {
        match recovery.as_ref().expect("exact-recovery run") {
            Ok(run) => f(run),
            Err(e) => outcome(false, format!("error: {e}")),
        }
    };

    let criteria: Vec<(usize, &str, Box<dyn Fn() -> Result<Outcome> + '_>)> = vec![
        (1, "exact recovery", Box::new(|| with_recovery(c1_exact_recovery))),
        (2, "θ–speed monotonicity", Box::new(c2_theta_monotone)),
        (3, "consistency slope", Box::new(c3_consistency)),
        (4, "dimension scaling", Box::new(c4_dimension)),
        (5, "knowledge sharing", Box::new(c5_knowledge_sharing)),
        (6, "stationarity decay", Box::new(c6_stationarity)),
        (7, "monotone ascent", Box::new(c7_ascent)),
        (8, "retraction axioms", Box::new(c8_retractions)),
        (9, "arrowhead bound", Box::new(c9_arrowhead)),
        (10, "lemma 2 bracketing", Box::new(c10_lemma2)),
        (11, "clustering", Box::new(c11_clustering)),
        (12, "choice equivalence", Box::new(|| with_recovery(c12_choices))),
    ];

    let mut failures = 0;
    for (id, name, check) in &criteria {
        if !wanted(*id) {
            continue;
        }
        let start = Instant::now();
        let (passed, detail) = match check() {
            Ok(o) => (o.passed, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failures += 1;
        }
        println!(
            "criterion {id:>2} {:<22} {} [{:.1}s] {detail}",
            name,
            if passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failures == 0 {
        println!("all criteria passed");
        return ExitCode::SUCCESS;
    }
    println!("{failures} criteria failed");
    if std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
