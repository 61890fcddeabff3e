use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde_json::{json, Value};

use perpca::baselines::{central_pca, distpca, indiv_pca, Stacking};
use perpca::metrics::{global_subspace_error, rho_matrix, spectral_cluster, subspace_error};
use perpca::model::{covariance, ClientDataset, ComponentState, CovarianceMatrix, GroundTruth};
use perpca::scenarios::{self, BenchRow, ScenarioRun};
use perpca::solver::{run_perpca, Choice, Init, LocalRanks, PerPcaSolver, SolverConfig, Stepsize, DEFAULT_STEP_CONSTANT};
use perpca::stiefel::Retraction;
use perpca::synth::{generate_components, generate_observations, GenerativeSpec, LocalLayout, ScoreDist};
use perpca::verify::{self, SuiteReport};
use perpca::{Frame, Tolerances};

use crate::io::{self, fmt_f64, Format};
use crate::manifest::{Recorder, Settings};

#[derive(Debug, Parser)]
#[command(name = "perpca", version, about = "Personalized PCA: shared and client-specific principal components")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate planted-subspace client datasets.
    Synth(SynthArgs),
    /// Fit global and local components with the federated Stiefel method.
    Fit(FitArgs),
    /// One-shot baselines: distpca, indiv, cpca.
    Baseline(BaselineArgs),
    /// Subspace error against a truth directory and reconstruction error on data.
    Eval(EvalArgs),
    /// Pairwise local-subspace distances and spectral clustering of clients.
    Cluster(ClusterArgs),
    /// Run the verification suites; exit status 0 iff all pass.
    Check(CheckArgs),
    /// Run an experiment grid and print one CSV row per grid point.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub d: Option<usize>,
    /// Number of clients N.
    #[arg(long)]
    pub clients: Option<usize>,
    #[arg(long)]
    pub r1: Option<usize>,
    #[arg(long)]
    pub r2: Option<usize>,
    /// Observations per client.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub global_std: Option<f64>,
    #[arg(long)]
    pub local_std: Option<f64>,
    #[arg(long)]
    pub noise_std: Option<f64>,
    /// Target θ (two clients, r2 = 1 only).
    #[arg(long)]
    pub theta: Option<f64>,
    /// independent | disjoint | shared
    #[arg(long)]
    pub layout: Option<String>,
    /// Comma-separated group label per client; clients in a group share a local subspace.
    #[arg(long)]
    pub groups: Option<String>,
    /// gaussian | rademacher
    #[arg(long)]
    pub scores: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub header: bool,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Client data files (n×d, one observation per row) or directories of `client_<i>` files.
    #[arg(required = true)]
    pub data: Vec<PathBuf>,
    #[arg(long)]
    pub rounds: Option<usize>,
    /// `auto` or a fixed stepsize.
    #[arg(long)]
    pub eta: Option<String>,
    /// 1 | 2
    #[arg(long)]
    pub choice: Option<String>,
    /// polar | qr
    #[arg(long)]
    pub retraction: Option<String>,
    /// distpca | random
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub r1: Option<usize>,
    /// One local rank for every client, or a comma-separated list.
    #[arg(long)]
    pub r2: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory with `truth_U` and `truth_V_<i>`; adds subspace_error to the trace.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Subtract each client's column means first.
    #[arg(long)]
    pub center: bool,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(required = true)]
    pub data: Vec<PathBuf>,
    /// distpca | indiv | cpca
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub r1: Option<usize>,
    #[arg(long)]
    pub r2: Option<String>,
    #[arg(long)]
    pub center: bool,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory with `U` and/or `V_<i>` files from `fit` or `baseline`.
    #[arg(long)]
    pub state: PathBuf,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Data to measure reconstruction error on (files or directories).
    #[arg(long, num_args = 1..)]
    pub data: Vec<PathBuf>,
    #[arg(long)]
    pub center: bool,
    /// Also write the metrics JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub state: PathBuf,
    /// Number of clusters.
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for `rho.csv`, `labels.csv` and `cluster.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// error-vs-n | error-vs-d | error-vs-N | theta-sweep | knowledge-sharing | clustering | exact-recovery
    #[arg(long)]
    pub scenario: String,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated grid overriding the scenario default.
    #[arg(long)]
    pub grid: Option<String>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs a command and returns the process exit status.
pub fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Synth(a) => synth(a).map(|_| 0),
        Command::Fit(a) => fit(a).map(|_| 0),
        Command::Baseline(a) => baseline(a).map(|_| 0),
        Command::Eval(a) => eval(a).map(|_| 0),
        Command::Cluster(a) => cluster(a).map(|_| 0),
        Command::Check(a) => check(a),
        Command::Bench(a) => bench(a).map(|_| 0),
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(|t| t.trim().parse::<T>().map_err(|e| anyhow::anyhow!("bad {what} `{t}`: {e}")))
        .collect()
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let mut s = Settings::load(a.config.as_deref())?;
    let d = s.get("d", a.d, 15)?;
    let clients = s.get("clients", a.clients, 10)?;
    let r1 = s.get("r1", a.r1, 2)?;
    let r2 = s.get("r2", a.r2, 3)?;
    let n = s.get("n", a.n, 100)?;
    let mut spec = GenerativeSpec::new(d, clients, r1, r2, n);
    spec.global_score_std = s.get("global-std", a.global_std, spec.global_score_std)?;
    spec.local_score_std = s.get("local-std", a.local_std, spec.local_score_std)?;
    spec.noise_std = s.get("noise-std", a.noise_std, 0.0)?;
    spec.theta_target = s.get_opt("theta", a.theta)?;
    spec.seed = s.get("seed", a.seed, 0)?;
    let layout = s.get("layout", a.layout, "independent".to_string())?;
    let groups = s.get_opt("groups", a.groups)?;
    spec.layout = match (layout.as_str(), groups) {
        (_, Some(g)) => LocalLayout::Groups(parse_list(&g, "group label")?),
        ("independent", None) => LocalLayout::Independent,
        ("disjoint", None) => LocalLayout::Disjoint,
        ("shared", None) => LocalLayout::Shared,
        (other, None) => bail!("unknown layout `{other}` (independent | disjoint | shared)"),
    };
    spec.score_dist = match s.get("scores", a.scores, "gaussian".to_string())?.as_str() {
        "gaussian" => ScoreDist::Gaussian,
        "rademacher" => ScoreDist::Rademacher,
        other => bail!("unknown score distribution `{other}` (gaussian | rademacher)"),
    };
    let header = s.switch("header", a.header)?;
    let format = s.get("format", a.format, Format::Csv)?;
    s.record("out", &a.out)?;

    let truth = generate_components::<f64>(&spec)?;
    let data = generate_observations(&truth, &spec)?;
    create_dir(&a.out)?;
    let mut rec = Recorder::new("synth");
    let names: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    for y in &data {
        let rows = y.matrix().transpose();
        rec.output(io::write_matrix(&a.out, &format!("client_{}", y.client_id), &rows, format, header.then_some(&names[..]))?);
    }
    rec.output(io::write_matrix(&a.out, "truth_U", truth.global.matrix(), format, None)?);
    for (i, v) in truth.local.iter().enumerate() {
        rec.output(io::write_matrix(&a.out, &format!("truth_V_{i}"), v.matrix(), format, None)?);
    }
    rec.metric("seed", spec.seed)?;
    rec.metric("theta_actual", truth.theta_actual)?;
    rec.metric("eigengap", truth.eigengap)?;
    rec.metric("spec", &spec)?;
    rec.finish(&a.out, s)?;
    Ok(())
}

/// Loads client data in order, checking that every file has the same `d`.
pub fn load_data(inputs: &[PathBuf], center: bool, rec: Option<&mut Recorder>) -> Result<Vec<ClientDataset<f64>>> {
    let paths = io::data_paths(inputs)?;
    let mut out = Vec::with_capacity(paths.len());
    let mut dim = None;
    for (i, p) in paths.iter().enumerate() {
        let rows = io::read_matrix(p)?;
        match dim {
            None => dim = Some((rows.ncols(), p)),
            Some((d, first)) => ensure!(
                rows.ncols() == d,
                "inconsistent dimension: {} has d = {}, {} has d = {d}",
                p.display(),
                rows.ncols(),
                first.display()
            ),
        }
        let y = ClientDataset::from_rows(i, &rows).with_context(|| format!("client file {}", p.display()))?;
        out.push(if center { y.centered() } else { y });
    }
    if let Some(rec) = rec {
        for p in &paths {
            rec.input(p)?;
        }
    }
    Ok(out)
}

fn covariances(data: &[ClientDataset<f64>]) -> Result<Vec<CovarianceMatrix<f64>>> {
    Ok(data.iter().map(covariance).collect::<perpca::Result<_>>()?)
}

/// `<dir>/<stem>.csv` or `<dir>/<stem>.mat64`, whichever exists.
fn find_matrix(dir: &Path, stem: &str) -> Option<PathBuf> {
    ["csv", "mat64"].iter().map(|e| dir.join(format!("{stem}.{e}"))).find(|p| p.is_file())
}

fn read_frame(path: &Path) -> Result<Frame> {
    let m = io::read_matrix(path)?;
    Frame::new(m, Tolerances::<f64>::default().orth_tol * 100.0)
        .with_context(|| format!("{} is not an orthonormal frame", path.display()))
}

/// Optional `U` plus the `V_<i>` frames in `dir` (with an optional file prefix).
fn load_frames(dir: &Path, prefix: &str, rec: Option<&mut Recorder>) -> Result<(Option<Frame>, Vec<Frame>)> {
    let u_path = find_matrix(dir, &format!("{prefix}U"));
    let v_paths = io::indexed_files(dir, &format!("{prefix}V_"))?;
    ensure!(u_path.is_some() || !v_paths.is_empty(), "no {prefix}U or {prefix}V_<i> files in {}", dir.display());
    let u = u_path.as_deref().map(read_frame).transpose()?;
    let v = v_paths.iter().map(|p| read_frame(p)).collect::<Result<Vec<_>>>()?;
    if let Some(rec) = rec {
        for p in u_path.iter().chain(&v_paths) {
            rec.input(p)?;
        }
    }
    Ok((u, v))
}

fn load_truth(dir: &Path, rec: Option<&mut Recorder>) -> Result<GroundTruth<f64>> {
    match load_frames(dir, "truth_", rec)? {
        (Some(global), local) if !local.is_empty() => Ok(GroundTruth { global, local }),
        _ => bail!("{} needs truth_U and truth_V_<i> files", dir.display()),
    }
}

fn parse_ranks(r2: &str) -> Result<LocalRanks> {
    let list: Vec<usize> = parse_list(r2, "local rank")?;
    Ok(if list.len() == 1 { LocalRanks::Uniform(list[0]) } else { LocalRanks::PerClient(list) })
}

fn write_state(dir: &Path, u: Option<&Frame>, v: &[Frame], format: Format, rec: &mut Recorder) -> Result<()> {
    if let Some(u) = u {
        rec.output(io::write_matrix(dir, "U", u.matrix(), format, None)?);
    }
    for (i, f) in v.iter().enumerate() {
        rec.output(io::write_matrix(dir, &format!("V_{i}"), f.matrix(), format, None)?);
    }
    Ok(())
}

fn solver_config(s: &mut Settings, a: &FitArgs) -> Result<SolverConfig<f64>> {
    let Some(r1) = s.get_opt("r1", a.r1)? else { bail!("--r1 is required") };
    let Some(r2) = s.get_opt("r2", a.r2.clone())? else { bail!("--r2 is required") };
    let mut cfg = SolverConfig::new(r1, 1);
    cfg.r2 = parse_ranks(&r2)?;
    cfg.rounds = s.get("rounds", a.rounds, cfg.rounds)?;
    cfg.stepsize = match s.get("eta", a.eta.clone(), "auto".to_string())?.as_str() {
        "auto" => Stepsize::Auto { c: DEFAULT_STEP_CONSTANT },
        v => {
            let eta: f64 = v.parse().map_err(|_| anyhow::anyhow!("--eta must be `auto` or a number, got `{v}`"))?;
            ensure!(eta.is_finite() && eta > 0.0, "--eta must be positive, got {eta}");
            Stepsize::Fixed(eta)
        }
    };
    cfg.choice = match s.get("choice", a.choice.clone(), "1".to_string())?.as_str() {
        "1" => Choice::One,
        "2" => Choice::Two,
        other => bail!("--choice must be 1 or 2, got `{other}`"),
    };
    cfg.retraction = s.get("retraction", a.retraction.clone(), "polar".to_string())?.parse::<Retraction>()?;
    cfg.init = match s.get("init", a.init.clone(), "distpca".to_string())?.as_str() {
        "distpca" => Init::DistPca,
        "random" => Init::Random,
        other => bail!("--init must be distpca or random, got `{other}`"),
    };
    cfg.seed = s.get("seed", a.seed, 0)?;
    Ok(cfg)
}

pub fn fit(a: FitArgs) -> Result<()> {
    let mut s = Settings::load(a.config.as_deref())?;
    let cfg = solver_config(&mut s, &a)?;
    let center = s.switch("center", a.center)?;
    let format = s.get("format", a.format, Format::Csv)?;
    s.record("out", &a.out)?;
    let mut rec = Recorder::new("fit");
    let data = load_data(&a.data, center, Some(&mut rec))?;
    let covs = covariances(&data)?;
    let truth = match s.get_opt("truth", a.truth.clone())? {
        Some(dir) => Some(load_truth(&dir, Some(&mut rec))?),
        None => None,
    };

    let result = run_perpca(&covs, cfg.clone(), truth.as_ref())?;
    create_dir(&a.out)?;
    write_state(&a.out, Some(&result.state.global), &result.state.local, format, &mut rec)?;

    let mut header = vec!["round", "objective", "kkt_global", "kkt_local", "recon_error_mean"];
    if truth.is_some() {
        header.push("subspace_error");
    }
    let mut csv = header.join(",") + "\n";
    for t in &result.trace {
        let mut cells = vec![t.round.to_string()];
        cells.extend([t.objective, t.kkt_global, t.kkt_local, t.recon_error_mean].map(fmt_f64));
        cells.extend(t.subspace_error.map(fmt_f64));
        csv += &(cells.join(",") + "\n");
    }
    let trace_path = a.out.join("trace.csv");
    fs::write(&trace_path, csv).with_context(|| format!("cannot write {}", trace_path.display()))?;
    rec.output(trace_path);

    let rounds_run = result.trace.last().map_or(0, |t| t.round);
    let last = PerPcaSolver::with_state(&covs, cfg, result.state)?.record(truth.as_ref())?;
    rec.metric("rounds", rounds_run)?;
    rec.metric("stepsize", result.stepsize)?;
    rec.metric("objective", last.objective)?;
    rec.metric("kkt_global", last.kkt_global)?;
    rec.metric("kkt_local", last.kkt_local)?;
    rec.metric("recon_error_mean", last.recon_error_mean)?;
    if let Some(e) = last.subspace_error {
        rec.metric("subspace_error", e)?;
    }
    rec.finish(&a.out, s)?;
    Ok(())
}

/// `tr(S) − tr(WᵀSW)` for the orthonormal columns of `w`.
fn residual_energy(s: &CovarianceMatrix<f64>, w: &DMatrix<f64>) -> f64 {
    let sw = s.matrix() * w;
    s.matrix().trace() - w.iter().zip(sw.iter()).map(|(a, b)| a * b).sum::<f64>()
}

/// Columns of `U` (if any) followed by those of `V` (if any).
fn joint(u: Option<&Frame>, v: Option<&Frame>) -> Result<DMatrix<f64>> {
    Ok(match (u, v) {
        (Some(u), Some(v)) => u.concat(v)?,
        (Some(f), None) | (None, Some(f)) => f.matrix().clone(),
        (None, None) => bail!("no components to reconstruct with"),
    })
}

pub fn baseline(a: BaselineArgs) -> Result<()> {
    let mut s = Settings::load(a.config.as_deref())?;
    let method = s.get("method", a.method, "distpca".to_string())?;
    let Some(r1) = s.get_opt("r1", a.r1)? else { bail!("--r1 is required") };
    let Some(r2) = s.get_opt("r2", a.r2)? else { bail!("--r2 is required") };
    let r2 = parse_ranks(&r2)?;
    let center = s.switch("center", a.center)?;
    let format = s.get("format", a.format, Format::Csv)?;
    s.record("out", &a.out)?;
    let mut rec = Recorder::new("baseline");
    let data = load_data(&a.data, center, Some(&mut rec))?;
    let covs = covariances(&data)?;
    let ranks = r2.resolve(covs.len())?;

    // indiv and cpca keep r1 + r2 components, as in the comparison protocol
    let uniform_total = || -> Result<usize> {
        ensure!(ranks.iter().all(|&r| r == ranks[0]), "{method} needs one local rank for every client");
        Ok(r1 + ranks[0])
    };
    let (u, v): (Option<Frame>, Vec<Frame>) = match method.as_str() {
        "distpca" => {
            let state = distpca(&covs, r1, &ranks, Stacking::default())?;
            (Some(state.global), state.local)
        }
        "indiv" | "indivpca" => (None, indiv_pca(&covs, uniform_total()?)?),
        "cpca" => (Some(central_pca(&covs, uniform_total()?)?), Vec::new()),
        other => bail!("unknown baseline `{other}` (distpca | indiv | cpca)"),
    };
    create_dir(&a.out)?;
    write_state(&a.out, u.as_ref(), &v, format, &mut rec)?;

    let recon: Vec<f64> = covs
        .iter()
        .enumerate()
        .map(|(i, s)| Ok(residual_energy(s, &joint(u.as_ref(), v.get(i))?)))
        .collect::<Result<_>>()?;
    rec.metric("recon_error_mean", scenarios::mean(&recon))?;
    rec.finish(&a.out, s)?;
    Ok(())
}

pub fn eval(a: EvalArgs) -> Result<Value> {
    let (u, v) = load_frames(&a.state, "", None)?;
    let mut out = serde_json::Map::new();
    if let Some(dir) = &a.truth {
        let truth = load_truth(dir, None)?;
        let Some(u) = u.clone() else { bail!("subspace error needs a global frame U in {}", a.state.display()) };
        let state = ComponentState::new(u, v.clone(), Tolerances::<f64>::default().cross_tol * 100.0)?;
        out.insert("subspace_error".into(), json!(subspace_error(&state, &truth)?));
        out.insert("global_subspace_error".into(), json!(global_subspace_error(&state, &truth)?));
    }
    if !a.data.is_empty() {
        let covs = covariances(&load_data(&a.data, a.center, None)?)?;
        ensure!(
            v.is_empty() || v.len() == covs.len(),
            "{} local frames for {} clients",
            v.len(),
            covs.len()
        );
        let recon: Vec<f64> = covs
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let w = joint(u.as_ref(), v.get(i))?;
                ensure!(w.nrows() == s.dim(), "components have d = {}, data has d = {}", w.nrows(), s.dim());
                Ok(residual_energy(s, &w))
            })
            .collect::<Result<_>>()?;
        out.insert("recon_error_mean".into(), json!(scenarios::mean(&recon)));
        out.insert("recon_error".into(), json!(recon));
    }
    ensure!(!out.is_empty(), "nothing to evaluate: give --truth and/or --data");
    let value = Value::Object(out);
    let text = serde_json::to_string_pretty(&value)? + "\n";
    print!("{text}");
    if let Some(p) = &a.out {
        fs::write(p, &text).with_context(|| format!("cannot write {}", p.display()))?;
    }
    Ok(value)
}

pub fn cluster(a: ClusterArgs) -> Result<()> {
    let (_, v) = load_frames(&a.state, "", None)?;
    ensure!(!v.is_empty(), "no V_<i> files in {}", a.state.display());
    let rho = rho_matrix(&v)?;
    let labels = spectral_cluster(&rho, a.k, a.seed)?;
    create_dir(&a.out)?;
    io::write_csv(&a.out.join("rho.csv"), &rho.to_matrix(), None)?;
    let mut csv = String::from("client,label\n");
    for (i, l) in labels.iter().enumerate() {
        csv += &format!("{i},{l}\n");
    }
    fs::write(a.out.join("labels.csv"), csv)?;
    let doc = json!({ "k": a.k, "seed": a.seed, "labels": labels, "rho": rho.values, "paper_standard": rho.paper_standard });
    fs::write(a.out.join("cluster.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(())
}

/// Per-suite report lines and the overall verdict.
pub fn check_summary(reports: &[SuiteReport]) -> (String, bool) {
    let mut text = String::new();
    for r in reports {
        text += &format!("{} {r}\n", if r.passed() { "PASS" } else { "FAIL" });
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed()).map(|r| r.name.as_str()).collect();
    if !failed.is_empty() {
        text += &format!("failed suites: {}\n", failed.join(", "));
    }
    (text, failed.is_empty())
}

pub fn check(a: CheckArgs) -> Result<u8> {
    let (text, ok) = check_summary(&verify::run_all(a.seed)?);
    print!("{text}");
    Ok(if ok { 0 } else { 1 })
}

pub fn run_scenario(name: &str, grid: Option<&str>, repeats: Option<usize>, seed: u64) -> Result<ScenarioRun> {
    let ints = |default: &[usize]| -> Result<Vec<usize>> { grid.map_or(Ok(default.to_vec()), |g| parse_list(g, "grid value")) };
    let reps = |default: usize| repeats.unwrap_or(default);
    Ok(match name {
        "error-vs-n" => scenarios::error_vs_n(&ints(&[200, 800, 3200, 12800])?, reps(3), seed)?,
        "error-vs-d" => scenarios::error_vs_d(&ints(&[10, 20, 40, 80])?, reps(2), seed)?,
        "error-vs-N" => scenarios::error_vs_clients(&ints(&[10, 20, 50, 100])?, reps(3), seed)?,
        "theta-sweep" => {
            let thetas = grid.map_or(Ok(vec![0.05, 0.1, 0.2, 0.3, 0.4, 0.5]), |g| parse_list(g, "θ"))?;
            scenarios::theta_sweep(&thetas, reps(10), 400, seed)?
        }
        "knowledge-sharing" => {
            let ns = ints(&[100])?;
            ensure!(ns.len() == 1, "knowledge-sharing takes a single n");
            scenarios::knowledge_sharing(100, ns[0], reps(5), seed)?
        }
        "clustering" => {
            let rounds = ints(&[30])?;
            ensure!(rounds.len() == 1, "clustering takes a single round budget");
            scenarios::clustering(3, 10, rounds[0], reps(10), seed)?
        }
        "exact-recovery" => {
            let rounds = ints(&[500])?;
            ensure!(rounds.len() == 1 && rounds[0] >= 2, "exact-recovery takes a single round budget >= 2");
            scenarios::exact_recovery(rounds[0], (rounds[0] / 2).min(200), reps(10), seed)?
        }
        other => bail!(
            "unknown scenario `{other}` (error-vs-n | error-vs-d | error-vs-N | theta-sweep | knowledge-sharing | clustering | exact-recovery)"
        ),
    })
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut csv = String::from("scenario,method,param,x,metric,mean,std,repeats\n");
    for r in rows {
        csv += &format!(
            "{},{},{},{},{},{},{},{}\n",
            r.scenario,
            r.method,
            r.param,
            r.x,
            r.metric,
            fmt_f64(r.mean),
            fmt_f64(r.std),
            r.repeats
        );
    }
    csv
}

pub fn bench(a: BenchArgs) -> Result<()> {
    let run = run_scenario(&a.scenario, a.grid.as_deref(), a.repeats, a.seed)?;
    let csv = bench_csv(&run.rows());
    match &a.out {
        Some(p) => fs::write(p, csv).with_context(|| format!("cannot write {}", p.display()))?,
        None => print!("{csv}"),
    }
    Ok(())
}
