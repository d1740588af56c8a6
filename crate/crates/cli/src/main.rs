//! Command line front end for the areal library.
//!
//! Exit codes: 0 success, 2 bad input (unreadable files, malformed
//! formats, invalid parameters, disconnected graphs), 3 chain
//! divergence, 4 oracle validation failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use areal::data::{CovariateStructure, MultilevelDataset};
use areal::graph::AreaGraph;
use areal::sampler::{run_chain, McmcConfig, ModelKind};
use areal::simstudy::{emit_results, parse_grid_config, run_grid};
use areal::spectral::{CovarianceSpec, SpectralLaplacian};
use areal::threshold::{conservative_m_star_unbalanced, threshold_report};
use areal::validate::run_validation;
use areal::{rng, Error};

/// println! that exits quietly when stdout goes away (`areal ... | head`).
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let mut so = std::io::stdout().lock();
        if writeln!(so, $($arg)*).is_err() {
            std::process::exit(0);
        }
    }};
}

#[derive(Parser)]
#[command(name = "areal", version, about = "Spatial sample-size thresholds and samplers for areal multilevel regression")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute the replicate threshold m* for a graph and covariate profile.
    Threshold(ThresholdArgs),
    /// Fit the spatial or nonspatial model by MCMC and summarize the posterior.
    Fit(FitArgs),
    /// Generate a synthetic dataset and its adjacency file.
    Simulate(SimulateArgs),
    /// Cross-check the fast covariance algebra against dense solves.
    Validate(ValidateArgs),
    /// Run a simulation study over a factorial grid described by a config file.
    Grid(GridArgs),
}

#[derive(Args)]
struct ThresholdArgs {
    /// Adjacency file ("n <N>" header then 1-based "i j" edge lines).
    #[arg(long)]
    adjacency: PathBuf,
    #[command(flatten)]
    source: XbarSource,
    /// Spatial mixing parameter in [0, 1).
    #[arg(long)]
    rho: f64,
    /// Spatial variance.
    #[arg(long)]
    tau2: f64,
    /// Noise variance.
    #[arg(long)]
    sigma2: f64,
    /// Relative precision gap tolerated when dropping the spatial term.
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    /// Observed per-area counts: one integer, or a comma list of n integers.
    /// Adds a verdict on whether the observed design clears the threshold.
    #[arg(long)]
    min_m: Option<String>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct XbarSource {
    /// Dataset CSV ("area,y,x"); area means of the standardized covariate are used.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Plain text file of n area-mean covariate values, one per line.
    #[arg(long)]
    xbar: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Adjacency file.
    #[arg(long)]
    adjacency: PathBuf,
    /// Dataset CSV ("area,y,x").
    #[arg(long)]
    data: PathBuf,
    /// Which likelihood to fit.
    #[arg(long)]
    model: ModelKind,
    #[arg(long, default_value_t = 75_000)]
    iterations: usize,
    #[arg(long, default_value_t = 15_000)]
    burn_in: usize,
    #[arg(long, default_value_t = 5)]
    thin: usize,
    /// Inverse gamma shape for both variance priors.
    #[arg(long, default_value_t = 0.01)]
    prior_a: f64,
    /// Inverse gamma rate for both variance priors.
    #[arg(long, default_value_t = 0.01)]
    prior_b: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write the retained draws as CSV to this path.
    #[arg(long)]
    dump_chain: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Number of areas.
    #[arg(long)]
    n: usize,
    /// Replicates per area.
    #[arg(long)]
    m: usize,
    #[arg(long)]
    rho: f64,
    #[arg(long)]
    tau2: f64,
    #[arg(long)]
    sigma2: f64,
    #[arg(long, default_value_t = 0.0)]
    beta0: f64,
    #[arg(long, default_value_t = 1.0)]
    beta1: f64,
    /// Covariate structure: C1 (iid), C2 (area shift), C3 (area level).
    #[arg(long)]
    structure: CovariateStructure,
    /// Graph family: "random" (uniform spanning tree) or "grid" (queen moves).
    #[arg(long, default_value = "random")]
    graph: GraphKind,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output prefix; writes <prefix>.adj and <prefix>.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum GraphKind {
    Random,
    Grid,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Number of randomized comparisons against the dense oracle.
    #[arg(long, default_value_t = 200)]
    cases: usize,
    /// Multiply the closed forms by (1 + perturb); nonzero values must fail.
    #[arg(long, hide = true, default_value_t = 0.0)]
    perturb: f64,
}

#[derive(Args)]
struct GridArgs {
    /// Grid config file (key = value lines).
    #[arg(long)]
    config: PathBuf,
    /// Worker threads: 0 uses the default pool, 1 runs sequentially.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Directory for the result CSVs.
    #[arg(long, required_unless_present = "dry_run")]
    out: Option<PathBuf>,
    /// Print the cell card and planned work without running chains.
    #[arg(long)]
    dry_run: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Divergence { .. } => 3,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> areal::Result<u8> {
    match cli.cmd {
        Cmd::Threshold(a) => cmd_threshold(a),
        Cmd::Fit(a) => cmd_fit(a),
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Validate(a) => cmd_validate(a),
        Cmd::Grid(a) => cmd_grid(a),
    }
}

fn read_to_string(path: &Path) -> areal::Result<String> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn load_graph(path: &Path) -> areal::Result<AreaGraph> {
    let g = AreaGraph::from_edge_list_str(&read_to_string(path)?)?;
    if !g.is_connected() {
        return Err(Error::NotConnected);
    }
    Ok(g)
}

fn load_dataset(path: &Path) -> areal::Result<MultilevelDataset> {
    MultilevelDataset::from_csv_str(&read_to_string(path)?)?.standardize()
}

fn parse_xbar_file(text: &str, n: usize) -> areal::Result<Vec<f64>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v: f64 = t.parse().map_err(|_| Error::Parse {
            line: idx + 1,
            msg: format!("expected a number, got {t:?}"),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                line: idx + 1,
                msg: "area mean must be finite".into(),
            });
        }
        out.push(v);
    }
    if out.len() != n {
        return Err(Error::Shape {
            expected: n,
            got: out.len(),
        });
    }
    Ok(out)
}

fn parse_counts(text: &str, n: usize) -> areal::Result<Vec<usize>> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let parse_one = |s: &str| -> areal::Result<usize> {
        let v: usize = s
            .parse()
            .map_err(|_| Error::InvalidParam(format!("bad count {s:?} in --min-m")))?;
        if v == 0 {
            return Err(Error::InvalidParam("counts in --min-m must be positive".into()));
        }
        Ok(v)
    };
    if parts.len() == 1 {
        let v = parse_one(parts[0])?;
        return Ok(vec![v; n]);
    }
    if parts.len() != n {
        return Err(Error::Shape {
            expected: n,
            got: parts.len(),
        });
    }
    parts.into_iter().map(parse_one).collect()
}

fn cmd_threshold(a: ThresholdArgs) -> areal::Result<u8> {
    let g = load_graph(&a.adjacency)?;
    let spec = SpectralLaplacian::decompose(&g.laplacian())?;
    let cov = CovarianceSpec::new(a.sigma2, a.tau2, a.rho)?;
    let xbar = match (&a.source.data, &a.source.xbar) {
        (Some(p), None) => {
            let ds = load_dataset(p)?;
            if ds.n_areas() != g.n() {
                return Err(Error::Shape {
                    expected: g.n(),
                    got: ds.n_areas(),
                });
            }
            ds.area_means_x()
        }
        (None, Some(p)) => parse_xbar_file(&read_to_string(p)?, g.n())?,
        _ => unreachable!("clap enforces exactly one source"),
    };
    let report = threshold_report(&spec, &cov, a.gamma, &xbar)?;
    out!("m_star = {}", report.m_star);
    let top: Vec<String> = report
        .top_coefficients(5)
        .into_iter()
        .map(|(i, d)| format!("{}:{:.6}", i + 1, d))
        .collect();
    out!("top_d = {}", top.join(" "));
    out!("d_dot = {}", report.d_dot);
    out!("numerator_sum = {}", report.numerator_sum);
    out!("n = {}", g.n());
    out!("rho = {}", a.rho);
    out!("tau2 = {}", a.tau2);
    out!("sigma2 = {}", a.sigma2);
    out!("kappa = {}", cov.kappa());
    out!("gamma = {}", a.gamma);
    if let Some(raw) = &a.min_m {
        let counts = parse_counts(raw, g.n())?;
        let check = conservative_m_star_unbalanced(&spec, &cov, a.gamma, &xbar, &counts)?;
        out!("observed_min_m = {}", check.min_m);
        out!("verdict = {}", check.verdict);
    }
    Ok(0)
}

fn cmd_fit(a: FitArgs) -> areal::Result<u8> {
    let g = load_graph(&a.adjacency)?;
    let ds = load_dataset(&a.data)?;
    let cfg = McmcConfig {
        iterations: a.iterations,
        burn_in: a.burn_in,
        thin: a.thin,
        prior_a: a.prior_a,
        prior_b: a.prior_b,
        seed: a.seed,
        ..McmcConfig::default()
    };
    let summary = run_chain(&ds, &g, a.model, &cfg)?;
    out!("model = {}", summary.model);
    out!("retained = {}", summary.retained);
    out!("beta0_mean = {}", summary.mean_beta0);
    out!("beta0_sd = {}", summary.sd_beta0);
    out!("beta1_mean = {}", summary.mean_beta1);
    out!("beta1_sd = {}", summary.sd_beta1);
    out!("beta1_var = {}", summary.var_beta1);
    out!("sigma2_mean = {}", summary.mean_sigma2);
    out!("sigma2_sd = {}", summary.sd_sigma2);
    out!("tau2_mean = {}", summary.mean_tau2);
    out!("tau2_sd = {}", summary.sd_tau2);
    if let (Some(mr), Some(sr)) = (summary.mean_rho, summary.sd_rho) {
        out!("rho_mean = {mr}");
        out!("rho_sd = {sr}");
    }
    if let Some(acc) = summary.acceptance_rate_rho {
        out!("rho_acceptance = {acc}");
    }
    if let Some(path) = &a.dump_chain {
        summary.write_chain_csv(path)?;
        out!("chain = {}", path.display());
    }
    Ok(0)
}

fn cmd_simulate(a: SimulateArgs) -> areal::Result<u8> {
    let g = match a.graph {
        GraphKind::Random => {
            AreaGraph::random_connected(a.n, rng::derive_seed(a.seed, &[0x67]))?
        }
        GraphKind::Grid => {
            let side = (a.n as f64).sqrt().round() as usize;
            if side * side != a.n {
                return Err(Error::InvalidParam(format!(
                    "--graph grid needs a square n, got {}",
                    a.n
                )));
            }
            AreaGraph::grid_queen(side, side)?
        }
    };
    let spec = SpectralLaplacian::decompose(&g.laplacian())?;
    let cov = CovarianceSpec::new(a.sigma2, a.tau2, a.rho)?;
    let (ds, truth) =
        areal::data::simulate_dataset(&spec, &cov, a.beta0, a.beta1, a.structure, a.m, a.seed)?;

    let adj_path = a.out.with_extension("adj");
    let csv_path = a.out.with_extension("csv");
    fs::write(&adj_path, g.to_edge_list_string())?;
    fs::write(&csv_path, ds.to_csv_string())?;

    let n = a.n as f64;
    let mean = truth.theta.iter().sum::<f64>() / n;
    let var = truth.theta.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
    let min = truth.theta.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = truth.theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    out!("adjacency = {}", adj_path.display());
    out!("dataset = {}", csv_path.display());
    out!("rows = {}", a.n * a.m);
    out!("theta_mean = {mean}");
    out!("theta_sd = {}", var.sqrt());
    out!("theta_min = {min}");
    out!("theta_max = {max}");
    Ok(0)
}

fn cmd_validate(a: ValidateArgs) -> areal::Result<u8> {
    let report = run_validation(a.cases, a.seed, a.perturb)?;
    out!("cases = {}", report.cases.len());
    out!("tolerance = {:e}", report.tol);
    out!("max_rel_err = {:e}", report.max_rel_err);
    if report.passed() {
        out!("result = pass");
        return Ok(0);
    }
    out!("result = fail");
    let ids: Vec<String> = report.failures.iter().map(|c| c.to_string()).collect();
    out!("failures = {}", ids.join(","));
    if let Some(w) = report.worst_case() {
        out!(
            "worst = case {} n={} m={} rho={} tau2={} sigma2={} structure={} rel_err_spatial={:e} rel_err_nonspatial={:e}",
            w.case, w.n, w.m, w.rho, w.tau2, w.sigma2, w.structure,
            w.rel_err_spatial, w.rel_err_nonspatial
        );
    }
    Ok(4)
}

fn cmd_grid(a: GridArgs) -> areal::Result<u8> {
    let grid = parse_grid_config(&read_to_string(&a.config)?)?;
    let cells = grid.cell_count();
    let join = |v: &[f64]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    out!("cells = {cells}");
    out!(
        "n = {}",
        grid.n_values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
    );
    out!("rho = {}", join(&grid.rho_values));
    out!("tau2 = {}", join(&grid.tau2_values));
    out!(
        "m = {}",
        grid.m_values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
    );
    out!(
        "structures = {}",
        grid.structures.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")
    );
    out!("replicates = {}", grid.replicates);
    out!("chains = {}", 2 * cells * grid.replicates);
    out!("iterations = {}", grid.mcmc.iterations);
    out!("gamma = {}", grid.gamma);
    out!("seed = {}", grid.seed);
    out!("workers = {}", a.workers);
    if a.dry_run {
        return Ok(0);
    }
    let out_dir = a.out.expect("clap requires --out without --dry-run");
    fs::create_dir_all(&out_dir)?;
    eprintln!("running {} chains, this can take a while", 2 * cells * grid.replicates);
    let results = run_grid(&grid, a.workers)?;
    let (var_path, mean_path) = emit_results(&results, &out_dir)?;
    out!("variance_differences = {}", var_path.display());
    out!("mean_differences = {}", mean_path.display());
    Ok(0)
}
