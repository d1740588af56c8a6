//! Batch simulation harness.
//!
//! A grid crosses map size, spatial dependence, variance split, replicate
//! count, and covariate structure. Each cell simulates datasets, fits the
//! spatial and the exchangeable model on the same data, and records how far
//! apart the two posteriors land on the slope, next to the closed-form
//! threshold prediction for that dataset.
//!
//! Every replicate derives its own seed from the grid seed and the cell
//! coordinates, so outputs are identical whatever the worker count.

use std::path::{Path, PathBuf};

use crate::data::{simulate_dataset, CovariateStructure};
use crate::error::{Error, Result};
use crate::exec::map_jobs;
use crate::graph::AreaGraph;
use crate::rng::{derive_seed, f64_tag, rng_from};
use crate::sampler::{run_chain, McmcConfig, ModelKind};
use crate::spectral::{CovarianceSpec, SpectralLaplacian};
use crate::threshold::{threshold_report, MStar};

/// Full crossing of experiment settings. Variance pairs are encoded by
/// tau2 with sigma2 = 1 - tau2, so the marginal variance is 1 and the ratio
/// kappa = tau2 / (1 - tau2) indexes the split.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    pub n_values: Vec<usize>,
    pub rho_values: Vec<f64>,
    pub tau2_values: Vec<f64>,
    pub m_values: Vec<usize>,
    pub structures: Vec<CovariateStructure>,
    pub replicates: usize,
    pub gamma: f64,
    pub mcmc: McmcConfig,
    pub seed: u64,
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty()
            || self.rho_values.is_empty()
            || self.tau2_values.is_empty()
            || self.m_values.is_empty()
            || self.structures.is_empty()
        {
            return Err(Error::Config("every grid dimension needs at least one value".into()));
        }
        if self.n_values.iter().any(|&n| n < 2) {
            return Err(Error::Config("n values must be at least 2".into()));
        }
        if self.m_values.iter().any(|&m| m == 0) {
            return Err(Error::Config("m values must be at least 1".into()));
        }
        if self
            .rho_values
            .iter()
            .any(|&r| !r.is_finite() || !(0.0..1.0).contains(&r))
        {
            return Err(Error::Config("rho values must lie in [0, 1)".into()));
        }
        if self
            .tau2_values
            .iter()
            .any(|&t| !t.is_finite() || t <= 0.0 || t >= 1.0)
        {
            return Err(Error::Config(
                "tau2 values must lie in (0, 1) so sigma2 = 1 - tau2 stays positive".into(),
            ));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::Config("gamma must be positive".into()));
        }
        self.mcmc.validate()
    }

    pub fn cell_count(&self) -> usize {
        self.n_values.len()
            * self.rho_values.len()
            * self.tau2_values.len()
            * self.m_values.len()
            * self.structures.len()
    }

    /// Cells in output order: lexicographic by (n, rho, tau2, m, structure).
    pub fn cells(&self) -> Vec<CellKey> {
        let mut sorted_n = self.n_values.clone();
        sorted_n.sort_unstable();
        sorted_n.dedup();
        let mut sorted_rho = self.rho_values.clone();
        sorted_rho.sort_by(|a, b| a.partial_cmp(b).expect("validated finite"));
        sorted_rho.dedup();
        let mut sorted_tau2 = self.tau2_values.clone();
        sorted_tau2.sort_by(|a, b| a.partial_cmp(b).expect("validated finite"));
        sorted_tau2.dedup();
        let mut sorted_m = self.m_values.clone();
        sorted_m.sort_unstable();
        sorted_m.dedup();
        let mut structures = self.structures.clone();
        structures.sort_by_key(|s| s.tag());
        structures.dedup();

        let mut cells = Vec::with_capacity(self.cell_count());
        for &n in &sorted_n {
            for &rho in &sorted_rho {
                for &tau2 in &sorted_tau2 {
                    for &m in &sorted_m {
                        for &structure in &structures {
                            cells.push(CellKey {
                                n,
                                rho,
                                tau2,
                                m,
                                structure,
                            });
                        }
                    }
                }
            }
        }
        cells
    }
}

/// Identifying coordinates of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellKey {
    pub n: usize,
    pub rho: f64,
    pub tau2: f64,
    pub m: usize,
    pub structure: CovariateStructure,
}

impl CellKey {
    pub fn sigma2(&self) -> f64 {
        1.0 - self.tau2
    }
}

impl std::fmt::Display for CellKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "n={} rho={} tau2={} m={} structure={}",
            self.n, self.rho, self.tau2, self.m, self.structure
        )
    }
}

/// Mean with a 95% Monte Carlo interval (mean +- 1.96 sd / sqrt(R)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryStat {
    pub mean: f64,
    pub lo95: f64,
    pub hi95: f64,
}

impl SummaryStat {
    pub fn from_samples(v: &[f64]) -> Self {
        let r = v.len() as f64;
        let mean = v.iter().sum::<f64>() / r;
        if v.len() < 2 {
            return Self {
                mean,
                lo95: mean,
                hi95: mean,
            };
        }
        let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (r - 1.0);
        let half = 1.96 * (var / r).sqrt();
        Self {
            mean,
            lo95: mean - half,
            hi95: mean + half,
        }
    }
}

/// Aggregated cell outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub key: CellKey,
    /// |Var_ns(beta1) - Var_sp(beta1)| / Var_sp(beta1) across replicates.
    /// This equals the relative precision gap with the spatial model as
    /// reference, since |1/v0 - 1/v1| / (1/v1) = |v1 - v0| / v0.
    pub rel_var: SummaryStat,
    /// |E_sp(beta1) - E_ns(beta1)| across replicates.
    pub mean_diff: SummaryStat,
    /// Mean closed-form threshold over replicates; infinite if any replicate
    /// was infinite.
    pub m_star_mean: f64,
    /// Replicates that completed both fits.
    pub replicates: usize,
    /// Replicates dropped because a chain diverged.
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum RepOutcome {
    Done {
        rel_var: f64,
        mean_diff: f64,
        m_star: MStar,
    },
    Diverged,
}

fn run_replicate(grid: &ExperimentGrid, key: &CellKey, replicate: usize) -> Result<RepOutcome> {
    let base = derive_seed(
        grid.seed,
        &[
            key.n as u64,
            f64_tag(key.rho),
            f64_tag(key.tau2),
            key.m as u64,
            key.structure.tag(),
            replicate as u64,
        ],
    );
    let graph = AreaGraph::random_connected(key.n, derive_seed(base, &[1]))?;
    let spec = SpectralLaplacian::decompose(&graph.laplacian())?;
    let cov = CovarianceSpec::new(key.sigma2(), key.tau2, key.rho)?;

    let mut coef_rng = rng_from(base, &[2]);
    let beta0: f64 = rand::Rng::sample(&mut coef_rng, rand_distr::StandardNormal);
    let beta1: f64 = rand::Rng::sample(&mut coef_rng, rand_distr::StandardNormal);

    let (ds, _) = simulate_dataset(
        &spec,
        &cov,
        beta0,
        beta1,
        key.structure,
        key.m,
        derive_seed(base, &[3]),
    )?;
    let report = threshold_report(&spec, &cov, grid.gamma, &ds.area_means_x())?;

    let sp_cfg = McmcConfig {
        seed: derive_seed(base, &[4]),
        ..grid.mcmc
    };
    let ns_cfg = McmcConfig {
        seed: derive_seed(base, &[5]),
        ..grid.mcmc
    };
    let spatial = match run_chain(&ds, &graph, ModelKind::Spatial, &sp_cfg) {
        Ok(s) => s,
        Err(Error::Divergence { .. }) => return Ok(RepOutcome::Diverged),
        Err(e) => return Err(e),
    };
    let nonspatial = match run_chain(&ds, &graph, ModelKind::Nonspatial, &ns_cfg) {
        Ok(s) => s,
        Err(Error::Divergence { .. }) => return Ok(RepOutcome::Diverged),
        Err(e) => return Err(e),
    };

    let rel_var = (nonspatial.var_beta1 - spatial.var_beta1).abs() / spatial.var_beta1;
    let mean_diff = (spatial.mean_beta1 - nonspatial.mean_beta1).abs();
    Ok(RepOutcome::Done {
        rel_var,
        mean_diff,
        m_star: report.m_star,
    })
}

pub(crate) fn aggregate_cell(
    key: CellKey,
    total: usize,
    outcomes: &[RepOutcome],
) -> Result<CellResult> {
    let mut rel_vars = Vec::new();
    let mut mean_diffs = Vec::new();
    let mut m_star_sum = 0.0;
    let mut m_star_infinite = false;
    let mut excluded = 0usize;
    for o in outcomes {
        match o {
            RepOutcome::Done {
                rel_var,
                mean_diff,
                m_star,
            } => {
                rel_vars.push(*rel_var);
                mean_diffs.push(*mean_diff);
                match m_star {
                    MStar::Finite(v) => m_star_sum += *v as f64,
                    MStar::Infinite => m_star_infinite = true,
                }
            }
            RepOutcome::Diverged => excluded += 1,
        }
    }
    if excluded as f64 > 0.2 * total as f64 {
        return Err(Error::CellExclusion {
            cell: key.to_string(),
            excluded,
            total,
        });
    }
    let included = rel_vars.len();
    let m_star_mean = if m_star_infinite {
        f64::INFINITY
    } else {
        m_star_sum / included as f64
    };
    Ok(CellResult {
        key,
        rel_var: SummaryStat::from_samples(&rel_vars),
        mean_diff: SummaryStat::from_samples(&mean_diffs),
        m_star_mean,
        replicates: included,
        excluded,
    })
}

/// Runs the full grid on `workers` threads (0 = default pool, 1 =
/// sequential). Cell results come back in the order of
/// [`ExperimentGrid::cells`] and are identical for every worker count.
/// A cell that loses more than 20% of its replicates to divergence fails
/// the run.
pub fn run_grid(grid: &ExperimentGrid, workers: usize) -> Result<Vec<CellResult>> {
    grid.validate()?;
    let cells = grid.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..grid.replicates).map(move |r| (c, r)))
        .collect();
    let outcomes = map_jobs(workers, &jobs, |&(c, r)| run_replicate(grid, &cells[c], r));

    let mut results = Vec::with_capacity(cells.len());
    for (c, key) in cells.into_iter().enumerate() {
        let mut cell_outcomes = Vec::with_capacity(grid.replicates);
        for (j, &(jc, _)) in jobs.iter().enumerate() {
            if jc == c {
                match &outcomes[j] {
                    Ok(o) => cell_outcomes.push(o.clone()),
                    Err(e) => {
                        return Err(Error::Config(format!(
                            "cell {key}, replicate {}: {e}",
                            jobs[j].1
                        )))
                    }
                }
            }
        }
        results.push(aggregate_cell(key, grid.replicates, &cell_outcomes)?);
    }
    Ok(results)
}

/// Empirical/theoretical threshold comparison over one grid slice.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingCheck {
    /// Smallest m in the slice whose mean |relVar| fell to gamma or below.
    pub crossing_m: Option<usize>,
    /// True when no m in the slice crossed.
    pub censored: bool,
    /// Mean of the per-cell threshold means over the slice.
    pub m_star_mean: f64,
    /// crossing_m / m_star_mean when both are finite.
    pub ratio: Option<f64>,
}

/// Finds where the empirical |relVar| curve crosses `gamma` within a slice
/// of cells sharing everything but m. Requires at least four distinct m
/// values.
pub fn crossing_check(cells: &[CellResult], gamma: f64) -> Result<CrossingCheck> {
    if cells.len() < 4 {
        return Err(Error::InvalidParam(
            "crossing check needs at least 4 m values in the slice".into(),
        ));
    }
    let k0 = &cells[0].key;
    let mut ms: Vec<usize> = Vec::with_capacity(cells.len());
    for c in cells {
        let k = &c.key;
        if k.n != k0.n || k.rho != k0.rho || k.tau2 != k0.tau2 || k.structure != k0.structure {
            return Err(Error::InvalidParam(
                "crossing check slice must vary only m".into(),
            ));
        }
        ms.push(k.m);
    }
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by_key(|&i| ms[i]);
    ms.sort_unstable();
    ms.dedup();
    if ms.len() != cells.len() {
        return Err(Error::InvalidParam("duplicate m in crossing slice".into()));
    }

    let crossing_m = order
        .iter()
        .find(|&&i| cells[i].rel_var.mean <= gamma)
        .map(|&i| cells[i].key.m);
    let m_star_mean =
        cells.iter().map(|c| c.m_star_mean).sum::<f64>() / cells.len() as f64;
    let ratio = match crossing_m {
        Some(c) if m_star_mean.is_finite() && m_star_mean > 0.0 => {
            Some(c as f64 / m_star_mean)
        }
        _ => None,
    };
    Ok(CrossingCheck {
        crossing_m,
        censored: crossing_m.is_none(),
        m_star_mean,
        ratio,
    })
}

fn result_rows(cells: &[CellResult], stat_name: &str, pick: impl Fn(&CellResult) -> SummaryStat) -> String {
    let mut sorted: Vec<&CellResult> = cells.iter().collect();
    sorted.sort_by(|a, b| {
        let ka = (&a.key, &b.key);
        ka.0.n
            .cmp(&ka.1.n)
            .then(ka.0.rho.partial_cmp(&ka.1.rho).expect("finite"))
            .then(ka.0.tau2.partial_cmp(&ka.1.tau2).expect("finite"))
            .then(ka.0.m.cmp(&ka.1.m))
            .then(ka.0.structure.tag().cmp(&ka.1.structure.tag()))
    });
    let mut out = String::from("n,rho,tau2,sigma2,m,structure,stat,mean,lo95,hi95,replicates,m_star_mean\n");
    for c in sorted {
        let s = pick(c);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            c.key.n,
            c.key.rho,
            c.key.tau2,
            c.key.sigma2(),
            c.key.m,
            c.key.structure,
            stat_name,
            s.mean,
            s.lo95,
            s.hi95,
            c.replicates,
            c.m_star_mean
        ));
    }
    out
}

/// Writes `variance_differences.csv` and `mean_differences.csv` into `dir`.
/// Rows are sorted lexicographically by cell coordinates and the bytes are
/// identical across reruns of the same grid and seed.
pub fn emit_results(cells: &[CellResult], dir: impl AsRef<Path>) -> Result<(PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let var_path = dir.join("variance_differences.csv");
    let mean_path = dir.join("mean_differences.csv");
    std::fs::write(&var_path, result_rows(cells, "rel_var_diff", |c| c.rel_var))?;
    std::fs::write(&mean_path, result_rows(cells, "abs_mean_diff", |c| c.mean_diff))?;
    Ok((var_path, mean_path))
}

/// Parses the flat key-value grid config format:
///
/// ```text
/// # comment
/// n = 25,100
/// m = 1,2,5
/// rho = 0.05,0.5,0.95
/// tau2 = 0.05,0.5,0.95
/// structures = C1,C2,C3
/// replicates = 100
/// gamma = 0.05
/// iterations = 75000
/// burn_in = 15000
/// thin = 5
/// prior_a = 0.01
/// prior_b = 0.01
/// target_accept = 0.234
/// seed = 1
/// ```
///
/// `n`, `m`, `rho`, `tau2`, and `structures` are required; everything else
/// defaults (replicates 100, gamma 0.05, chain settings as in
/// [`McmcConfig::default`], seed 0).
pub fn parse_grid_config(text: &str) -> Result<ExperimentGrid> {
    let mut grid = ExperimentGrid {
        n_values: Vec::new(),
        rho_values: Vec::new(),
        tau2_values: Vec::new(),
        m_values: Vec::new(),
        structures: Vec::new(),
        replicates: 100,
        gamma: 0.05,
        mcmc: McmcConfig::default(),
        seed: 0,
    };
    let mut seen: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let lineno = lineno + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {lineno}: expected `key = value`, got `{line}`"))
        })?;
        let key = key.trim();
        let value = value.trim();
        if !seen.insert(key.to_string()) {
            return Err(Error::Config(format!("line {lineno}: duplicate key `{key}`")));
        }
        match key {
            "n" => grid.n_values = parse_list(value, lineno, "n")?,
            "m" => grid.m_values = parse_list(value, lineno, "m")?,
            "rho" => grid.rho_values = parse_list(value, lineno, "rho")?,
            "tau2" => grid.tau2_values = parse_list(value, lineno, "tau2")?,
            "structures" => {
                grid.structures = value
                    .split(',')
                    .map(|s| s.parse())
                    .collect::<Result<Vec<_>>>()?
            }
            "replicates" => grid.replicates = parse_scalar(value, lineno, key)?,
            "gamma" => grid.gamma = parse_scalar(value, lineno, key)?,
            "iterations" => grid.mcmc.iterations = parse_scalar(value, lineno, key)?,
            "burn_in" => grid.mcmc.burn_in = parse_scalar(value, lineno, key)?,
            "thin" => grid.mcmc.thin = parse_scalar(value, lineno, key)?,
            "prior_a" => grid.mcmc.prior_a = parse_scalar(value, lineno, key)?,
            "prior_b" => grid.mcmc.prior_b = parse_scalar(value, lineno, key)?,
            "target_accept" => grid.mcmc.target_accept = parse_scalar(value, lineno, key)?,
            "seed" => grid.seed = parse_scalar(value, lineno, key)?,
            other => {
                return Err(Error::Config(format!(
                    "line {lineno}: unknown key `{other}`"
                )))
            }
        }
    }
    for (name, missing) in [
        ("n", grid.n_values.is_empty()),
        ("m", grid.m_values.is_empty()),
        ("rho", grid.rho_values.is_empty()),
        ("tau2", grid.tau2_values.is_empty()),
        ("structures", grid.structures.is_empty()),
    ] {
        if missing {
            return Err(Error::Config(format!("missing required key `{name}`")));
        }
    }
    grid.validate()?;
    Ok(grid)
}

fn parse_list<T: std::str::FromStr>(value: &str, lineno: usize, key: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|tok| {
            tok.trim().parse::<T>().map_err(|_| {
                Error::Config(format!(
                    "line {lineno}: could not parse `{}` in list `{key}`",
                    tok.trim()
                ))
            })
        })
        .collect()
}

fn parse_scalar<T: std::str::FromStr>(value: &str, lineno: usize, key: &str) -> Result<T> {
    value.trim().parse::<T>().map_err(|_| {
        Error::Config(format!(
            "line {lineno}: could not parse value `{value}` for `{key}`"
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_grid() -> ExperimentGrid {
        ExperimentGrid {
            n_values: vec![5],
            rho_values: vec![0.3],
            tau2_values: vec![0.5],
            m_values: vec![2, 1],
            structures: vec![CovariateStructure::C1],
            replicates: 3,
            gamma: 0.05,
            mcmc: McmcConfig {
                iterations: 150,
                burn_in: 50,
                thin: 2,
                ..Default::default()
            },
            seed: 11,
        }
    }

    #[test]
    fn cells_are_sorted_lexicographically() {
        let mut grid = tiny_grid();
        grid.n_values = vec![10, 5];
        grid.structures = vec![CovariateStructure::C2, CovariateStructure::C1];
        let cells = grid.cells();
        assert_eq!(cells.len(), 8);
        assert_eq!((cells[0].n, cells[0].m), (5, 1));
        assert_eq!(cells[0].structure, CovariateStructure::C1);
        assert_eq!(cells[1].structure, CovariateStructure::C2);
        assert_eq!((cells[2].n, cells[2].m), (5, 2));
        assert_eq!(cells[4].n, 10);
    }

    #[test]
    fn grid_run_is_deterministic_across_worker_counts() {
        let grid = tiny_grid();
        let seq = run_grid(&grid, 1).unwrap();
        let par = run_grid(&grid, 3).unwrap();
        assert_eq!(seq, par);
        assert_eq!(seq.len(), 2);
        for cell in &seq {
            assert_eq!(cell.replicates, 3);
            assert_eq!(cell.excluded, 0);
            assert!(cell.rel_var.mean.is_finite() && cell.rel_var.mean >= 0.0);
            assert!(cell.m_star_mean >= 2.0);
        }
    }

    #[test]
    fn emitted_csvs_are_byte_identical_across_reruns() {
        let grid = tiny_grid();
        let cells = run_grid(&grid, 0).unwrap();
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        let (v1, m1) = emit_results(&cells, dir1.path()).unwrap();
        let cells2 = run_grid(&grid, 2).unwrap();
        let (v2, m2) = emit_results(&cells2, dir2.path()).unwrap();
        let a = std::fs::read(&v1).unwrap();
        let b = std::fs::read(&v2).unwrap();
        assert_eq!(a, b);
        assert_eq!(std::fs::read(&m1).unwrap(), std::fs::read(&m2).unwrap());
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with(
            "n,rho,tau2,sigma2,m,structure,stat,mean,lo95,hi95,replicates,m_star_mean\n"
        ));
        assert_eq!(text.lines().count(), 3);
        assert!(text.contains(",rel_var_diff,"));
    }

    #[test]
    fn aggregation_enforces_exclusion_cap() {
        let key = CellKey {
            n: 5,
            rho: 0.3,
            tau2: 0.5,
            m: 2,
            structure: CovariateStructure::C1,
        };
        let done = RepOutcome::Done {
            rel_var: 0.1,
            mean_diff: 0.02,
            m_star: MStar::Finite(7),
        };
        let mut outcomes = vec![done.clone(); 8];
        outcomes.extend([RepOutcome::Diverged, RepOutcome::Diverged]);
        let cell = aggregate_cell(key, 10, &outcomes).unwrap();
        assert_eq!(cell.replicates, 8);
        assert_eq!(cell.excluded, 2);
        assert!((cell.m_star_mean - 7.0).abs() < 1e-12);

        let mut too_many = vec![done; 7];
        too_many.extend(vec![RepOutcome::Diverged; 3]);
        assert!(matches!(
            aggregate_cell(key, 10, &too_many),
            Err(Error::CellExclusion { excluded: 3, total: 10, .. })
        ));
    }

    #[test]
    fn infinite_threshold_poisons_the_cell_mean() {
        let key = CellKey {
            n: 4,
            rho: 0.5,
            tau2: 0.5,
            m: 3,
            structure: CovariateStructure::C3,
        };
        let outcomes = vec![
            RepOutcome::Done {
                rel_var: 0.1,
                mean_diff: 0.0,
                m_star: MStar::Finite(4),
            },
            RepOutcome::Done {
                rel_var: 0.2,
                mean_diff: 0.1,
                m_star: MStar::Infinite,
            },
        ];
        let cell = aggregate_cell(key, 2, &outcomes).unwrap();
        assert!(cell.m_star_mean.is_infinite());
    }

    #[test]
    fn crossing_check_finds_first_m_at_or_below_gamma() {
        let mk = |m: usize, mean: f64, m_star: f64| CellResult {
            key: CellKey {
                n: 25,
                rho: 0.9,
                tau2: 0.5,
                m,
                structure: CovariateStructure::C2,
            },
            rel_var: SummaryStat {
                mean,
                lo95: mean,
                hi95: mean,
            },
            mean_diff: SummaryStat {
                mean: 0.0,
                lo95: 0.0,
                hi95: 0.0,
            },
            m_star_mean: m_star,
            replicates: 30,
            excluded: 0,
        };
        // deliberately unsorted input
        let cells = vec![
            mk(20, 0.04, 12.0),
            mk(2, 0.5, 12.0),
            mk(50, 0.01, 12.0),
            mk(5, 0.2, 12.0),
            mk(10, 0.06, 12.0),
        ];
        let check = crossing_check(&cells, 0.05).unwrap();
        assert_eq!(check.crossing_m, Some(20));
        assert!(!check.censored);
        assert!((check.m_star_mean - 12.0).abs() < 1e-12);
        assert!((check.ratio.unwrap() - 20.0 / 12.0).abs() < 1e-12);

        // no cell crosses: censored
        let high = vec![
            mk(2, 0.5, 9.0),
            mk(5, 0.4, 9.0),
            mk(10, 0.3, 9.0),
            mk(20, 0.2, 9.0),
        ];
        let check = crossing_check(&high, 0.05).unwrap();
        assert!(check.censored);
        assert_eq!(check.crossing_m, None);
        assert_eq!(check.ratio, None);

        // too few m values
        assert!(crossing_check(&high[..3], 0.05).is_err());
    }

    #[test]
    fn config_parsing_round_trip_and_errors() {
        let text = "\
# full scale
n = 25, 100
m = 1,2,5
rho = 0.05,0.5
tau2 = 0.5
structures = C1, C3
replicates = 10
gamma = 0.1
iterations = 1000
burn_in = 200
thin = 4
seed = 99
";
        let grid = parse_grid_config(text).unwrap();
        assert_eq!(grid.n_values, vec![25, 100]);
        assert_eq!(grid.m_values, vec![1, 2, 5]);
        assert_eq!(grid.rho_values, vec![0.05, 0.5]);
        assert_eq!(grid.structures, vec![CovariateStructure::C1, CovariateStructure::C3]);
        assert_eq!(grid.replicates, 10);
        assert_eq!(grid.mcmc.iterations, 1000);
        assert_eq!(grid.mcmc.thin, 4);
        assert_eq!(grid.seed, 99);
        assert_eq!(grid.cell_count(), 2 * 2 * 1 * 3 * 2);
        // defaults hold for unspecified keys
        assert_eq!(grid.mcmc.prior_a, 0.01);
        assert_eq!(grid.gamma, 0.1);

        assert!(parse_grid_config("n = 5\n").is_err());
        assert!(parse_grid_config(&format!("{text}\nbogus = 3\n")).is_err());
        assert!(parse_grid_config(&format!("{text}\nn = 7\n")).is_err());
        assert!(parse_grid_config(&text.replace("0.05,0.5", "0.05,1.5")).is_err());
        assert!(parse_grid_config(&text.replace("structures = C1, C3", "structures = C9")).is_err());
    }

    #[test]
    fn grid_validation_rejects_bad_dimensions() {
        let mut g = tiny_grid();
        g.tau2_values = vec![1.0];
        assert!(g.validate().is_err());
        let mut g = tiny_grid();
        g.n_values = vec![1];
        assert!(g.validate().is_err());
        let mut g = tiny_grid();
        g.rho_values = vec![-0.1];
        assert!(g.validate().is_err());
        let mut g = tiny_grid();
        g.replicates = 0;
        assert!(g.validate().is_err());
    }
}
