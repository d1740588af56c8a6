//! Gibbs/Metropolis samplers for the multilevel areal model
//!
//!   y_ij = x_ij' beta + theta_i + eps_ij,  eps_ij ~ N(0, sigma^2)
//!
//! with either Leroux spatial effects theta ~ N(0, tau^2 Q(rho)^-1),
//! Q(rho) = rho L + (1 - rho) I, or exchangeable effects (rho pinned to 0,
//! no graph). Priors: flat on beta, sigma^2 and tau^2 ~ InvGamma(a, b),
//! rho ~ Uniform(0, 1).
//!
//! Full conditionals:
//! - beta | rest ~ N((X'X)^-1 X'r, sigma^2 (X'X)^-1) with r = y - Z theta
//! - theta_i | rest ~ N(mu_i, s_i^2),
//!     s_i^2 = (m_i/sigma^2 + ((1 - rho) + rho w_i.)/tau^2)^-1,
//!     mu_i = s_i^2 (m_i rbar_i / sigma^2 + rho sum_{i'~i} theta_i' / tau^2),
//!   scanned sequentially in index order (single site updates)
//! - sigma^2 | rest ~ InvGamma(a + N/2, b + SSE/2)
//! - tau^2 | rest ~ InvGamma(a + n/2, b + theta' Q(rho) theta / 2)
//! - rho: random-walk Metropolis on psi = logit(rho) with
//!     log f(rho | rest) = (1/2) sum_i log q_i - theta' Q(rho) theta / (2 tau^2)
//!   and acceptance ratio including the Jacobian rho*(1-rho*)/(rho(1-rho)).
//!
//! The quadratic form is accumulated from graph edges,
//! theta' Q theta = rho * sum_{(i,j) in E} (theta_i - theta_j)^2
//!                + (1 - rho) * ||theta||^2,
//! which is algebraically identical to the spectral form and keeps the sweep
//! O(N + |E|).
//!
//! The proposal scale adapts by Robbins-Monro during burn-in only:
//! log s <- log s + c i^-g (accept - 0.234), frozen afterwards, so retained
//! draws come from a fixed kernel.
//!
//! Sweep order is beta, theta, sigma^2, tau^2, rho. Runs are bit-reproducible
//! given the config seed.

use nalgebra::{DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::data::MultilevelDataset;
use crate::error::{Error, Result};
use crate::graph::AreaGraph;
use crate::spectral::{CovarianceSpec, SpectralLaplacian};

/// Keeps rho strictly inside (0, 1) after the inverse logit.
const RHO_CLAMP: f64 = 1e-8;

/// Which random-effect structure the chain samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Spatial,
    Nonspatial,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Spatial => write!(f, "spatial"),
            Self::Nonspatial => write!(f, "nonspatial"),
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "spatial" => Ok(Self::Spatial),
            "nonspatial" => Ok(Self::Nonspatial),
            other => Err(Error::Config(format!(
                "unknown model `{other}`, expected spatial or nonspatial"
            ))),
        }
    }
}

/// Chain length and prior settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub prior_a: f64,
    pub prior_b: f64,
    pub target_accept: f64,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            iterations: 75_000,
            burn_in: 15_000,
            thin: 5,
            prior_a: 0.01,
            prior_b: 0.01,
            target_accept: 0.234,
            seed: 1,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return Err(Error::InvalidParam(format!(
                "need burn_in < iterations, got {} / {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 || self.thin > self.iterations - self.burn_in {
            return Err(Error::InvalidParam(format!(
                "thin must be in 1..={}, got {}",
                self.iterations - self.burn_in,
                self.thin
            )));
        }
        if !(self.prior_a > 0.0 && self.prior_b > 0.0) {
            return Err(Error::InvalidParam(
                "inverse gamma prior parameters must be positive".into(),
            ));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidParam(
                "target acceptance must be in (0, 1)".into(),
            ));
        }
        Ok(())
    }

    /// Number of retained draws: floor((iterations - burn_in) / thin).
    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// Inverse gamma distribution with density proportional to
/// x^-(shape+1) exp(-scale/x). Sampled as the reciprocal of a Gamma draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseGamma {
    shape: f64,
    scale: f64,
}

impl InverseGamma {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape.is_finite() && shape > 0.0 && scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParam(format!(
                "inverse gamma needs positive finite parameters, got shape {shape}, scale {scale}"
            )));
        }
        Ok(Self { shape, scale })
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Mean scale/(shape - 1), defined for shape > 1.
    pub fn mean(&self) -> Option<f64> {
        (self.shape > 1.0).then(|| self.scale / (self.shape - 1.0))
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        // W ~ Gamma(shape, rate = scale) drawn via the scale parameterization
        let g = Gamma::new(self.shape, 1.0 / self.scale).expect("validated parameters");
        1.0 / g.sample(rng)
    }
}

/// Robbins-Monro state for the logit random-walk proposal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProposalTuning {
    pub log_scale: f64,
    pub step_c: f64,
    pub step_gamma: f64,
    pub target: f64,
}

impl Default for ProposalTuning {
    fn default() -> Self {
        Self {
            log_scale: 0.0,
            step_c: 1.0,
            step_gamma: 0.6,
            target: 0.234,
        }
    }
}

impl ProposalTuning {
    pub fn with_target(target: f64) -> Self {
        Self {
            target,
            ..Self::default()
        }
    }

    pub fn scale(&self) -> f64 {
        self.log_scale.exp()
    }

    /// One stochastic-approximation step after the proposal at `iteration`
    /// (1-based) was accepted or not.
    pub fn adapted(mut self, accepted: bool, iteration: usize) -> Self {
        let step = self.step_c * (iteration as f64).powf(-self.step_gamma);
        let indicator = if accepted { 1.0 } else { 0.0 };
        self.log_scale += step * (indicator - self.target);
        self
    }
}

/// Fixed design matrix with its Cholesky factor.
pub struct Design {
    x: DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, Dyn>,
}

impl Design {
    /// Builds [1 | x | extras] for a dataset. Fails on rank deficiency.
    pub fn from_dataset(ds: &MultilevelDataset, extras: &[Vec<f64>]) -> Result<Self> {
        let rows = ds.rows();
        for e in extras {
            if e.len() != rows {
                return Err(Error::Shape {
                    expected: rows,
                    got: e.len(),
                });
            }
            if !e.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidParam("nonfinite extra covariate".into()));
            }
        }
        let p = 2 + extras.len();
        let mut x = DMatrix::<f64>::zeros(rows, p);
        for r in 0..rows {
            x[(r, 0)] = 1.0;
            x[(r, 1)] = ds.x()[r];
            for (k, e) in extras.iter().enumerate() {
                x[(r, 2 + k)] = e[r];
            }
        }
        Self::new(x)
    }

    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        let xtx = x.transpose() * &x;
        let chol = nalgebra::Cholesky::new(xtx).ok_or(Error::SingularDesign)?;
        // exact collinearity can slip past the factorization as a tiny
        // positive pivot; a collapsed pivot ratio means rank deficiency
        let diag = chol.l_dirty().diagonal();
        let max = diag.iter().cloned().fold(0.0f64, f64::max);
        if diag.iter().any(|&d| !(d > 1e-6 * max)) {
            return Err(Error::SingularDesign);
        }
        Ok(Self { x, chol })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Least squares solve (X'X)^-1 X'v.
    pub fn ols(&self, v: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(&(self.x.transpose() * v))
    }
}

/// Draws beta | rest ~ N((X'X)^-1 X'r, sigma^2 (X'X)^-1) where `resid` is
/// y - Z theta.
pub fn gibbs_beta<R: Rng>(
    design: &Design,
    resid: &DVector<f64>,
    sigma2: f64,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let mean = design.ols(resid);
    let z = DVector::from_iterator(
        design.p(),
        (0..design.p()).map(|_| rng.sample::<f64, _>(StandardNormal)),
    );
    // Cov(w) = (L')^-1 L^-1 = (X'X)^-1 when L' w = z
    let w = design
        .chol
        .l()
        .transpose()
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::Numeric("triangular solve failed in beta update".into()))?;
    Ok(mean + w * sigma2.sqrt())
}

/// Mean and variance of the single-site conditional theta_i | theta_{-i}, rest.
/// `rbar[i]` is the mean over area i's rows of y - x'beta; `counts[i]` is m_i.
/// Pass rho = 0 for the exchangeable model (the graph is not consulted).
pub fn theta_site_moments(
    g: &AreaGraph,
    counts: &[usize],
    rbar: &[f64],
    theta: &[f64],
    i: usize,
    sigma2: f64,
    tau2: f64,
    rho: f64,
) -> (f64, f64) {
    let m_i = counts[i] as f64;
    let w_i = g.degree(i) as f64;
    let prec = m_i / sigma2 + ((1.0 - rho) + rho * w_i) / tau2;
    let var = 1.0 / prec;
    let neigh = if rho > 0.0 {
        g.neighbors(i).iter().map(|&j| theta[j]).sum::<f64>()
    } else {
        0.0
    };
    let mean = var * (m_i * rbar[i] / sigma2 + rho * neigh / tau2);
    (mean, var)
}

/// Sequential single-site sweep over theta in index order 0..n.
pub fn gibbs_theta_sweep<R: Rng>(
    g: &AreaGraph,
    counts: &[usize],
    rbar: &[f64],
    theta: &mut [f64],
    sigma2: f64,
    tau2: f64,
    rho: f64,
    rng: &mut R,
) {
    for i in 0..theta.len() {
        let (mean, var) = theta_site_moments(g, counts, rbar, theta, i, sigma2, tau2, rho);
        theta[i] = mean + var.sqrt() * rng.sample::<f64, _>(StandardNormal);
    }
}

/// Full conditional of sigma^2 given `sse` = sum of squared residuals over
/// `rows` observations.
pub fn sigma2_full_conditional(a: f64, b: f64, sse: f64, rows: usize) -> Result<InverseGamma> {
    InverseGamma::new(a + rows as f64 / 2.0, b + sse / 2.0)
}

/// Full conditional of tau^2 given quad = theta' Q(rho) theta over n areas.
pub fn tau2_full_conditional(a: f64, b: f64, quad: f64, n: usize) -> Result<InverseGamma> {
    InverseGamma::new(a + n as f64 / 2.0, b + quad / 2.0)
}

/// theta' L theta and theta' theta accumulated from graph edges; combining
/// them gives theta' Q(rho) theta = rho l_quad + (1 - rho) i_quad.
pub fn edge_quadforms(g: &AreaGraph, theta: &[f64]) -> (f64, f64) {
    let l_quad = g
        .edges()
        .iter()
        .map(|&(i, j)| {
            let d = theta[i] - theta[j];
            d * d
        })
        .sum();
    let i_quad = theta.iter().map(|t| t * t).sum();
    (l_quad, i_quad)
}

/// Unnormalized log full conditional of rho:
/// (1/2) sum_i log q_i - theta' Q(rho) theta / (2 tau^2).
pub fn rho_log_density(eigvals: &[f64], rho: f64, tau2: f64, l_quad: f64, i_quad: f64) -> f64 {
    let log_det: f64 = eigvals
        .iter()
        .map(|&l| (rho * l + (1.0 - rho)).ln())
        .sum();
    let quad = rho * l_quad + (1.0 - rho) * i_quad;
    0.5 * log_det - quad / (2.0 * tau2)
}

/// Log Metropolis ratio for a logit random-walk move from `rho` to
/// `rho_star`, including the change-of-variables Jacobian.
pub fn rho_log_accept(
    eigvals: &[f64],
    rho: f64,
    rho_star: f64,
    tau2: f64,
    l_quad: f64,
    i_quad: f64,
) -> f64 {
    rho_log_density(eigvals, rho_star, tau2, l_quad, i_quad)
        - rho_log_density(eigvals, rho, tau2, l_quad, i_quad)
        + (rho_star * (1.0 - rho_star)).ln()
        - (rho * (1.0 - rho)).ln()
}

/// One random-walk Metropolis step for rho on the logit scale. Returns the
/// new value (clamped inside (0, 1)) and whether the proposal was accepted.
pub fn metropolis_rho<R: Rng>(
    eigvals: &[f64],
    l_quad: f64,
    i_quad: f64,
    tau2: f64,
    rho: f64,
    scale: f64,
    rng: &mut R,
) -> (f64, bool) {
    let psi = (rho / (1.0 - rho)).ln();
    let psi_star = psi + scale * rng.sample::<f64, _>(StandardNormal);
    let rho_star = (1.0 / (1.0 + (-psi_star).exp())).clamp(RHO_CLAMP, 1.0 - RHO_CLAMP);
    let log_r = rho_log_accept(eigvals, rho, rho_star, tau2, l_quad, i_quad);
    let u: f64 = rng.random();
    if u.ln() < log_r {
        (rho_star, true)
    } else {
        (rho, false)
    }
}

/// Retained draws of the scalar chain components. `rho` is empty for
/// nonspatial runs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChainRecord {
    pub iter: Vec<u64>,
    pub beta0: Vec<f64>,
    pub beta1: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub tau2: Vec<f64>,
    pub rho: Vec<f64>,
}

impl ChainRecord {
    /// CSV dump, `iter,beta0,beta1,sigma2,tau2,rho` for spatial chains and
    /// `iter,beta0,beta1,sigma2,tau2` when no rho was sampled. Floats use
    /// 17 significant digits for exact round trips.
    pub fn to_csv_string(&self) -> String {
        let with_rho = !self.rho.is_empty();
        let mut out = String::new();
        out.push_str(if with_rho {
            "iter,beta0,beta1,sigma2,tau2,rho\n"
        } else {
            "iter,beta0,beta1,sigma2,tau2\n"
        });
        for k in 0..self.iter.len() {
            if with_rho {
                out.push_str(&format!(
                    "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                    self.iter[k], self.beta0[k], self.beta1[k], self.sigma2[k], self.tau2[k],
                    self.rho[k]
                ));
            } else {
                out.push_str(&format!(
                    "{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                    self.iter[k], self.beta0[k], self.beta1[k], self.sigma2[k], self.tau2[k]
                ));
            }
        }
        out
    }

    fn push(&mut self, iter: u64, beta0: f64, beta1: f64, sigma2: f64, tau2: f64, rho: Option<f64>) {
        self.iter.push(iter);
        self.beta0.push(beta0);
        self.beta1.push(beta1);
        self.sigma2.push(sigma2);
        self.tau2.push(tau2);
        if let Some(r) = rho {
            self.rho.push(r);
        }
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Posterior summaries plus the retained scalar chains.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub model: ModelKind,
    pub retained: usize,
    pub mean_beta0: f64,
    pub sd_beta0: f64,
    pub mean_beta1: f64,
    pub sd_beta1: f64,
    /// Sample variance of the retained beta1 draws.
    pub var_beta1: f64,
    pub mean_sigma2: f64,
    pub sd_sigma2: f64,
    pub mean_tau2: f64,
    pub sd_tau2: f64,
    pub mean_rho: Option<f64>,
    pub sd_rho: Option<f64>,
    /// Post burn-in Metropolis acceptance rate; None when rho is not sampled.
    pub acceptance_rate_rho: Option<f64>,
    pub chain: ChainRecord,
}

impl PosteriorSummary {
    pub fn write_chain_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.chain.to_csv_string())?;
        Ok(())
    }
}

/// Runs one chain with the intercept + covariate design.
pub fn run_chain(
    ds: &MultilevelDataset,
    g: &AreaGraph,
    model: ModelKind,
    cfg: &McmcConfig,
) -> Result<PosteriorSummary> {
    run_chain_impl(ds, &[], g, model, cfg, None)
}

/// Same chain with extra covariate columns appended to the design.
pub fn run_chain_multi(
    ds: &MultilevelDataset,
    extras: &[Vec<f64>],
    g: &AreaGraph,
    model: ModelKind,
    cfg: &McmcConfig,
) -> Result<PosteriorSummary> {
    run_chain_impl(ds, extras, g, model, cfg, None)
}

/// Runs a chain with (sigma^2, tau^2, rho) pinned at `cov`; only beta and
/// theta are sampled. The nonspatial model requires cov.rho() == 0.
pub fn run_chain_fixed_cov(
    ds: &MultilevelDataset,
    g: &AreaGraph,
    model: ModelKind,
    cov: &CovarianceSpec,
    cfg: &McmcConfig,
) -> Result<PosteriorSummary> {
    if model == ModelKind::Nonspatial && cov.rho() != 0.0 {
        return Err(Error::InvalidParam(
            "nonspatial model requires rho = 0 in the fixed covariance".into(),
        ));
    }
    run_chain_impl(ds, &[], g, model, cfg, Some(cov))
}

fn run_chain_impl(
    ds: &MultilevelDataset,
    extras: &[Vec<f64>],
    g: &AreaGraph,
    model: ModelKind,
    cfg: &McmcConfig,
    fixed: Option<&CovarianceSpec>,
) -> Result<PosteriorSummary> {
    cfg.validate()?;
    if !ds.is_standardized() {
        return Err(Error::InvalidParam(
            "dataset must be standardized before fitting".into(),
        ));
    }
    if ds.n_areas() != g.n() {
        return Err(Error::Shape {
            expected: g.n(),
            got: ds.n_areas(),
        });
    }
    let spatial = model == ModelKind::Spatial;
    let eigvals: Vec<f64> = if spatial {
        if !g.is_connected() {
            return Err(Error::NotConnected);
        }
        SpectralLaplacian::decompose(&g.laplacian())?
            .eigenvalues()
            .to_vec()
    } else {
        Vec::new()
    };

    let n = ds.n_areas();
    let rows = ds.rows();
    let counts = ds.counts();
    let mem = ds.membership();
    let y = ds.y();
    let design = Design::from_dataset(ds, extras)?;

    let mut rng = crate::rng::rng_from(cfg.seed, &[]);

    // initialization: OLS coefficients, zero effects, variances split evenly
    // from the OLS residual variance
    let y_vec = DVector::from_column_slice(y);
    let mut beta = design.ols(&y_vec);
    let fitted0 = design.matrix() * &beta;
    let rss = (&y_vec - &fitted0).norm_squared();
    let v0 = (rss / (2.0 * rows as f64)).max(1e-8);
    let (mut sigma2, mut tau2) = match fixed {
        Some(c) => (c.sigma2(), c.tau2()),
        None => (v0, v0),
    };
    let mut rho = match (spatial, fixed) {
        (true, Some(c)) => c.rho(),
        (true, None) => 0.5,
        (false, _) => 0.0,
    };
    let mut theta = vec![0.0f64; n];

    let mut tuning = ProposalTuning::with_target(cfg.target_accept);
    let sample_cov = fixed.is_none();
    let sample_rho = spatial && sample_cov;
    let mut accepts: usize = 0;
    let mut proposals: usize = 0;

    let mut resid = DVector::<f64>::zeros(rows);
    let mut rbar = vec![0.0f64; n];
    let mut chain = ChainRecord::default();

    for t in 1..=cfg.iterations {
        // beta
        for r in 0..rows {
            resid[r] = y[r] - theta[mem[r]];
        }
        beta = gibbs_beta(&design, &resid, sigma2, &mut rng)
            .map_err(|e| diverged(t, e.to_string()))?;
        let fitted = design.matrix() * &beta;

        // theta
        rbar.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..rows {
            rbar[mem[r]] += y[r] - fitted[r];
        }
        for i in 0..n {
            rbar[i] /= counts[i] as f64;
        }
        gibbs_theta_sweep(g, &counts, &rbar, &mut theta, sigma2, tau2, rho, &mut rng);

        let (l_quad, i_quad) = if spatial {
            edge_quadforms(g, &theta)
        } else {
            (0.0, theta.iter().map(|v| v * v).sum())
        };

        if sample_cov {
            // sigma^2
            let mut sse = 0.0;
            for r in 0..rows {
                let e = y[r] - fitted[r] - theta[mem[r]];
                sse += e * e;
            }
            sigma2 = sigma2_full_conditional(cfg.prior_a, cfg.prior_b, sse, rows)
                .map_err(|e| diverged(t, e.to_string()))?
                .sample(&mut rng);

            // tau^2
            let quad = if spatial {
                rho * l_quad + (1.0 - rho) * i_quad
            } else {
                i_quad
            };
            tau2 = tau2_full_conditional(cfg.prior_a, cfg.prior_b, quad, n)
                .map_err(|e| diverged(t, e.to_string()))?
                .sample(&mut rng);
        }

        if sample_rho {
            let (new_rho, accepted) =
                metropolis_rho(&eigvals, l_quad, i_quad, tau2, rho, tuning.scale(), &mut rng);
            rho = new_rho;
            if t <= cfg.burn_in {
                tuning = tuning.adapted(accepted, t);
            } else {
                proposals += 1;
                if accepted {
                    accepts += 1;
                }
            }
        }

        check_state(t, &beta, &theta, sigma2, tau2, rho, spatial)?;

        if t > cfg.burn_in && (t - cfg.burn_in) % cfg.thin == 0 {
            chain.push(
                t as u64,
                beta[0],
                beta[1],
                sigma2,
                tau2,
                spatial.then_some(rho),
            );
        }
    }

    let (mean_beta0, sd_beta0) = mean_sd(&chain.beta0);
    let (mean_beta1, sd_beta1) = mean_sd(&chain.beta1);
    let (mean_sigma2, sd_sigma2) = mean_sd(&chain.sigma2);
    let (mean_tau2, sd_tau2) = mean_sd(&chain.tau2);
    let (mean_rho, sd_rho) = if spatial {
        let (m, s) = mean_sd(&chain.rho);
        (Some(m), Some(s))
    } else {
        (None, None)
    };
    Ok(PosteriorSummary {
        model,
        retained: chain.iter.len(),
        mean_beta0,
        sd_beta0,
        mean_beta1,
        sd_beta1,
        var_beta1: sd_beta1 * sd_beta1,
        mean_sigma2,
        sd_sigma2,
        mean_tau2,
        sd_tau2,
        mean_rho,
        sd_rho,
        acceptance_rate_rho: sample_rho.then(|| accepts as f64 / proposals as f64),
        chain,
    })
}

fn diverged(iteration: usize, detail: String) -> Error {
    Error::Divergence { iteration, detail }
}

fn check_state(
    t: usize,
    beta: &DVector<f64>,
    theta: &[f64],
    sigma2: f64,
    tau2: f64,
    rho: f64,
    spatial: bool,
) -> Result<()> {
    if !beta.iter().all(|v| v.is_finite()) {
        return Err(diverged(t, "nonfinite regression coefficient".into()));
    }
    if !theta.iter().all(|v| v.is_finite()) {
        return Err(diverged(t, "nonfinite spatial effect".into()));
    }
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(diverged(t, format!("sigma2 = {sigma2}")));
    }
    if !(tau2.is_finite() && tau2 > 0.0) {
        return Err(diverged(t, format!("tau2 = {tau2}")));
    }
    if spatial && !(rho > 0.0 && rho < 1.0) {
        return Err(diverged(t, format!("rho = {rho}")));
    }
    Ok(())
}
