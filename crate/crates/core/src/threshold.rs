//! Closed-form sample-size threshold.
//!
//! For the balanced model y_ij = beta0 + beta1 x_ij + theta_i + eps_ij with
//! Leroux effects, the marginal precision of the slope has a closed spectral
//! form. Writing xbar for the vector of area means of the standardized
//! covariate and d_i = (u_i^T xbar)^2 for its squared spectral coordinates:
//!
//!   prec(rho) = nm / sigma^2
//!             - (m^2 tau^2 / sigma^2) * sum_i d_i / (sigma^2 q_i + m tau^2)
//!
//! with q_i = rho lambda_i + 1 - rho. At rho = 0 every q_i is 1, which is the
//! precision an exchangeable (nonspatial) model sees. The relative gap
//! between the two decays like 1/m with leading term
//!
//!   |rho sigma^2 sum_i d_i (1 - lambda_i)| / (tau^2 m (n - d.))
//!
//! so the smallest replicate count keeping the gap below a tolerance gamma is
//!
//!   m* = max(2, ceil(|sigma^2 rho sum_i d_i (1 - lambda_i)|
//!                    / (gamma tau^2 (n - sum_i xbar_i^2))))
//!
//! When the area means carry all covariate mass (sum_i xbar_i^2 -> n, the
//! area-level covariate case) the denominator vanishes and no finite m makes
//! the models agree: m* is infinite and the spatial model is always needed.

use crate::error::{Error, Result};
use crate::spectral::{CovarianceSpec, SpectralLaplacian};

/// Relative slack used to call the threshold denominator zero.
const INFINITE_DENOM_REL_TOL: f64 = 1e-8;

/// Squared spectral coordinates d_i = (u_i^T xbar)^2 of the area means.
pub fn projections(spec: &SpectralLaplacian, xbar: &[f64]) -> Result<Vec<f64>> {
    if xbar.len() != spec.n() {
        return Err(Error::Shape {
            expected: spec.n(),
            got: xbar.len(),
        });
    }
    let v = nalgebra::DVector::from_column_slice(xbar);
    let alpha = spec.project(&v)?;
    Ok(alpha.iter().map(|a| a * a).collect())
}

fn check_d(n: usize, d: &[f64]) -> Result<()> {
    if d.len() != n {
        return Err(Error::Shape {
            expected: n,
            got: d.len(),
        });
    }
    if !d.iter().all(|v| v.is_finite() && *v >= 0.0) {
        return Err(Error::InvalidParam(
            "spectral coefficients must be finite and nonnegative".into(),
        ));
    }
    Ok(())
}

fn check_m(m: usize) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidParam("m must be at least 1".into()));
    }
    Ok(m as f64)
}

/// Shared evaluation of nm/sigma^2 - (m^2 tau^2/sigma^2) sum_i d_i / (sigma^2 q_i + m tau^2).
///
/// Both precision routines run through this loop so that the nonspatial
/// formula is bit-identical to the spatial formula at rho = 0.
fn precision_with_q(cov: &CovarianceSpec, n: usize, m: f64, d: &[f64], q: impl Fn(usize) -> f64) -> Result<f64> {
    let s2 = cov.sigma2();
    let t2 = cov.tau2();
    let mut sum = 0.0;
    for (i, &di) in d.iter().enumerate() {
        sum += di / (s2 * q(i) + m * t2);
    }
    let prec = (n as f64) * m / s2 - m * m * t2 / s2 * sum;
    if !(prec > 0.0) {
        return Err(Error::DegeneratePrecision(prec));
    }
    Ok(prec)
}

/// Marginal precision of the slope under the spatial model.
pub fn precision_spatial(
    spec: &SpectralLaplacian,
    cov: &CovarianceSpec,
    m: usize,
    d: &[f64],
) -> Result<f64> {
    let mf = check_m(m)?;
    check_d(spec.n(), d)?;
    let rho = cov.rho();
    let lam = spec.eigenvalues();
    precision_with_q(cov, spec.n(), mf, d, |i| rho * lam[i] + (1.0 - rho))
}

/// Marginal precision of the slope under the exchangeable (rho = 0) model.
/// Matches `precision_spatial` at rho = 0 exactly: the q_i are all 1 and the
/// arithmetic path is shared.
pub fn precision_nonspatial(cov: &CovarianceSpec, n: usize, m: usize, d: &[f64]) -> Result<f64> {
    let mf = check_m(m)?;
    check_d(n, d)?;
    precision_with_q(cov, n, mf, d, |_| 1.0)
}

/// Exact relative precision gap |prec(0) - prec(rho)| / prec(rho).
pub fn relative_difference(
    spec: &SpectralLaplacian,
    cov: &CovarianceSpec,
    m: usize,
    d: &[f64],
) -> Result<f64> {
    let p_rho = precision_spatial(spec, cov, m, d)?;
    let p_zero = precision_nonspatial(cov, spec.n(), m, d)?;
    Ok((p_zero - p_rho).abs() / p_rho)
}

/// Leading 1/m term of the relative gap. Errors with `InfiniteSignal` when
/// the area means carry essentially all covariate mass (d. >= n within an
/// absolute 1e-10), in which case no finite m closes the gap.
pub fn leading_order_difference(
    spec: &SpectralLaplacian,
    cov: &CovarianceSpec,
    m: usize,
    d: &[f64],
) -> Result<f64> {
    let mf = check_m(m)?;
    check_d(spec.n(), d)?;
    let nf = spec.n() as f64;
    let d_dot: f64 = d.iter().sum();
    if d_dot >= nf - 1e-10 {
        return Err(Error::InfiniteSignal);
    }
    let numerator_sum: f64 = d
        .iter()
        .zip(spec.eigenvalues())
        .map(|(di, l)| di * (1.0 - l))
        .sum();
    Ok((cov.rho() * cov.sigma2() * numerator_sum).abs() / (cov.tau2() * mf * (nf - d_dot)))
}

/// Smallest balanced replicate count at which the nonspatial model is safe,
/// or `Infinite` when no such count exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MStar {
    Finite(u64),
    Infinite,
}

impl MStar {
    pub fn is_finite(&self) -> bool {
        matches!(self, MStar::Finite(_))
    }

    pub fn as_f64(&self) -> f64 {
        match self {
            MStar::Finite(m) => *m as f64,
            MStar::Infinite => f64::INFINITY,
        }
    }
}

impl std::fmt::Display for MStar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MStar::Finite(m) => write!(f, "{m}"),
            MStar::Infinite => write!(f, "INFINITE"),
        }
    }
}

/// Threshold decision and the quantities that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    /// Squared spectral coordinates of the area means, ascending eigenvalue
    /// order.
    pub d: Vec<f64>,
    /// Total spectral mass sum_i d_i. Parseval: equals sum_i xbar_i^2.
    pub d_dot: f64,
    /// sum_i d_i (1 - lambda_i), the signed spectral imbalance.
    pub numerator_sum: f64,
    pub m_star: MStar,
    pub gamma: f64,
    pub rho: f64,
    pub kappa: f64,
}

impl ThresholdReport {
    /// Key-value text block, one `key = value` per line, fields in type
    /// order. Floats use shortest-round-trip formatting.
    pub fn to_text(&self) -> String {
        let d_list = self
            .d
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "d = {}\nd_dot = {}\nnumerator_sum = {}\nm_star = {}\ngamma = {}\nrho = {}\nkappa = {}\n",
            d_list, self.d_dot, self.numerator_sum, self.m_star, self.gamma, self.rho, self.kappa
        )
    }

    /// Indices and values of the largest spectral coefficients, descending
    /// by mass. Ties resolve to the lower index.
    pub fn top_coefficients(&self, k: usize) -> Vec<(usize, f64)> {
        let mut idx: Vec<usize> = (0..self.d.len()).collect();
        idx.sort_by(|&a, &b| {
            self.d[b]
                .partial_cmp(&self.d[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        idx.into_iter().take(k).map(|i| (i, self.d[i])).collect()
    }
}

/// Computes the threshold report for a standardized covariate's area means.
pub fn threshold_report(
    spec: &SpectralLaplacian,
    cov: &CovarianceSpec,
    gamma: f64,
    xbar: &[f64],
) -> Result<ThresholdReport> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParam(format!(
            "gamma must be positive and finite, got {gamma}"
        )));
    }
    let d = projections(spec, xbar)?;
    let nf = spec.n() as f64;
    let d_dot: f64 = d.iter().sum();
    let numerator_sum: f64 = d
        .iter()
        .zip(spec.eigenvalues())
        .map(|(di, l)| di * (1.0 - l))
        .sum();
    let sum_sq_xbar: f64 = xbar.iter().map(|v| v * v).sum();

    let numerator_abs = (cov.sigma2() * cov.rho() * numerator_sum).abs();
    let m_star = if numerator_abs == 0.0 {
        // rho = 0 or exactly balanced spectral mass: the models already agree
        // at leading order, only the floor applies.
        MStar::Finite(2)
    } else if (nf - sum_sq_xbar) / nf <= INFINITE_DENOM_REL_TOL {
        MStar::Infinite
    } else {
        let bound = numerator_abs / (gamma * cov.tau2() * (nf - sum_sq_xbar));
        MStar::Finite((bound.ceil() as u64).max(2))
    };

    Ok(ThresholdReport {
        d,
        d_dot,
        numerator_sum,
        m_star,
        gamma,
        rho: cov.rho(),
        kappa: cov.kappa(),
    })
}

/// Convenience wrapper returning only the decision.
pub fn m_star(
    spec: &SpectralLaplacian,
    cov: &CovarianceSpec,
    gamma: f64,
    xbar: &[f64],
) -> Result<MStar> {
    Ok(threshold_report(spec, cov, gamma, xbar)?.m_star)
}

/// Verdict of the conservative unbalanced-design check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnbalancedVerdict {
    /// Even the smallest per-area count meets the threshold.
    Sufficient,
    /// Some area falls below the threshold.
    Insufficient,
    /// The threshold is infinite; the spatial model is needed regardless.
    SpatialRequired,
}

impl std::fmt::Display for UnbalancedVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Sufficient => write!(f, "sufficient"),
            Self::Insufficient => write!(f, "insufficient"),
            Self::SpatialRequired => write!(f, "spatial model required"),
        }
    }
}

/// Result of the min-count rule for unbalanced designs.
#[derive(Debug, Clone, PartialEq)]
pub struct UnbalancedCheck {
    pub report: ThresholdReport,
    pub min_m: usize,
    pub verdict: UnbalancedVerdict,
}

/// Conservative threshold check for unbalanced designs: the balanced formula
/// is applied to the smallest per-area count, so a `Sufficient` verdict is
/// safe for every area. Balanced counts reduce to the plain comparison.
pub fn conservative_m_star_unbalanced(
    spec: &SpectralLaplacian,
    cov: &CovarianceSpec,
    gamma: f64,
    xbar: &[f64],
    counts: &[usize],
) -> Result<UnbalancedCheck> {
    if counts.is_empty() {
        return Err(Error::InvalidParam("counts must be nonempty".into()));
    }
    if counts.len() != spec.n() {
        return Err(Error::Shape {
            expected: spec.n(),
            got: counts.len(),
        });
    }
    if counts.iter().any(|&c| c == 0) {
        return Err(Error::InvalidParam("every area needs at least one row".into()));
    }
    let report = threshold_report(spec, cov, gamma, xbar)?;
    let min_m = *counts.iter().min().expect("nonempty");
    let verdict = match report.m_star {
        MStar::Infinite => UnbalancedVerdict::SpatialRequired,
        MStar::Finite(ms) => {
            if (min_m as u64) >= ms {
                UnbalancedVerdict::Sufficient
            } else {
                UnbalancedVerdict::Insufficient
            }
        }
    };
    Ok(UnbalancedCheck {
        report,
        min_m,
        verdict,
    })
}
