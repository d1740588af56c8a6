//! Dense-matrix oracles and the closed-form validation harness.
//!
//! Everything here assembles explicit matrices and solves them with LU,
//! sharing no code with the spectral identities it is checking. The harness
//! replays random instances through both routes and reports the worst
//! relative disagreement; `perturb` injects a deliberate relative error into
//! the closed form so callers can prove the harness actually bites.

use nalgebra::{DMatrix, DVector};
use rand::seq::IndexedRandom;
use rand::Rng;

use crate::data::{gen_covariate, standardize_values, CovariateStructure};
use crate::error::{Error, Result};
use crate::graph::{AreaGraph, Laplacian};
use crate::rng::{derive_seed, rng_from};
use crate::spectral::{CovarianceSpec, SpectralLaplacian};
use crate::threshold::{precision_nonspatial, precision_spatial, projections};

/// Acceptance tolerance for closed-form vs dense relative error.
pub const ORACLE_TOL: f64 = 1e-8;

/// Q(rho) = rho L + (1 - rho) I assembled densely.
pub fn dense_q(lap: &Laplacian, rho: f64) -> DMatrix<f64> {
    let n = lap.n();
    let mut q = lap.matrix() * rho;
    for i in 0..n {
        q[(i, i)] += 1.0 - rho;
    }
    q
}

/// Omega = tau^2 Z Q(rho)^-1 Z^T + sigma^2 I for a balanced area-major
/// design (row r belongs to area r / m).
pub fn dense_omega(lap: &Laplacian, cov: &CovarianceSpec, m: usize) -> DMatrix<f64> {
    let n = lap.n();
    let qinv = dense_q(lap, cov.rho())
        .try_inverse()
        .expect("Q(rho) is positive definite for rho in [0, 1)");
    let rows = n * m;
    let mut omega = DMatrix::<f64>::zeros(rows, rows);
    for r in 0..rows {
        for c in 0..rows {
            omega[(r, c)] = cov.tau2() * qinv[(r / m, c / m)];
        }
    }
    for r in 0..rows {
        omega[(r, r)] += cov.sigma2();
    }
    omega
}

/// x^T Omega^-1 x for an area-major balanced design, via dense LU.
pub fn dense_xt_omega_inv_x(
    lap: &Laplacian,
    cov: &CovarianceSpec,
    m: usize,
    x: &[f64],
) -> Result<f64> {
    if x.len() != lap.n() * m {
        return Err(Error::Shape {
            expected: lap.n() * m,
            got: x.len(),
        });
    }
    let omega = dense_omega(lap, cov, m);
    let xv = DVector::from_column_slice(x);
    let sol = omega
        .lu()
        .solve(&xv)
        .ok_or_else(|| Error::Numeric("dense Omega solve failed".into()))?;
    Ok(xv.dot(&sol))
}

/// One random instance replayed through both routes.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCase {
    /// Case index within the run; combined with the master seed it fully
    /// reproduces the instance.
    pub case: u64,
    pub n: usize,
    pub m: usize,
    pub rho: f64,
    pub tau2: f64,
    pub sigma2: f64,
    pub structure: CovariateStructure,
    pub rel_err_spatial: f64,
    pub rel_err_nonspatial: f64,
}

impl OracleCase {
    pub fn worst(&self) -> f64 {
        self.rel_err_spatial.max(self.rel_err_nonspatial)
    }
}

/// Outcome of a validation run.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub master_seed: u64,
    pub tol: f64,
    pub cases: Vec<OracleCase>,
    pub max_rel_err: f64,
    /// Case indices whose error exceeded the tolerance.
    pub failures: Vec<u64>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// The case with the largest error, if any cases ran.
    pub fn worst_case(&self) -> Option<&OracleCase> {
        self.cases
            .iter()
            .max_by(|a, b| a.worst().partial_cmp(&b.worst()).unwrap())
    }
}

const RHO_CHOICES: [f64; 4] = [0.0, 0.3, 0.7, 0.95];
const VARIANCE_CHOICES: [(f64, f64); 3] = [(0.05, 0.95), (0.5, 0.5), (0.95, 0.05)];

/// Replays `n_cases` random instances (n <= 10, m <= 5) of the closed-form
/// slope precision against the dense oracle. Deterministic in `master_seed`.
/// `perturb` scales the closed-form values by (1 + perturb); pass 0 for an
/// honest run.
pub fn run_validation(n_cases: usize, master_seed: u64, perturb: f64) -> Result<ValidationReport> {
    if n_cases == 0 {
        return Err(Error::InvalidParam("need at least one case".into()));
    }
    let mut cases = Vec::with_capacity(n_cases);
    let mut failures = Vec::new();
    let mut max_rel_err: f64 = 0.0;
    for case in 0..n_cases as u64 {
        let mut rng = rng_from(master_seed, &[case, 1]);
        let n = rng.random_range(2..=10usize);
        let m = rng.random_range(1..=5usize);
        let rho = *RHO_CHOICES.choose(&mut rng).expect("nonempty");
        let (tau2, sigma2) = *VARIANCE_CHOICES.choose(&mut rng).expect("nonempty");
        let structure = *CovariateStructure::ALL.choose(&mut rng).expect("nonempty");
        let cov = CovarianceSpec::new(sigma2, tau2, rho)?;

        let graph = AreaGraph::random_connected(n, derive_seed(master_seed, &[case, 2]))?;
        let lap = graph.laplacian();
        let spec = SpectralLaplacian::decompose(&lap)?;
        let raw = gen_covariate(structure, n, m, derive_seed(master_seed, &[case, 3]));
        let (x, _, _) = standardize_values(&raw)?;
        let xbar: Vec<f64> = (0..n)
            .map(|a| x[a * m..(a + 1) * m].iter().sum::<f64>() / m as f64)
            .collect();
        let d = projections(&spec, &xbar)?;

        let closed_sp = precision_spatial(&spec, &cov, m, &d)? * (1.0 + perturb);
        let closed_ns = precision_nonspatial(&cov, n, m, &d)? * (1.0 + perturb);
        let dense_sp = dense_xt_omega_inv_x(&lap, &cov, m, &x)?;
        let dense_ns = dense_xt_omega_inv_x(&lap, &cov.with_rho(0.0)?, m, &x)?;

        let rel_err_spatial = (closed_sp - dense_sp).abs() / dense_sp.abs();
        let rel_err_nonspatial = (closed_ns - dense_ns).abs() / dense_ns.abs();
        let oc = OracleCase {
            case,
            n,
            m,
            rho,
            tau2,
            sigma2,
            structure,
            rel_err_spatial,
            rel_err_nonspatial,
        };
        if oc.worst() > ORACLE_TOL {
            failures.push(case);
        }
        max_rel_err = max_rel_err.max(oc.worst());
        cases.push(oc);
    }
    Ok(ValidationReport {
        master_seed,
        tol: ORACLE_TOL,
        cases,
        max_rel_err,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_q_matches_definition_entrywise() {
        let g = AreaGraph::new(3, [(0, 1), (1, 2)]).unwrap();
        let q = dense_q(&g.laplacian(), 0.4);
        // L = [[1,-1,0],[-1,2,-1],[0,-1,1]], Q = 0.4 L + 0.6 I
        let expected = DMatrix::from_row_slice(
            3,
            3,
            &[1.0, -0.4, 0.0, -0.4, 1.4, -0.4, 0.0, -0.4, 1.0],
        );
        assert!((q - expected).abs().max() < 1e-15);
    }

    #[test]
    fn dense_omega_has_block_structure() {
        let g = AreaGraph::new(2, [(0, 1)]).unwrap();
        let cov = CovarianceSpec::new(0.5, 2.0, 0.6).unwrap();
        // Q = [[1, -0.6], [-0.6, 1]], det = 0.64,
        // Qinv = [[1, 0.6], [0.6, 1]] / 0.64
        let omega = dense_omega(&g.laplacian(), &cov, 2);
        let qd = 1.0 / 0.64;
        let qo = 0.6 / 0.64;
        assert!((omega[(0, 0)] - (2.0 * qd + 0.5)).abs() < 1e-12);
        assert!((omega[(0, 1)] - 2.0 * qd).abs() < 1e-12);
        assert!((omega[(0, 2)] - 2.0 * qo).abs() < 1e-12);
        assert!((omega[(2, 3)] - 2.0 * qd).abs() < 1e-12);
        assert!((omega[(3, 3)] - (2.0 * qd + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn honest_run_passes_well_under_tolerance() {
        let report = run_validation(60, 424_242, 0.0).unwrap();
        assert!(report.passed());
        assert!(
            report.max_rel_err < 1e-10,
            "max rel err {}",
            report.max_rel_err
        );
        assert_eq!(report.cases.len(), 60);
    }

    #[test]
    fn perturbed_run_is_caught() {
        let report = run_validation(20, 7, 1e-6).unwrap();
        assert!(!report.passed());
        assert_eq!(report.failures.len(), 20);
        assert!(report.worst_case().unwrap().worst() > ORACLE_TOL);
    }

    #[test]
    fn validation_is_deterministic() {
        let a = run_validation(25, 99, 0.0).unwrap();
        let b = run_validation(25, 99, 0.0).unwrap();
        assert_eq!(a, b);
    }
}
