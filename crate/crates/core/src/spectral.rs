//! Spectral form of the Leroux precision.
//!
//! With L = U diag(lambda) U^T the Leroux precision Q(rho) = rho L + (1 - rho) I
//! shares the basis U and has eigenvalues q_i = rho * lambda_i + 1 - rho,
//! all positive for rho in [0, 1). Determinants, quadratic forms, and the
//! marginal covariance inverse
//!
//!   Omega^-1 = sigma^-2 I - (tau^2 / sigma^2) * sum_i Z u_i u_i^T Z^T
//!              / (sigma^2 q_i + m tau^2)
//!
//! (balanced designs, Z^T Z = m I) all reduce to O(n) work in that basis.
//! The decomposition itself is dense and O(n^3); the supported range is
//! n <= 2000, which covers maps far past the sizes the samplers target.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::Laplacian;

/// Hard cap on map size for the dense eigendecomposition.
pub const MAX_UNITS: usize = 2000;

/// Variance components of the marginal covariance
/// Omega = tau^2 Z Q(rho)^-1 Z^T + sigma^2 I.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceSpec {
    sigma2: f64,
    tau2: f64,
    rho: f64,
}

impl CovarianceSpec {
    pub fn new(sigma2: f64, tau2: f64, rho: f64) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::InvalidParam(format!(
                "sigma2 must be positive and finite, got {sigma2}"
            )));
        }
        if !(tau2.is_finite() && tau2 > 0.0) {
            return Err(Error::InvalidParam(format!(
                "tau2 must be positive and finite, got {tau2}"
            )));
        }
        check_rho(rho)?;
        Ok(Self { sigma2, tau2, rho })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn tau2(&self) -> f64 {
        self.tau2
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Variance ratio kappa = tau^2 / sigma^2.
    pub fn kappa(&self) -> f64 {
        self.tau2 / self.sigma2
    }

    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        Self::new(self.sigma2, self.tau2, rho)
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if !rho.is_finite() || !(0.0..1.0).contains(&rho) {
        return Err(Error::RhoDomain(rho));
    }
    Ok(())
}

/// Eigendecomposition of a graph Laplacian, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SpectralLaplacian {
    eigvals: Vec<f64>,
    u: DMatrix<f64>,
}

impl SpectralLaplacian {
    /// Decomposes a Laplacian from a connected graph.
    ///
    /// The returned eigenvalues are sorted ascending with the leading value
    /// clamped to exactly 0 (|lambda_1| <= 1e-9 is treated as the structural
    /// zero). Columns of U are sign-fixed so the first entry above 1e-12 in
    /// magnitude is positive, making the basis reproducible. Fails when the
    /// second eigenvalue is numerically zero (disconnected graph), when the
    /// matrix is not positive semidefinite, or when the factorization does
    /// not meet the orthonormality (1e-10) and reconstruction (1e-8) checks.
    pub fn decompose(lap: &Laplacian) -> Result<Self> {
        let n = lap.n();
        if n > MAX_UNITS {
            return Err(Error::InvalidParam(format!(
                "map has {n} units, dense decomposition supports at most {MAX_UNITS}"
            )));
        }
        let se = nalgebra::SymmetricEigen::try_new(lap.matrix().clone(), f64::EPSILON, 0)
            .ok_or_else(|| Error::Numeric("symmetric eigendecomposition failed".into()))?;

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            se.eigenvalues[a]
                .partial_cmp(&se.eigenvalues[b])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let mut eigvals: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
        let mut u = DMatrix::<f64>::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            u.set_column(dst, &se.eigenvectors.column(src));
        }
        fix_signs(&mut u);

        if eigvals[0] < -1e-9 {
            return Err(Error::Numeric(format!(
                "laplacian is not positive semidefinite: lambda_1 = {}",
                eigvals[0]
            )));
        }
        if eigvals[0].abs() <= 1e-9 {
            eigvals[0] = 0.0;
        }
        if n > 1 && eigvals[1] <= 1e-9 {
            return Err(Error::NotConnected);
        }

        let spec = Self { eigvals, u };
        spec.check_orthonormal(1e-10)?;
        spec.check_reconstruction(lap.matrix(), 1e-8)?;
        Ok(spec)
    }

    /// Wraps a caller-supplied spectrum. Eigenvalues must be finite,
    /// nonnegative, and ascending; columns must be orthonormal within 1e-10.
    /// No connectivity structure is assumed, so synthetic spectra (for
    /// instance all eigenvalues equal to 1) are accepted.
    pub fn from_parts(eigvals: Vec<f64>, u: DMatrix<f64>) -> Result<Self> {
        let n = eigvals.len();
        if u.nrows() != n || u.ncols() != n {
            return Err(Error::Shape {
                expected: n,
                got: u.nrows().max(u.ncols()),
            });
        }
        if n == 0 {
            return Err(Error::InvalidParam("empty spectrum".into()));
        }
        for w in eigvals.windows(2) {
            if !(w[1] >= w[0]) {
                return Err(Error::InvalidParam("eigenvalues must be ascending".into()));
            }
        }
        if !eigvals.iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(Error::InvalidParam(
                "eigenvalues must be finite and nonnegative".into(),
            ));
        }
        let spec = Self { eigvals, u };
        spec.check_orthonormal(1e-10)?;
        Ok(spec)
    }

    fn check_orthonormal(&self, tol: f64) -> Result<()> {
        let n = self.n();
        let gram = self.u.transpose() * &self.u;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                if (gram[(i, j)] - target).abs() > tol {
                    return Err(Error::Numeric(format!(
                        "basis not orthonormal: gram[{i},{j}] = {}",
                        gram[(i, j)]
                    )));
                }
            }
        }
        Ok(())
    }

    fn check_reconstruction(&self, lap: &DMatrix<f64>, tol: f64) -> Result<()> {
        let lam = DMatrix::from_diagonal(&DVector::from_vec(self.eigvals.clone()));
        let rebuilt = &self.u * lam * self.u.transpose();
        let err = (lap - rebuilt).abs().max();
        if err > tol {
            return Err(Error::Numeric(format!(
                "eigendecomposition reconstruction error {err} exceeds {tol}"
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.eigvals.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigvals
    }

    /// Orthonormal eigenbasis U, columns aligned with `eigenvalues`.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// Coordinates of `v` in the eigenbasis: U^T v.
    pub fn project(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.n() {
            return Err(Error::Shape {
                expected: self.n(),
                got: v.len(),
            });
        }
        Ok(self.u.transpose() * v)
    }

    /// Eigenvalues of Q(rho) = rho L + (1 - rho) I, each rho*lambda_i + 1 - rho.
    /// All are at least 1 - rho > 0.
    pub fn q_eigenvalues(&self, rho: f64) -> Result<Vec<f64>> {
        check_rho(rho)?;
        Ok(self.eigvals.iter().map(|&l| rho * l + (1.0 - rho)).collect())
    }

    /// log |Q(rho)| as the sum of log eigenvalues.
    pub fn log_det_q(&self, rho: f64) -> Result<f64> {
        Ok(self.q_eigenvalues(rho)?.iter().map(|q| q.ln()).sum())
    }

    /// theta^T Q(rho) theta = sum_i q_i alpha_i^2 with alpha = U^T theta.
    pub fn theta_quadform(&self, rho: f64, theta: &DVector<f64>) -> Result<f64> {
        let q = self.q_eigenvalues(rho)?;
        let alpha = self.project(theta)?;
        Ok(q.iter().zip(alpha.iter()).map(|(qi, a)| qi * a * a).sum())
    }
}

/// Applies Omega^-1 to `v` without forming Omega, for a balanced design with
/// `m` replicates per area. `membership[r]` is the 0-based area of row r; the
/// result is exact for any row ordering as long as each area appears exactly
/// `m` times. Cost is O(nm + n^2).
pub fn omega_inverse_action(
    spec: &SpectralLaplacian,
    cov: &CovarianceSpec,
    m: usize,
    membership: &[usize],
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = spec.n();
    if m == 0 {
        return Err(Error::InvalidParam("m must be at least 1".into()));
    }
    if membership.len() != v.len() {
        return Err(Error::Shape {
            expected: membership.len(),
            got: v.len(),
        });
    }
    if membership.len() != n * m {
        return Err(Error::Unbalanced(format!(
            "expected {} rows for n = {n}, m = {m}, got {}",
            n * m,
            membership.len()
        )));
    }
    let mut counts = vec![0usize; n];
    let mut area_sums = DVector::<f64>::zeros(n);
    for (r, &a) in membership.iter().enumerate() {
        if a >= n {
            return Err(Error::InvalidGraph(format!(
                "membership {a} out of range for n = {n}"
            )));
        }
        counts[a] += 1;
        area_sums[a] += v[r];
    }
    if let Some(a) = counts.iter().position(|&c| c != m) {
        return Err(Error::Unbalanced(format!(
            "area {a} has {} rows, expected m = {m}",
            counts[a]
        )));
    }

    let q = spec.q_eigenvalues(cov.rho())?;
    let alpha = spec.project(&area_sums)?;
    let mf = m as f64;
    let ratio = cov.tau2() / cov.sigma2();
    let coeff = DVector::from_iterator(
        n,
        (0..n).map(|i| ratio * alpha[i] / (cov.sigma2() * q[i] + mf * cov.tau2())),
    );
    let correction = spec.basis() * coeff;

    let inv_s2 = 1.0 / cov.sigma2();
    let mut out = DVector::<f64>::zeros(v.len());
    for (r, &a) in membership.iter().enumerate() {
        out[r] = v[r] * inv_s2 - correction[a];
    }
    Ok(out)
}

fn fix_signs(u: &mut DMatrix<f64>) {
    let n = u.nrows();
    for c in 0..u.ncols() {
        let mut flip = false;
        for r in 0..n {
            let e = u[(r, c)];
            if e.abs() > 1e-12 {
                flip = e < 0.0;
                break;
            }
        }
        if flip {
            for r in 0..n {
                u[(r, c)] = -u[(r, c)];
            }
        }
    }
}
