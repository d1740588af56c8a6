//! Replicated areal data.
//!
//! Rows are observations (y, x) tagged with the 0-based area that produced
//! them. Fitting and the closed-form threshold both assume the covariate has
//! been standardized to mean 0 and population variance 1 over the pooled
//! rows, so standardization is tracked as dataset state rather than left to
//! callers.
//!
//! The CSV interchange format is `area,y,x` with 1-based area ids and floats
//! printed with 17 significant digits, which round-trips f64 exactly.

use std::path::Path;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::rng_from;
use crate::spectral::{CovarianceSpec, SpectralLaplacian};

/// How the covariate relates to areas in simulated data.
///
/// C1 draws every row independently, C2 centers rows on an area-level mean,
/// C3 uses the area-level mean itself so the covariate is constant within
/// each area.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CovariateStructure {
    C1,
    C2,
    C3,
}

impl CovariateStructure {
    pub const ALL: [CovariateStructure; 3] = [Self::C1, Self::C2, Self::C3];

    /// Stable small integer used in seed derivation.
    pub fn tag(self) -> u64 {
        match self {
            Self::C1 => 1,
            Self::C2 => 2,
            Self::C3 => 3,
        }
    }
}

impl std::str::FromStr for CovariateStructure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "C1" => Ok(Self::C1),
            "C2" => Ok(Self::C2),
            "C3" => Ok(Self::C3),
            other => Err(Error::Config(format!(
                "unknown covariate structure `{other}`, expected C1, C2, or C3"
            ))),
        }
    }
}

impl std::fmt::Display for CovariateStructure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::C1 => write!(f, "C1"),
            Self::C2 => write!(f, "C2"),
            Self::C3 => write!(f, "C3"),
        }
    }
}

/// Observations grouped by area membership.
#[derive(Debug, Clone, PartialEq)]
pub struct MultilevelDataset {
    n: usize,
    membership: Vec<usize>,
    y: Vec<f64>,
    x: Vec<f64>,
    standardized: bool,
}

impl MultilevelDataset {
    /// Builds a dataset. Every area in `0..n` must own at least one row and
    /// all values must be finite.
    pub fn new(n: usize, membership: Vec<usize>, y: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParam("dataset needs at least one area".into()));
        }
        if membership.len() != y.len() || membership.len() != x.len() {
            return Err(Error::Shape {
                expected: membership.len(),
                got: y.len().max(x.len()),
            });
        }
        if membership.is_empty() {
            return Err(Error::InvalidParam("dataset has no rows".into()));
        }
        let mut counts = vec![0usize; n];
        for &a in &membership {
            if a >= n {
                return Err(Error::InvalidParam(format!(
                    "membership {a} out of range for n = {n}"
                )));
            }
            counts[a] += 1;
        }
        if let Some(a) = counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidParam(format!("area {} has no rows", a + 1)));
        }
        if !y.iter().chain(x.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidParam("nonfinite value in dataset".into()));
        }
        Ok(Self {
            n,
            membership,
            y,
            x,
            standardized: false,
        })
    }

    pub fn n_areas(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> usize {
        self.y.len()
    }

    pub fn membership(&self) -> &[usize] {
        &self.membership
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    /// Rows per area.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n];
        for &a in &self.membership {
            counts[a] += 1;
        }
        counts
    }

    /// Common replicate count when the design is balanced.
    pub fn balanced_m(&self) -> Option<usize> {
        let counts = self.counts();
        let m = counts[0];
        counts.iter().all(|&c| c == m).then_some(m)
    }

    /// Per-area means of the covariate.
    pub fn area_means_x(&self) -> Vec<f64> {
        let mut sums = vec![0.0f64; self.n];
        let counts = self.counts();
        for (r, &a) in self.membership.iter().enumerate() {
            sums[a] += self.x[r];
        }
        sums.iter()
            .zip(counts.iter())
            .map(|(s, &c)| s / c as f64)
            .collect()
    }

    /// Centers and scales the covariate to pooled mean 0 and population
    /// variance 1. Already-standardized datasets pass through unchanged, so
    /// the operation is exactly idempotent.
    pub fn standardize(self) -> Result<Self> {
        if self.standardized {
            return Ok(self);
        }
        let (x, _, _) = standardize_values(&self.x)?;
        let nm = x.len() as f64;
        let mean: f64 = x.iter().sum::<f64>() / nm;
        let ssq: f64 = x.iter().map(|v| v * v).sum();
        if mean.abs() > 1e-10 || (ssq - nm).abs() > 1e-8 * nm {
            return Err(Error::Numeric(
                "standardization failed to reach unit scale".into(),
            ));
        }
        Ok(Self {
            standardized: true,
            x,
            ..self
        })
    }

    /// Serializes as `area,y,x` CSV, 1-based areas, exact float round trip.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(48 * self.rows() + 16);
        out.push_str("area,y,x\n");
        for r in 0..self.rows() {
            out.push_str(&format!(
                "{},{:.16e},{:.16e}\n",
                self.membership[r] + 1,
                self.y[r],
                self.x[r]
            ));
        }
        out
    }

    /// Parses the `area,y,x` format. The number of areas is the largest id
    /// seen; standardization state is not carried by the format.
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = loop {
            match lines.next() {
                Some((i, raw)) => {
                    let line = raw.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    break (i + 1, line);
                }
                None => {
                    return Err(Error::Parse {
                        line: 0,
                        msg: "empty dataset".into(),
                    })
                }
            }
        };
        if header.1 != "area,y,x" {
            return Err(Error::Parse {
                line: header.0,
                msg: format!("expected header `area,y,x`, got `{}`", header.1),
            });
        }
        let mut membership = Vec::new();
        let mut y = Vec::new();
        let mut x = Vec::new();
        for (i, raw) in lines {
            let line = raw.trim();
            let lineno = i + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',');
            let area: usize = parse_csv_field(parts.next(), lineno, "area id")?;
            let yv: f64 = parse_csv_field(parts.next(), lineno, "response")?;
            let xv: f64 = parse_csv_field(parts.next(), lineno, "covariate")?;
            if parts.next().is_some() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "expected exactly three fields".into(),
                });
            }
            if area == 0 {
                return Err(Error::IndexRange { index: 0, n: 0 });
            }
            membership.push(area - 1);
            y.push(yv);
            x.push(xv);
        }
        let n = membership.iter().map(|&a| a + 1).max().unwrap_or(0);
        Self::new(n, membership, y, x)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_str(&std::fs::read_to_string(path)?)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

fn parse_csv_field<T: std::str::FromStr>(
    tok: Option<&str>,
    line: usize,
    what: &str,
) -> Result<T> {
    let tok = tok
        .ok_or_else(|| Error::Parse {
            line,
            msg: format!("missing {what}"),
        })?
        .trim();
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("could not parse {what} from `{tok}`"),
    })
}

/// Centers and scales to population variance 1. Returns (values, mean, sd).
pub fn standardize_values(x: &[f64]) -> Result<(Vec<f64>, f64, f64)> {
    let nm = x.len() as f64;
    let mean = x.iter().sum::<f64>() / nm;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / nm;
    if var <= 1e-24 {
        return Err(Error::ConstantCovariate);
    }
    let sd = var.sqrt();
    Ok((x.iter().map(|v| (v - mean) / sd).collect(), mean, sd))
}

/// Generating parameters behind a simulated dataset.
#[derive(Debug, Clone)]
pub struct TrueParams {
    pub beta0: f64,
    pub beta1: f64,
    pub cov: CovarianceSpec,
    /// Realized spatial effects, one per area.
    pub theta: Vec<f64>,
}

/// Draws a covariate column for `n` areas with `m` rows each, area-major
/// (row r belongs to area r / m).
pub fn gen_covariate(structure: CovariateStructure, n: usize, m: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from(seed, &[structure.tag()]);
    gen_covariate_with(structure, n, m, &mut rng)
}

fn gen_covariate_with<R: Rng>(
    structure: CovariateStructure,
    n: usize,
    m: usize,
    rng: &mut R,
) -> Vec<f64> {
    let rows = n * m;
    match structure {
        CovariateStructure::C1 => (0..rows).map(|_| rng.sample(StandardNormal)).collect(),
        CovariateStructure::C2 => {
            let mu: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            (0..rows)
                .map(|r| mu[r / m] + rng.sample::<f64, _>(StandardNormal))
                .collect()
        }
        CovariateStructure::C3 => {
            let mu: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            (0..rows).map(|r| mu[r / m]).collect()
        }
    }
}

/// Samples spatial effects theta ~ N(0, tau^2 Q(rho)^-1) in the eigenbasis:
/// theta = U diag(tau / sqrt(q_i)) z with z standard normal.
pub fn sample_theta<R: Rng>(
    spec: &SpectralLaplacian,
    cov: &CovarianceSpec,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let q = spec.q_eigenvalues(cov.rho())?;
    let tau = cov.tau2().sqrt();
    let scaled = DVector::from_iterator(
        spec.n(),
        q.iter()
            .map(|&qi| tau / qi.sqrt() * rng.sample::<f64, _>(StandardNormal)),
    );
    Ok(spec.basis() * scaled)
}

/// Simulates a balanced dataset from the model
/// y_ij = beta0 + beta1 x_ij + theta_i + eps_ij.
///
/// The covariate is standardized before the response is generated, so
/// `beta1` is the effect of the standardized covariate and the returned
/// dataset is already in fitting scale. Draw order is fixed (covariate,
/// then theta, then noise, on separate streams), making output a pure
/// function of the seed.
pub fn simulate_dataset(
    spec: &SpectralLaplacian,
    cov: &CovarianceSpec,
    beta0: f64,
    beta1: f64,
    structure: CovariateStructure,
    m: usize,
    seed: u64,
) -> Result<(MultilevelDataset, TrueParams)> {
    let n = spec.n();
    if m == 0 {
        return Err(Error::InvalidParam("m must be at least 1".into()));
    }
    let mut rng_x = rng_from(seed, &[1]);
    let mut rng_theta = rng_from(seed, &[2]);
    let mut rng_eps = rng_from(seed, &[3]);

    let raw_x = gen_covariate_with(structure, n, m, &mut rng_x);
    let (x, _, _) = standardize_values(&raw_x)?;
    let theta = sample_theta(spec, cov, &mut rng_theta)?;
    let sigma = cov.sigma2().sqrt();

    let membership: Vec<usize> = (0..n * m).map(|r| r / m).collect();
    let y: Vec<f64> = (0..n * m)
        .map(|r| {
            beta0 + beta1 * x[r] + theta[membership[r]]
                + sigma * rng_eps.sample::<f64, _>(StandardNormal)
        })
        .collect();

    let ds = MultilevelDataset {
        n,
        membership,
        y,
        x,
        standardized: true,
    };
    let truth = TrueParams {
        beta0,
        beta1,
        cov: *cov,
        theta: theta.iter().copied().collect(),
    };
    Ok((ds, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::AreaGraph;

    fn toy_dataset() -> MultilevelDataset {
        MultilevelDataset::new(
            3,
            vec![0, 0, 1, 1, 2, 2],
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            vec![0.5, 1.5, -3.0, 2.0, 0.0, 7.0],
        )
        .unwrap()
    }

    #[test]
    fn standardize_hits_unit_scale_and_is_idempotent() {
        let ds = toy_dataset().standardize().unwrap();
        assert!(ds.is_standardized());
        let nm = ds.rows() as f64;
        let mean: f64 = ds.x().iter().sum::<f64>() / nm;
        let ssq: f64 = ds.x().iter().map(|v| v * v).sum();
        assert!(mean.abs() <= 1e-10);
        assert!((ssq - nm).abs() <= 1e-8 * nm);

        let again = ds.clone().standardize().unwrap();
        assert_eq!(ds, again);
    }

    #[test]
    fn standardize_rejects_constant_covariate() {
        let ds = MultilevelDataset::new(
            2,
            vec![0, 0, 1, 1],
            vec![1.0, 2.0, 3.0, 4.0],
            vec![5.0, 5.0, 5.0, 5.0],
        )
        .unwrap();
        assert!(matches!(
            ds.standardize(),
            Err(Error::ConstantCovariate)
        ));
    }

    #[test]
    fn constructor_rejects_empty_areas_and_bad_values() {
        assert!(MultilevelDataset::new(3, vec![0, 0, 2], vec![0.0; 3], vec![1.0, 2.0, 3.0]).is_err());
        assert!(MultilevelDataset::new(
            1,
            vec![0],
            vec![f64::NAN],
            vec![1.0]
        )
        .is_err());
        assert!(MultilevelDataset::new(1, vec![1], vec![0.0], vec![0.0]).is_err());
    }

    #[test]
    fn area_means_follow_membership_order() {
        let ds = MultilevelDataset::new(
            2,
            vec![1, 0, 1, 0],
            vec![0.0; 4],
            vec![10.0, 1.0, 20.0, 3.0],
        )
        .unwrap();
        let means = ds.area_means_x();
        assert_eq!(means, vec![2.0, 15.0]);
        assert_eq!(ds.balanced_m(), Some(2));
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let ds = toy_dataset().standardize().unwrap();
        let text = ds.to_csv_string();
        let back = MultilevelDataset::from_csv_str(&text).unwrap();
        assert_eq!(ds.membership(), back.membership());
        for (a, b) in ds.y().iter().zip(back.y()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in ds.x().iter().zip(back.x()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // the format does not carry standardization state
        assert!(!back.is_standardized());
    }

    #[test]
    fn csv_parser_reports_errors_with_line_numbers() {
        assert!(matches!(
            MultilevelDataset::from_csv_str("area,y\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            MultilevelDataset::from_csv_str("area,y,x\n1,0.0,oops\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            MultilevelDataset::from_csv_str("area,y,x\n1,0.0,1.0,9\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        // area ids must cover 1..=max
        assert!(MultilevelDataset::from_csv_str("area,y,x\n1,0.0,1.0\n3,0.0,2.0\n").is_err());
    }

    #[test]
    fn covariate_structures_have_the_right_granularity() {
        let n = 6;
        let m = 4;
        let c3 = gen_covariate(CovariateStructure::C3, n, m, 42);
        for a in 0..n {
            for j in 1..m {
                assert_eq!(c3[a * m], c3[a * m + j]);
            }
        }
        let c1 = gen_covariate(CovariateStructure::C1, n, m, 42);
        let distinct: std::collections::BTreeSet<u64> =
            c1.iter().map(|v| v.to_bits()).collect();
        assert_eq!(distinct.len(), n * m);

        // same seed reproduces, different seed does not
        assert_eq!(
            gen_covariate(CovariateStructure::C2, n, m, 7),
            gen_covariate(CovariateStructure::C2, n, m, 7)
        );
        assert_ne!(
            gen_covariate(CovariateStructure::C2, n, m, 7),
            gen_covariate(CovariateStructure::C2, n, m, 8)
        );
    }

    #[test]
    fn structure_parsing_round_trips() {
        for s in CovariateStructure::ALL {
            let parsed: CovariateStructure = s.to_string().parse().unwrap();
            assert_eq!(parsed, s);
        }
        assert!("c9".parse::<CovariateStructure>().is_err());
    }

    #[test]
    fn sampled_theta_matches_target_covariance() {
        // empirical covariance of theta over many draws vs tau^2 Q^-1
        let g = AreaGraph::new(4, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let lap = g.laplacian();
        let spec = SpectralLaplacian::decompose(&lap).unwrap();
        let cov = CovarianceSpec::new(1.0, 2.0, 0.6).unwrap();

        let draws = 60_000;
        let mut acc = nalgebra::DMatrix::<f64>::zeros(4, 4);
        let mut rng = crate::rng::rng_from(99, &[]);
        for _ in 0..draws {
            let t = sample_theta(&spec, &cov, &mut rng).unwrap();
            acc += &t * t.transpose();
        }
        acc /= draws as f64;

        let target = crate::validate::dense_q(&lap, cov.rho())
            .try_inverse()
            .unwrap()
            * cov.tau2();
        let err = (&acc - &target).abs().max();
        // MC error of a covariance entry is O(var / sqrt(draws)); entries
        // are O(tau^2 / (1 - rho)) = 5 here, so 0.15 is a 3 sigma cushion.
        assert!(err < 0.15, "covariance error {err}");
    }

    #[test]
    fn simulation_reproduces_noise_scale_and_truth() {
        let g = AreaGraph::random_connected(40, 5).unwrap();
        let spec = SpectralLaplacian::decompose(&g.laplacian()).unwrap();
        let cov = CovarianceSpec::new(0.25, 1.5, 0.8).unwrap();
        let m = 60;
        let (ds, truth) =
            simulate_dataset(&spec, &cov, 1.0, -2.0, CovariateStructure::C2, m, 31).unwrap();
        assert!(ds.is_standardized());
        assert_eq!(ds.rows(), 40 * m);
        assert_eq!(ds.balanced_m(), Some(m));
        assert_eq!(truth.theta.len(), 40);

        // residuals after removing the known signal should look like
        // N(0, sigma^2)
        let mut ssq = 0.0;
        let mut sum = 0.0;
        for r in 0..ds.rows() {
            let e = ds.y()[r]
                - truth.beta0
                - truth.beta1 * ds.x()[r]
                - truth.theta[ds.membership()[r]];
            ssq += e * e;
            sum += e;
        }
        let nm = ds.rows() as f64;
        let var = ssq / nm - (sum / nm) * (sum / nm);
        assert!((var - cov.sigma2()).abs() < 0.05 * cov.sigma2(), "var {var}");

        // deterministic in the seed
        let (ds2, _) =
            simulate_dataset(&spec, &cov, 1.0, -2.0, CovariateStructure::C2, m, 31).unwrap();
        assert_eq!(ds, ds2);
    }
}
