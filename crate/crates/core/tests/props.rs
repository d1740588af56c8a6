//! Property tests for the structural invariants.

use nalgebra::DVector;
use proptest::prelude::*;

use areal::data::{standardize_values, CovariateStructure};
use areal::graph::AreaGraph;
use areal::sampler::ProposalTuning;
use areal::spectral::{omega_inverse_action, CovarianceSpec, SpectralLaplacian};
use areal::threshold::{
    m_star, precision_nonspatial, precision_spatial, projections, relative_difference, MStar,
};
use areal::validate::dense_omega;

fn tree(n: usize, seed: u64) -> AreaGraph {
    AreaGraph::random_connected(n, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spanning_trees_are_connected_with_n_minus_one_edges(
        n in 2usize..40,
        seed in any::<u64>(),
    ) {
        let g = tree(n, seed);
        prop_assert!(g.is_connected());
        prop_assert_eq!(g.edge_count(), n - 1);
        prop_assert!(g.degrees().iter().all(|&d| d >= 1));
        let total: usize = g.degrees().iter().sum();
        prop_assert_eq!(total, 2 * (n - 1));
    }

    #[test]
    fn laplacian_rows_sum_to_zero_exactly(n in 2usize..30, seed in any::<u64>()) {
        let g = tree(n, seed);
        let lap = g.laplacian();
        for i in 0..n {
            let s: f64 = lap.matrix().row(i).iter().sum();
            prop_assert_eq!(s, 0.0);
        }
    }

    #[test]
    fn edge_list_round_trips(n in 2usize..30, seed in any::<u64>()) {
        let g = tree(n, seed);
        let h = AreaGraph::from_edge_list_str(&g.to_edge_list_string()).unwrap();
        prop_assert_eq!(g, h);
    }

    #[test]
    fn q_spectrum_is_positive_and_quadform_nonnegative(
        n in 2usize..20,
        seed in any::<u64>(),
        rho in 0.0f64..0.999,
        scale in 0.1f64..10.0,
    ) {
        let g = tree(n, seed);
        let spec = SpectralLaplacian::decompose(&g.laplacian()).unwrap();
        let q = spec.q_eigenvalues(rho).unwrap();
        prop_assert!(q.iter().all(|&v| v > 0.0));
        prop_assert!(spec.log_det_q(rho).unwrap().is_finite());
        let theta = DVector::from_fn(n, |i, _| scale * ((i as f64) - n as f64 / 2.0));
        let quad = spec.theta_quadform(rho, &theta).unwrap();
        prop_assert!(quad >= 0.0);
    }

    #[test]
    fn standardization_centers_and_scales(
        values in prop::collection::vec(-1e4f64..1e4, 3..60),
    ) {
        prop_assume!(values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - values.iter().cloned().fold(f64::INFINITY, f64::min) > 1e-6);
        let (z, _, _) = standardize_values(&values).unwrap();
        let nm = z.len() as f64;
        let mean: f64 = z.iter().sum::<f64>() / nm;
        let ssq: f64 = z.iter().map(|v| v * v).sum();
        prop_assert!(mean.abs() <= 1e-10);
        prop_assert!((ssq - nm).abs() <= 1e-8 * nm);
    }

    #[test]
    fn omega_action_inverts_the_dense_matrix(
        n in 2usize..8,
        m in 1usize..4,
        seed in any::<u64>(),
        rho in 0.0f64..0.99,
        tau2 in 0.05f64..5.0,
        sigma2 in 0.05f64..5.0,
    ) {
        let g = tree(n, seed);
        let lap = g.laplacian();
        let spec = SpectralLaplacian::decompose(&lap).unwrap();
        let cov = CovarianceSpec::new(sigma2, tau2, rho).unwrap();
        let membership: Vec<usize> = (0..n * m).map(|r| r / m).collect();
        let v = DVector::from_fn(n * m, |i, _| ((i * 13 % 7) as f64) - 3.0);
        let inv = omega_inverse_action(&spec, &cov, m, &membership, &v).unwrap();
        let back = dense_omega(&lap, &cov, m) * &inv;
        prop_assert!((&back - &v).abs().max() < 1e-8);
    }

    #[test]
    fn precision_formulas_stay_positive_and_gap_nonnegative(
        n in 3usize..15,
        m in 1usize..6,
        seed in any::<u64>(),
        rho in 0.0f64..0.99,
    ) {
        let g = tree(n, seed);
        let spec = SpectralLaplacian::decompose(&g.laplacian()).unwrap();
        let cov = CovarianceSpec::new(0.5, 0.5, rho).unwrap();
        let raw = areal::data::gen_covariate(CovariateStructure::C2, n, m, seed ^ 0xABCD);
        let (x, _, _) = standardize_values(&raw).unwrap();
        let xbar: Vec<f64> = (0..n)
            .map(|a| x[a * m..(a + 1) * m].iter().sum::<f64>() / m as f64)
            .collect();
        let d = projections(&spec, &xbar).unwrap();
        let d_dot: f64 = d.iter().sum();
        prop_assert!(d_dot <= n as f64 + 1e-8);
        let p_sp = precision_spatial(&spec, &cov, m, &d).unwrap();
        let p_ns = precision_nonspatial(&cov, n, m, &d).unwrap();
        prop_assert!(p_sp > 0.0 && p_ns > 0.0);
        prop_assert!(relative_difference(&spec, &cov, m, &d).unwrap() >= 0.0);
    }

    #[test]
    fn finite_thresholds_respect_the_floor_and_gamma_monotonicity(
        n in 3usize..15,
        m in 2usize..6,
        seed in any::<u64>(),
        rho in 0.0f64..0.99,
        gamma_lo in 0.001f64..0.05,
    ) {
        let g = tree(n, seed);
        let spec = SpectralLaplacian::decompose(&g.laplacian()).unwrap();
        let cov = CovarianceSpec::new(0.5, 0.5, rho).unwrap();
        let raw = areal::data::gen_covariate(CovariateStructure::C2, n, m, seed ^ 0x1234);
        let (x, _, _) = standardize_values(&raw).unwrap();
        let xbar: Vec<f64> = (0..n)
            .map(|a| x[a * m..(a + 1) * m].iter().sum::<f64>() / m as f64)
            .collect();
        let strict = m_star(&spec, &cov, gamma_lo, &xbar).unwrap();
        let loose = m_star(&spec, &cov, gamma_lo * 10.0, &xbar).unwrap();
        match (strict, loose) {
            (MStar::Finite(s), MStar::Finite(l)) => {
                prop_assert!(s >= 2 && l >= 2);
                prop_assert!(s >= l);
            }
            (MStar::Infinite, MStar::Infinite) => {}
            other => prop_assert!(false, "gamma changed finiteness: {other:?}"),
        }
    }

    #[test]
    fn proposal_adaptation_stays_finite(
        flips in prop::collection::vec(any::<bool>(), 1..500),
    ) {
        let mut t = ProposalTuning::default();
        for (i, &acc) in flips.iter().enumerate() {
            t = t.adapted(acc, i + 1);
        }
        prop_assert!(t.log_scale.is_finite());
        prop_assert!(t.scale() > 0.0);
    }
}
