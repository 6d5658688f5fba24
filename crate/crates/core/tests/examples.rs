use mcpca_core::continuous::fit_continuous;
use mcpca_core::data::DataMatrix;
use mcpca_core::discrete::{bcd_fit, build_r_matrix, ky_fan_upper_bound};
use mcpca_core::linalg::{sym_eig, Matrix};
use mcpca_core::metrics::split_indices;
use mcpca_core::pca::pca_fit;
use mcpca_core::restart::FitConfig;
use mcpca_core::sample::{consistency_probe, sample_fit};
use mcpca_core::synth::{oracle_ternary, JointDistribution};
use mcpca_core::Error;

#[test]
fn two_by_two_correlation_spectrum() {
    for rho in [-0.9, -0.3, 0.0, 0.5, 0.99] {
        let m = Matrix::from_rows(&[vec![1.0, rho], vec![rho, 1.0]]).unwrap();
        let values = sym_eig(&m).unwrap().values;
        assert!((values[0] - (1.0 + rho.abs())).abs() < 1e-14);
        assert!((values[1] - (1.0 - rho.abs())).abs() < 1e-14);
    }
}

#[test]
fn copies_of_one_variable_are_fully_correlated() {
    for (k, p) in [(2, 2), (3, 3), (4, 2)] {
        let model = JointDistribution::strictly_dependent(k, p).unwrap().model().unwrap();
        let fit = bcd_fit(&model, 1, &FitConfig::default()).unwrap();
        assert!((fit.objective() - p as f64).abs() < 1e-9);
    }
}

#[test]
fn independent_variables_cannot_be_correlated() {
    let joint = JointDistribution::independent(&[vec![0.2, 0.8], vec![0.3, 0.3, 0.4], vec![0.5, 0.5]]).unwrap();
    let model = joint.model().unwrap();
    for q in 1..=3 {
        let fit = bcd_fit(&model, q, &FitConfig::default()).unwrap();
        assert!((fit.objective() - q as f64).abs() < 1e-9);
        let bound = ky_fan_upper_bound(&build_r_matrix(&model).unwrap(), q).unwrap();
        assert!((bound - q as f64).abs() < 1e-9);
    }
}

#[test]
fn dependent_pair_is_exact_at_every_sample_size() {
    let truth = JointDistribution::strictly_dependent(3, 2).unwrap();
    for (_, value) in consistency_probe(&truth, &[10, 100, 1000], 1, &FitConfig::default(), 4).unwrap() {
        assert!((value - 2.0).abs() < 1e-9);
    }
}

#[test]
fn oracle_improves_on_nested_grids() {
    let model = JointDistribution::random_dirichlet(&[3, 3, 3], 11).unwrap().model().unwrap();
    for q in 1..=2 {
        let values: Vec<f64> = [36, 72, 144]
            .iter()
            .map(|&g| oracle_ternary(&model, q, g).unwrap().value)
            .collect();
        assert!(values.windows(2).all(|w| w[1] >= w[0]));
        let bcd = bcd_fit(&model, q, &FitConfig::default()).unwrap().objective();
        assert!(values[2] <= bcd + 1e-9);
        assert!(bcd - values[2] < 1e-2);
    }
}

#[test]
fn oracle_rejects_coarse_grids_and_other_shapes() {
    let model = JointDistribution::random_dirichlet(&[3, 3, 3], 1).unwrap().model().unwrap();
    assert!(oracle_ternary(&model, 1, 35).is_err());
    let binary = JointDistribution::random_dirichlet(&[2, 3, 3], 1).unwrap().model().unwrap();
    assert!(oracle_ternary(&binary, 1, 36).is_err());
}

#[test]
fn linear_transforms_reproduce_pca() {
    let x: Vec<Vec<f64>> = vec![
        vec![1.0, 2.0, 3.5, 4.0, 5.5, 7.0, 6.0, 8.0],
        vec![2.0, 1.0, 4.0, 3.0, 6.5, 5.0, 8.0, 7.5],
        vec![0.3, -1.0, 0.8, 2.0, -0.5, 1.1, 0.0, 0.9],
    ];
    let data = DataMatrix::from_continuous(x).unwrap();
    let pca = pca_fit(&data.numeric_matrix(), 2).unwrap();
    let model = fit_continuous(&data, 2, 1, &FitConfig::default()).unwrap();
    assert_eq!(model.objective(), pca.eigen.values[0] + pca.eigen.values[1]);
}

#[test]
fn invalid_rank_is_reported() {
    let data = DataMatrix::from_codes(vec![vec![0, 1, 1, 0], vec![1, 0, 1, 0]]).unwrap();
    assert!(matches!(sample_fit(&data, 0, &FitConfig::default()), Err(Error::QOutOfRange { .. })));
}

#[test]
fn split_sizes_round_the_fraction() {
    let (train, test) = split_indices(10, 0.75, 3).unwrap();
    assert_eq!((train.len(), test.len()), (8, 2));
    let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
    all.sort_unstable();
    assert_eq!(all, (0..10).collect::<Vec<_>>());
    assert!(split_indices(1, 0.5, 0).is_err());
}
