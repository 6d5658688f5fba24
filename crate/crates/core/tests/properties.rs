use mcpca_core::continuous::{discretize, equal_frequency_knots, eval_pwl, PiecewiseLinearFn};
use mcpca_core::discrete::{
    bcd_run, build_r_matrix, ky_fan_upper_bound, population_covariance, rank_one_solution, CoefficientSet,
};
use mcpca_core::linalg::{ky_fan, sym_eig, Matrix};
use mcpca_core::metrics::{explained_variance_fraction, spearman_distance_correlation, DEFAULT_PAIR_BUDGET};
use mcpca_core::restart::FitConfig;
use mcpca_core::sample::{apply_model, sample_fit};
use mcpca_core::sub_rng;
use mcpca_core::synth::{
    default_blocks, gen_block_discrete, gen_lowrank_continuous, JointDistribution, LowRankTransform,
    random_correlation,
};
use proptest::prelude::*;
use rand::Rng;

fn symmetric(n: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-10.0..10.0f64, n * n).prop_map(move |v| {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                m[(i, j)] = v[i * n + j];
                m[(j, i)] = v[i * n + j];
            }
        }
        m
    })
}

fn small_joint() -> impl Strategy<Value = JointDistribution> {
    (prop::collection::vec(2usize..=4, 2..=4), any::<u64>())
        .prop_map(|(sizes, seed)| JointDistribution::random_dirichlet(&sizes, seed).unwrap())
}

fn sampled_data() -> impl Strategy<Value = mcpca_core::data::DataMatrix> {
    (small_joint(), 40usize..=150, any::<u64>()).prop_filter_map("needs every symbol seen", |(joint, n, seed)| {
        joint.sample(n, &mut sub_rng(seed, 1, 0)).ok()?.pruned().ok()
    })
}

fn column_moments(x: &Matrix, j: usize) -> (f64, f64) {
    let c = x.column(j);
    let n = c.len() as f64;
    (c.iter().sum::<f64>() / n, c.iter().map(|v| v * v).sum::<f64>() / n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eigen_reconstructs_and_is_orthonormal(m in (1usize..=7).prop_flat_map(symmetric)) {
        let e = sym_eig(&m).unwrap();
        let n = m.rows();
        prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        let v = &e.vectors;
        let vtv = v.transpose().matmul(v).unwrap();
        prop_assert!(vtv.max_abs_diff(&Matrix::identity(n)) < 1e-12);
        let mut d = Matrix::zeros(n, n);
        for i in 0..n {
            d[(i, i)] = e.values[i];
        }
        let back = v.matmul(&d).unwrap().matmul(&v.transpose()).unwrap();
        prop_assert!(back.max_abs_diff(&m) < 1e-10 * (1.0 + m.frobenius_norm()));
    }

    #[test]
    fn bcd_stays_feasible_monotone_and_bounded(joint in small_joint(), seed in any::<u64>(), q_pick in 0usize..4) {
        let model = joint.model().unwrap();
        let q = 1 + q_pick % model.p();
        let init = CoefficientSet::random(model.marginals(), seed, 1);
        let run = bcd_run(&model, q, init, &FitConfig::default()).unwrap();
        prop_assert!(run.coefficients.constraint_violation(model.marginals()) < 1e-10);
        prop_assert!(run.objective_trajectory.windows(2).all(|w| w[1] - w[0] >= -1e-12));
        let bound = ky_fan_upper_bound(&build_r_matrix(&model).unwrap(), q).unwrap();
        prop_assert!(run.objective() <= bound + 1e-9);
        prop_assert!(run.objective() <= model.p() as f64 + 1e-9);
        let k = population_covariance(&model, &run.coefficients);
        prop_assert!(k.check().is_ok());
        let direct = ky_fan(&sym_eig(k.matrix()).unwrap().values, q).unwrap();
        prop_assert!((direct - run.objective()).abs() < 1e-9);
    }

    #[test]
    fn rank_one_closed_form_attains_bound(joint in small_joint()) {
        let model = joint.model().unwrap();
        let r = build_r_matrix(&model).unwrap();
        let sol = rank_one_solution(&r, &model).unwrap();
        let k = population_covariance(&model, &sol.coefficients);
        let top = sym_eig(k.matrix()).unwrap().values[0];
        prop_assert!((top - ky_fan_upper_bound(&r, 1).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn training_transforms_are_standardized(data in sampled_data(), q_pick in 0usize..4) {
        let q = 1 + q_pick % data.p();
        let model = sample_fit(&data, q, &FitConfig { restarts: 3, ..FitConfig::default() }).unwrap();
        let applied = apply_model(&model, &data).unwrap();
        let t = &applied.transformed;
        for j in 0..data.p() {
            let (mean, second) = column_moments(t, j);
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((second - 1.0).abs() < 1e-9);
        }
        // reconstruction error of the rank-q projection equals p minus the objective
        let n = t.rows() as f64;
        let mut residual = 0.0;
        for s in 0..t.rows() {
            let row = t.row(s);
            let mut proj = vec![0.0; row.len()];
            for v in &model.directions {
                let c: f64 = row.iter().zip(v).map(|(a, b)| a * b).sum();
                proj.iter_mut().zip(v).for_each(|(p, b)| *p += c * b);
            }
            residual += row.iter().zip(&proj).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        prop_assert!((residual / n - (data.p() as f64 - model.objective())).abs() < 1e-8);
    }

    #[test]
    fn distance_correlation_ignores_similarity_transforms(
        seed in any::<u64>(),
        angle in 0.0..std::f64::consts::TAU,
        scale in 0.1..10.0f64,
        shift in -5.0..5.0f64,
    ) {
        let mut rng = sub_rng(seed, 2, 0);
        let pts: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let truth = Matrix::from_rows(&pts).unwrap();
        let (c, s) = (angle.cos(), angle.sin());
        let moved: Vec<Vec<f64>> = pts
            .iter()
            .map(|p| vec![scale * (c * p[0] - s * p[1]) + shift, scale * (s * p[0] + c * p[1]) - shift])
            .collect();
        let estimate = Matrix::from_rows(&moved).unwrap();
        let rho = spearman_distance_correlation(&truth, &estimate, DEFAULT_PAIR_BUDGET, 0).unwrap();
        prop_assert!((rho - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pwl_hits_control_points_and_clamps(
        ws in prop::collection::vec(-5.0..5.0f64, 2..8),
        start in -10.0..10.0f64,
        steps in prop::collection::vec(0.01..3.0f64, 8),
    ) {
        let xs: Vec<f64> = steps[..ws.len()].iter().scan(start, |x, step| { *x += step; Some(*x) }).collect();
        let f = PiecewiseLinearFn::new(xs.clone(), ws.clone()).unwrap();
        for (x, w) in xs.iter().zip(&ws) {
            prop_assert_eq!(eval_pwl(&f, *x), *w);
        }
        prop_assert_eq!(eval_pwl(&f, xs[0] - 100.0), ws[0]);
        prop_assert_eq!(eval_pwl(&f, xs[xs.len() - 1] + 100.0), ws[ws.len() - 1]);
        for pair in xs.windows(2).zip(ws.windows(2)) {
            let mid = eval_pwl(&f, 0.5 * (pair.0[0] + pair.0[1]));
            prop_assert!((mid - 0.5 * (pair.1[0] + pair.1[1])).abs() < 1e-9);
        }
    }

    #[test]
    fn discretization_is_monotone(mut xs in prop::collection::vec(-1e3..1e3f64, 20..200), d in 2usize..12) {
        xs.sort_by(f64::total_cmp);
        prop_assume!(xs.len() >= d && xs[0] < xs[xs.len() - 1]);
        let knots = equal_frequency_knots(&xs, d).unwrap();
        let cells = discretize(&xs, &knots).unwrap();
        prop_assert!(cells.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!((*cells.last().unwrap() as usize) < knots.cells());
        prop_assert!(knots.cells() <= d);
    }

    #[test]
    fn full_rank_explains_everything(p in 1usize..10, seed in any::<u64>()) {
        let values = sym_eig(&random_correlation(p, seed).unwrap()).unwrap().values;
        prop_assert!((explained_variance_fraction(&values, p, p) - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn generators_are_deterministic(seed in any::<u64>()) {
        let a = gen_block_discrete(200, &default_blocks(), 10, seed).unwrap();
        let b = gen_block_discrete(200, &default_blocks(), 10, seed).unwrap();
        prop_assert_eq!(a, b);
        let c = gen_lowrank_continuous(50, 8, 2, true, LowRankTransform::Piecewise, seed).unwrap();
        let d = gen_lowrank_continuous(50, 8, 2, true, LowRankTransform::Piecewise, seed).unwrap();
        prop_assert_eq!(c, d);
        let j = JointDistribution::random_dirichlet(&[2, 3, 4], seed).unwrap();
        prop_assert_eq!(j.sample(30, &mut sub_rng(seed, 3, 0)).unwrap(), j.sample(30, &mut sub_rng(seed, 3, 0)).unwrap());
    }
}
