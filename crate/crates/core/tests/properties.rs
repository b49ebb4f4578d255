//! Randomized property checks. Each block is also part of acceptance
//! criterion 12; here they run under proptest with shrinking.

mod common;

use mkv::harness::{run_experiment_with_workers, EstimatorKind, ExperimentConfig, Grid};
use mkv::models::EmpiricalMeasure;
use mkv::offline::{log_likelihood, MleOptions};
use mkv::online::{InitSpec, LearningRate, Schedule};
use mkv::simulate::simulate_ips;
use mkv::surface::IpsInvariantCovariance;
use mkv::{InitialCondition, ModelSpec, SimConfig, Theta};
use proptest::prelude::*;

use common::*;

fn th(v: &[f64]) -> Theta {
    Theta::new(v.to_vec()).unwrap()
}

fn far_from_kernel_edges(pts: &[f64], range: f64) -> bool {
    pts.iter()
        .all(|a| pts.iter().all(|b| a == b || (((a - b).abs() - range).abs() - 1.0).abs() > 0.05))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linear_fast_path_matches_pairwise(
        t1 in -3.0..3.0f64, t2 in -3.0..3.0f64,
        pts in prop::collection::vec(-5.0..5.0f64, 1..40),
    ) {
        let model = ModelSpec::linear();
        let theta = th(&[t1, t2]);
        let mu = EmpiricalMeasure::new(&pts, 1).unwrap();
        for x in &pts {
            let fast = model.drift_b(&theta, &[*x], &mu).unwrap()[0];
            let slow = model.drift_pairwise(&theta, &[*x], &mu).unwrap()[0];
            prop_assert!((fast - slow).abs() <= 1e-12 * (1.0 + slow.abs()), "{fast} vs {slow}");
        }
    }

    #[test]
    fn drift_gradient_matches_finite_differences(
        opinion in any::<bool>(),
        t1 in 0.5..3.0f64, t2 in 0.2..1.5f64,
        pts in prop::collection::vec(-1.5..1.5f64, 2..8),
    ) {
        let model = if opinion { ModelSpec::opinion() } else { ModelSpec::linear() };
        prop_assume!(!opinion || far_from_kernel_edges(&pts, t2));
        let theta = th(&[t1, t2]);
        let mu = EmpiricalMeasure::new(&pts, 1).unwrap();
        let x = [pts[0]];
        let g = model.grad_theta_b(&theta, &x, &mu).unwrap();
        let fd = fd_gradient(|t| model.drift_b(&th(t), &x, &mu).unwrap()[0], &theta, 1e-6);
        for j in 0..2 {
            prop_assert!(rel_err(g[(j, 0)], fd[j], 1e-3) <= 1e-5, "∂θ{}: {} vs {}", j + 1, g[(j, 0)], fd[j]);
        }
    }

    #[test]
    fn power_min_and_reciprocal_are_non_increasing(
        g0 in 1e-3..1.0f64, alpha in 0.0..1.0f64, c0 in 0.1..10.0f64,
        s in 0.0..1e4f64, ds in 0.0..1e4f64,
    ) {
        for sched in [Schedule::PowerMin { gamma0: g0, alpha }, Schedule::Reciprocal { c_gamma: g0, c0 }] {
            let (a, b) = (sched.eval(s), sched.eval(s + ds));
            prop_assert!(a > 0.0 && b > 0.0 && b <= a, "{sched:?}: γ({s}) = {a}, γ({}) = {b}", s + ds);
        }
    }

    #[test]
    fn lyapunov_closed_form_matches_eigen_oracle(t1 in 0.05..3.0f64, t2 in -0.04..3.0f64, n in 1usize..=50) {
        let closed = IpsInvariantCovariance::new(&th(&[t1, t2]), n).unwrap().to_dense();
        let oracle = lyapunov_eigen(&linear_ips_matrix(t1, t2, n));
        let err = (&closed - &oracle).abs().max() / oracle.abs().max();
        prop_assert!(err <= 1e-10, "relative error {err:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn likelihood_gradient_matches_finite_differences(
        seed in any::<u64>(), a in 0.3..2.0f64, b in 0.0..1.0f64,
    ) {
        let model = ModelSpec::linear();
        let traj = simulate_ips(&model, &th(&[1.0, 0.5]), &SimConfig::new(8, 0.1, 3.0, seed)).unwrap();
        let at = th(&[a, b]);
        let g = log_likelihood(&model, &at, &traj, None, true).unwrap().gradient.unwrap();
        let fd = fd_gradient(|t| log_likelihood(&model, &th(t), &traj, None, false).unwrap().value, &at, 1e-5);
        for j in 0..2 {
            prop_assert!(rel_err(g[j], fd[j], 1e-3) <= 1e-5, "{} vs {}", g[j], fd[j]);
        }
    }

    #[test]
    fn results_do_not_depend_on_worker_count(
        seed in any::<u64>(), workers in 2usize..6, per_particle in any::<bool>(),
    ) {
        let cfg = ExperimentConfig {
            schema: 1,
            name: "prop".into(),
            model: "linear".into(),
            sigma: 1.0,
            theta_true: th(&[0.5, 0.1]),
            estimator: if per_particle { EstimatorKind::OnlinePerParticle } else { EstimatorKind::OfflineClosed },
            grid: Grid { n: vec![2, 5], horizons: vec![2.0, 3.0] },
            trials: 4,
            dt: 0.1,
            init: InitialCondition::default(),
            lr: Some(LearningRate::parse("powmin:0.05,0.51;powmin:0.30,0.51").unwrap()),
            theta_init: Some(InitSpec::parse("uniform:-1,2;uniform:-2,2").unwrap()),
            mle: MleOptions::default(),
            master_seed: seed,
            output: None,
        };
        let serial = run_experiment_with_workers(&cfg, Some(1));
        let parallel = run_experiment_with_workers(&cfg, Some(workers));
        prop_assert_eq!(format!("{serial:?}"), format!("{parallel:?}"));
    }
}
