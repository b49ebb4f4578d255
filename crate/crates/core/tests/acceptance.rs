//! Acceptance checks, one pass/fail line per criterion.
//!
//! Run all with `cargo test -p mkv-core --test acceptance`, or a subset by
//! number: `cargo test -p mkv-core --test acceptance -- 4 7`.
//! The process exits non-zero if any selected criterion fails.

mod common;

use std::time::Instant;

use mkv::harness::{fit_rate, run_experiment_with_workers, EstimatorKind, ExperimentConfig, Grid};
use mkv::models::EmpiricalMeasure;
use mkv::offline::{fisher_information_linear, log_likelihood, mle_linear_closed_form, mle_numeric, normality_sample, MleOptions};
use mkv::online::{
    online_step_averaged, online_step_per_particle, run_online, EstimatorMode, EstimatorState, InitSpec, LearningRate,
    OnlineConfig,
};
use mkv::rng::{derive_seed, stream_rng};
use mkv::simulate::{simulate_coupled_pair_with, simulate_ips, step_euler, LawSurrogate};
use mkv::surface::{asymptotic_contrast_linear, asymptotic_loglik_ips_linear_hessian, IpsInvariantCovariance};
use mkv::{InitialCondition, ModelSpec, SimConfig, Theta};
use nalgebra::Vector2;
use rand::Rng;
use rayon::prelude::*;

use common::*;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn th(v: &[f64]) -> Theta {
    Theta::new(v.to_vec()).unwrap()
}

fn experiment(name: &str, theta: &[f64], estimator: EstimatorKind, n: Vec<usize>, horizons: Vec<f64>, trials: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        schema: 1,
        name: name.into(),
        model: "linear".into(),
        sigma: 1.0,
        theta_true: th(theta),
        estimator,
        grid: Grid { n, horizons },
        trials,
        dt: 0.1,
        init: InitialCondition::default(),
        lr: None,
        theta_init: None,
        mle: MleOptions::default(),
        master_seed: seed,
        output: None,
    }
}

/// Closed-form and numeric MLE agree on simulated linear data.
fn criterion_1() -> Verdict {
    let model = ModelSpec::linear();
    let theta0 = th(&[1.0, 0.5]);
    let diffs: Vec<f64> = (0..50u64)
        .into_par_iter()
        .map(|k| {
            let cfg = SimConfig::new(20, 0.1, 10.0, derive_seed(101, &[k]));
            let traj = simulate_ips(&model, &theta0, &cfg).unwrap();
            let closed = mle_linear_closed_form(&traj, None).unwrap();
            let numeric = mle_numeric(&model, &traj, &th(&[0.0, 0.0]), &MleOptions::default()).unwrap();
            (0..2).map(|j| (closed[j] - numeric.theta[j]).abs()).fold(0.0, f64::max)
        })
        .collect();
    let worst = diffs.iter().cloned().fold(0.0, f64::max);
    verdict(worst <= 1e-6, format!("50 trajectories, max |closed - numeric| = {worst:.2e} (tol 1e-6)"))
}

/// Log-log slope of MAE against N (t = 5) and against t (N = 2).
fn criterion_2() -> Verdict {
    let ns: Vec<usize> = (1..=20).map(|k| 20 * k).collect();
    let cfg = experiment("mae-vs-n", &[1.0, 0.5], EstimatorKind::OfflineClosed, ns.clone(), vec![5.0], 200, 202);
    let res = run_experiment_with_workers(&cfg, None).unwrap();
    let xs: Vec<f64> = res.summary.iter().map(|s| s.n as f64).collect();
    let fit_n: Vec<_> = (0..2)
        .map(|j| fit_rate(&xs, &res.summary.iter().map(|s| s.mae[j]).collect::<Vec<_>>()).unwrap())
        .collect();

    let ts = vec![50.0, 100.0, 200.0, 300.0, 500.0, 750.0, 1000.0, 1500.0, 2000.0];
    let cfg = experiment("mae-vs-t", &[1.0, 0.5], EstimatorKind::OfflineClosed, vec![2], ts, 200, 203);
    let res = run_experiment_with_workers(&cfg, None).unwrap();
    let xs: Vec<f64> = res.summary.iter().map(|s| s.t).collect();
    let fit_t: Vec<_> = (0..2)
        .map(|j| fit_rate(&xs, &res.summary.iter().map(|s| s.mae[j]).collect::<Vec<_>>()).unwrap())
        .collect();

    let slopes: Vec<f64> = fit_n.iter().chain(&fit_t).map(|f| f.slope).collect();
    let pass = slopes.iter().all(|s| (-0.6..=-0.4).contains(s));
    verdict(
        pass,
        format!(
            "slopes vs N: θ1 {:.3} (r² {:.2}), θ2 {:.3} (r² {:.2}); vs t: θ1 {:.3} (r² {:.2}), θ2 {:.3} (r² {:.2}); band [-0.6, -0.4]",
            fit_n[0].slope, fit_n[0].r2, fit_n[1].slope, fit_n[1].r2, fit_t[0].slope, fit_t[0].r2, fit_t[1].slope, fit_t[1].r2
        ),
    )
}

/// MSE at T = 30 decreases in N with at most one adjacent inversion.
fn criterion_3() -> Verdict {
    let ns = vec![2, 5, 10, 25, 50, 100];
    let cfg = experiment("mse-vs-n", &[1.0, 0.5], EstimatorKind::OfflineClosed, ns, vec![30.0], 200, 303);
    let res = run_experiment_with_workers(&cfg, None).unwrap();
    let mut inversions = [0usize; 2];
    let mut text = Vec::new();
    for j in 0..2 {
        let mse: Vec<f64> = res.summary.iter().map(|s| s.mse[j]).collect();
        inversions[j] = mse.windows(2).filter(|w| w[1] >= w[0]).count();
        text.push(format!(
            "θ{}: [{}] ({} inversions)",
            j + 1,
            mse.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>().join(", "),
            inversions[j]
        ));
    }
    verdict(inversions.iter().all(|&c| c <= 1), format!("{}; {} excluded", text.join("; "), res.exclusions.len()))
}

/// Sample covariance of √N(θ̂ − θ₀) against the inverse Fisher information.
///
/// Drawn at dt = 0.01 to keep the discretization error of the covariance
/// small. The mean check is sensitive to the O(1/√N) finite-sample bias of
/// the MLE, which at N = 500 is several standard errors at 10⁴ trials.
fn criterion_4() -> Verdict {
    let model = ModelSpec::linear();
    let theta0 = th(&[1.0, 0.5]);
    let cfg = SimConfig::new(500, 0.01, 5.0, 404);
    let sample = normality_sample(&model, &theta0, &cfg, 10_000).unwrap();
    let inv = fisher_information_linear(&theta0, 5.0, 1.0, 1.0).unwrap().inverse().unwrap();
    let cov = sample.covariance();
    let rel = (cov - inv).norm() / inv.norm();
    let n = sample.residuals.len() as f64;
    let mean = sample.mean();
    let z: Vec<f64> = (0..2).map(|j| mean[j] / (cov[(j, j)] / n).sqrt()).collect();
    let kurt = [sample.kurtosis(0), sample.kurtosis(1)];
    let pass = rel <= 0.10 && z.iter().all(|v| v.abs() <= 4.0) && kurt.iter().all(|k| (2.7..=3.3).contains(k));
    verdict(
        pass,
        format!(
            "{} trials ({} dropped), dt 0.01: rel. Frobenius distance {:.3} (tol 0.10); mean/stderr = ({:.2}, {:.2}) (tol 4); kurtosis ({:.2}, {:.2}) (band [2.7, 3.3])",
            sample.trials, sample.dropped, rel, z[0], z[1], kurt[0], kurt[1]
        ),
    )
}

/// Fisher closed form against RK4 integration of the moment equations.
fn criterion_5() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut monotone = true;
    let cases = [([1.0, 0.5], 1.0, 1.0), ([0.5, 0.1], 1.0, 1.0), ([0.8, -0.3], 0.5, 2.0), ([2.0, 1.0], -1.5, 0.3)];
    for (theta, mu0, var0) in cases {
        let theta0 = th(&theta);
        for t in [1.0, 5.0, 10.0] {
            let closed = fisher_information_linear(&theta0, t, mu0, var0).unwrap().matrix;
            let quad = fisher_by_quadrature(theta[0], theta[1], t, mu0, var0, 20_000);
            for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                worst = worst.max(rel_err(closed[(i, j)], quad[i][j], 1.0));
            }
        }
        for lambda in [Vector2::new(1.0, 0.0), Vector2::new(0.0, 1.0), Vector2::new(1.0, -1.0), Vector2::new(0.3, 0.7)] {
            // along (1,-1) the growth rate is m_t², which drops below one ulp of the
            // accumulated value at large t; d - 2c + c then wobbles by a few ulps
            let mut prev = 0.0;
            for k in 1..=40 {
                let m = fisher_information_linear(&theta0, 0.25 * k as f64, mu0, var0).unwrap().matrix;
                let q = (lambda.transpose() * m * lambda)[0];
                monotone &= if k == 1 { q > prev } else { q >= prev * (1.0 - 1e-14) };
                prev = q;
            }
        }
    }
    let zero = fisher_information_linear(&th(&[1.0, 0.5]), 0.0, 1.0, 1.0).unwrap().matrix;
    let zero_ok = zero.iter().all(|&v| v == 0.0);
    verdict(
        worst <= 1e-8 && monotone && zero_ok,
        format!("max rel. deviation {worst:.2e} (tol 1e-8), λᵀIλ increasing: {monotone}, I_0 = 0: {zero_ok}"),
    )
}

/// Online increments vanish on noiseless data generated at the truth.
fn criterion_6() -> Verdict {
    let mut rng = stream_rng(606, 0);
    let mut linear_nonzero = 0usize;
    let mut opinion_worst: f64 = 0.0;
    let mut checks = 0usize;
    for (model, thetas) in [
        (ModelSpec::linear(), vec![[1.0, 0.5], [0.5, 0.1], [-0.2, 1.3]]),
        (ModelSpec::opinion(), vec![[2.0, 0.5], [1.0, 0.8]]),
    ] {
        for theta in thetas {
            let theta0 = th(&theta);
            let n = 12;
            let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            for _ in 0..200 {
                let y = step_euler(&model, &theta0, &x, 0.1, &vec![0.0; n]).unwrap();
                let mut avg = EstimatorState::new(theta0.clone());
                online_step_averaged(&model, &mut avg, &x, &y, 0.1, &[0.3, 0.3]).unwrap();
                let mut per = vec![EstimatorState::new(theta0.clone()); n];
                online_step_per_particle(&model, &mut per, &x, &y, 0.1, &[0.3, 0.3]).unwrap();
                for s in std::iter::once(&avg).chain(&per) {
                    checks += 1;
                    let dev = (0..2).map(|j| (s.theta[j] - theta0[j]).abs()).fold(0.0, f64::max);
                    if model.name() == "linear" {
                        linear_nonzero += (dev != 0.0) as usize;
                    } else {
                        opinion_worst = opinion_worst.max(dev);
                    }
                }
                x = y;
            }
        }
    }
    verdict(
        linear_nonzero == 0 && opinion_worst == 0.0,
        format!("{checks} updates: linear non-zero increments {linear_nonzero}, opinion max |increment| {opinion_worst:.1e}"),
    )
}

/// Trial-mean squared error of a single-coordinate online run.
/// Returns (times, mse, initial mse).
fn online_mse_curve(coord: usize, gamma0: f64, n: usize, trials: usize, seed: u64) -> (Vec<f64>, Vec<f64>, f64) {
    let model = ModelSpec::linear();
    let theta0 = th(&[0.5, 0.1]);
    let (lr, init) = if coord == 0 {
        (format!("powmin:{gamma0},0.51;const:0"), "uniform:2,5;fixed:0.1")
    } else {
        (format!("const:0;powmin:{gamma0},0.51"), "fixed:0.5;uniform:2,5")
    };
    let mut oc = OnlineConfig::new(LearningRate::parse(&lr).unwrap(), InitSpec::parse(init).unwrap(), EstimatorMode::Averaged);
    oc.max_history = 1001;
    let runs: Vec<Vec<(f64, f64)>> = (0..trials as u64)
        .into_par_iter()
        .map(|k| {
            let cfg = SimConfig::new(n, 0.1, 1000.0, derive_seed(seed, &[k]));
            let run = run_online(&model, &theta0, &cfg, &oc).unwrap();
            run.history.iter().map(|h| (h.t, (h.theta[coord] - theta0[coord]).powi(2))).collect()
        })
        .collect();
    let times: Vec<f64> = runs[0].iter().map(|p| p.0).collect();
    let mse: Vec<f64> = (0..times.len())
        .map(|i| runs.iter().map(|r| r[i].1).sum::<f64>() / trials as f64)
        .collect();
    let initial = mse[0];
    (times, mse, initial)
}

fn tail_slope(times: &[f64], mse: &[f64], from: f64) -> (f64, f64) {
    // log-spaced sample of the recorded grid so the fit is not dominated by late times
    let targets: Vec<f64> = (0..20).map(|j| from * (1000.0 / from).powf(j as f64 / 19.0)).collect();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for t in targets {
        let i = times.iter().position(|&s| s >= t - 1e-9).unwrap();
        xs.push(times[i]);
        ys.push(mse[i]);
    }
    let fit = fit_rate(&xs, &ys).unwrap();
    (fit.slope, fit.r2)
}

/// Online MSE decays like the learning rate.
fn criterion_7() -> Verdict {
    let (times, mse, initial) = online_mse_curve(1, 0.30, 10, 500, 707);
    let (slope, r2) = tail_slope(&times, &mse, 250.0);
    let ratio = mse.last().unwrap() / initial;
    let pass = (-0.66..=-0.36).contains(&slope) && ratio <= 0.01;
    verdict(
        pass,
        format!(
            "θ2 estimated (θ1 held at 0.5), N=10, 500 trials: tail slope on t∈[250,1000] {slope:.3} (r² {r2:.2}, band [-0.66, -0.36]); terminal/initial MSE {ratio:.2e} (tol 1e-2)"
        ),
    )
}

/// The θ1-estimated companion run, reported for information only.
fn criterion_7_info() -> String {
    let (times, mse, initial) = online_mse_curve(0, 0.05, 10, 500, 708);
    let (slope, r2) = tail_slope(&times, &mse, 250.0);
    format!(
        "θ1 estimated (θ2 held at 0.1): tail slope {slope:.3} (r² {r2:.2}), terminal/initial MSE {:.2e}",
        mse.last().unwrap() / initial
    )
}

/// Averaged estimator beats per-particle estimators, paired by trial.
fn criterion_8() -> Verdict {
    let mut cfg = experiment("avg", &[0.5, 0.1], EstimatorKind::OnlineAveraged, vec![25], vec![1000.0], 300, 808);
    cfg.lr = Some(LearningRate::parse("const:0;powmin:0.30,0.51").unwrap());
    cfg.theta_init = Some(InitSpec::parse("fixed:0.5;uniform:2,5").unwrap());
    let avg = run_experiment_with_workers(&cfg, None).unwrap();
    cfg.estimator = EstimatorKind::OnlinePerParticle;
    let per = run_experiment_with_workers(&cfg, None).unwrap();
    let diffs: Vec<f64> = per
        .rows
        .iter()
        .zip(&avg.rows)
        .map(|(p, a)| {
            assert_eq!((p.cell, p.trial, p.seed), (a.cell, a.trial, a.seed));
            p.sq_err[1] - a.sq_err[1]
        })
        .collect();
    let n = diffs.len() as f64;
    let t = mean(&diffs) / (sample_sd(&diffs) / n.sqrt());
    let crit = t_quantile_95(n - 1.0);
    verdict(
        t > crit,
        format!(
            "N=25, T=1000, {} paired trials: MSE averaged {:.3e}, per-particle {:.3e}; paired t = {t:.2} (one-sided 95% critical {crit:.3})",
            diffs.len(),
            avg.summary[0].mse[1],
            per.summary[0].mse[1]
        ),
    )
}

/// Coupled IPS/McKean–Vlasov gap shrinks like 1/N.
fn criterion_9() -> Verdict {
    let model = ModelSpec::linear();
    let theta0 = th(&[1.0, 0.5]);
    let gap = |n: usize| -> f64 {
        let per_trial: Vec<f64> = (0..200u64)
            .into_par_iter()
            .map(|k| {
                let cfg = SimConfig::new(n, 0.1, 10.0, derive_seed(909, &[n as u64, k]));
                let (ips, mv) = simulate_coupled_pair_with(&model, &theta0, &cfg, LawSurrogate::ClosedFormMean).unwrap();
                let (a, b) = (ips.frame(ips.steps()), mv.frame(mv.steps()));
                a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n as f64
            })
            .collect();
        mean(&per_trial)
    };
    let (g16, g64) = (gap(16), gap(64));
    let ratio = g16 / g64;
    verdict(
        (2.0..=8.0).contains(&ratio),
        format!("E|x^N - x|² at T=10: N=16 {g16:.3e}, N=64 {g64:.3e}, ratio {ratio:.2} (band [2, 8])"),
    )
}

/// Curvature across the ridge flattens with N; the mean-field contrast is
/// flat along it.
fn criterion_10() -> Verdict {
    let theta0 = th(&[0.5, 0.1]);
    let v = Vector2::new(1.0, -1.0) / 2f64.sqrt();
    let mut along = Vec::new();
    let mut smallest = Vec::new();
    for n in [2, 5, 10, 100] {
        let h = asymptotic_loglik_ips_linear_hessian(&theta0, n).unwrap();
        along.push(-(v.transpose() * h * v)[0]);
        let eig = (-h).symmetric_eigenvalues();
        smallest.push(eig[0].min(eig[1]));
    }
    let decreasing = along.windows(2).all(|w| w[1] < w[0]) && smallest.windows(2).all(|w| w[1] < w[0]);
    let c1 = asymptotic_contrast_linear(&th(&[0.2, 0.4]), &theta0).unwrap();
    let c2 = asymptotic_contrast_linear(&th(&[0.9, -0.3]), &theta0).unwrap();
    let flat = c1.abs() <= 1e-14 && c2.abs() <= 1e-14;
    verdict(
        decreasing && flat,
        format!(
            "curvature along (1,-1)/√2 for N=2,5,10,100: [{}]; smallest eigenvalue [{}]; ridge contrast ({c1:.1e}, {c2:.1e})",
            along.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", "),
            smallest.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

/// Opinion-dynamics range parameter learned online from random starts.
fn criterion_11() -> Verdict {
    const SIGMA: f64 = 0.1;
    const HORIZON: f64 = 5000.0;
    let model = ModelSpec::opinion().with_sigma(SIGMA).unwrap();
    let theta0 = th(&[2.0, 0.5]);
    let oc = OnlineConfig::new(
        LearningRate::parse("const:0;const:0.002").unwrap(),
        InitSpec::parse("fixed:2;uniform:1.5,2.5").unwrap(),
        EstimatorMode::Averaged,
    );
    let finals: Vec<f64> = (0..50u64)
        .into_par_iter()
        .map(|k| {
            let cfg = SimConfig::new(50, 0.1, HORIZON, derive_seed(1111, &[k]))
                .with_init(InitialCondition::Normal { mean: 0.0, std: 1.5 });
            run_online(&model, &theta0, &cfg, &oc).unwrap().final_estimates[0][1]
        })
        .collect();
    let hits = finals.iter().filter(|v| (*v - 0.5).abs() <= 0.1).count();
    let mut sorted = finals.clone();
    sorted.sort_by(f64::total_cmp);
    verdict(
        hits * 100 >= 80 * finals.len(),
        format!(
            "N=50, σ={SIGMA}, T={HORIZON}, x0~N(0,1.5²): {hits}/50 runs end within 0.1 of 0.5 (need 40); median final θ2 {:.3}",
            sorted[25]
        ),
    )
}

/// Property checks: gradients, scheduler independence, Lyapunov oracle.
fn criterion_12() -> Verdict {
    let mut rng = stream_rng(1212, 0);
    // ∇θB against finite differences
    let mut grad_worst: f64 = 0.0;
    for model in [ModelSpec::linear(), ModelSpec::opinion()] {
        for _ in 0..200 {
            let theta = th(&[rng.random_range(0.5..3.0), rng.random_range(0.2..1.5)]);
            let pts: Vec<f64> = (0..6).map(|_| rng.random_range(-1.5..1.5)).collect();
            // keep pair distances away from the kernel's support edges, where the bump is too steep for FD
            let near_edge = pts.iter().any(|a| {
                pts.iter()
                    .any(|b| a != b && (((a - b).abs() - theta[1]).abs() - 1.0).abs() < 0.05)
            });
            if model.name() == "opinion" && near_edge {
                continue;
            }
            let mu = EmpiricalMeasure::new(&pts, 1).unwrap();
            let x = [pts[0]];
            let g = model.grad_theta_b(&theta, &x, &mu).unwrap();
            let fd = fd_gradient(|t| model.drift_b(&th(t), &x, &mu).unwrap()[0], &theta, 1e-6);
            for j in 0..2 {
                grad_worst = grad_worst.max(rel_err(g[(j, 0)], fd[j], 1e-3));
            }
        }
    }
    // likelihood gradient against finite differences
    let mut lik_worst: f64 = 0.0;
    for (model, theta0, at) in [
        (ModelSpec::linear(), th(&[1.0, 0.5]), [0.7, 0.2]),
        (ModelSpec::opinion().with_sigma(0.3).unwrap(), th(&[2.0, 0.5]), [1.6, 0.6]),
    ] {
        let cfg = SimConfig::new(10, 0.1, 5.0, 12);
        let traj = simulate_ips(&model, &theta0, &cfg).unwrap();
        let at = th(&at);
        let g = log_likelihood(&model, &at, &traj, None, true).unwrap().gradient.unwrap();
        let fd = fd_gradient(|t| log_likelihood(&model, &th(t), &traj, None, false).unwrap().value, &at, 1e-6);
        for j in 0..2 {
            lik_worst = lik_worst.max(rel_err(g[j], fd[j], 1e-3));
        }
    }
    // identical results for 1 and 3 workers
    let mut cfg = experiment("det", &[0.5, 0.1], EstimatorKind::OnlinePerParticle, vec![3, 7], vec![5.0], 6, 1213);
    cfg.lr = Some(LearningRate::parse("powmin:0.05,0.51;powmin:0.30,0.51").unwrap());
    cfg.theta_init = Some(InitSpec::parse("uniform:-1,2;uniform:-2,2").unwrap());
    let deterministic = run_experiment_with_workers(&cfg, Some(1)).unwrap() == run_experiment_with_workers(&cfg, Some(3)).unwrap();
    // Lyapunov closed form against dense solvers
    let mut lyap_worst: f64 = 0.0;
    for (a, b) in [(0.5, 0.1), (1.0, 0.5), (0.3, -0.2)] {
        for n in [1, 2, 3, 5, 10, 20, 35, 50] {
            let closed = IpsInvariantCovariance::new(&th(&[a, b]), n).unwrap().to_dense();
            let m = linear_ips_matrix(a, b, n);
            let mut oracles = vec![lyapunov_eigen(&m)];
            if n <= 20 {
                oracles.push(lyapunov_kronecker(&m));
            }
            for o in oracles {
                lyap_worst = lyap_worst.max((&closed - &o).abs().max() / o.abs().max());
            }
        }
    }
    let pass = grad_worst <= 1e-5 && lik_worst <= 1e-5 && deterministic && lyap_worst <= 1e-10;
    verdict(
        pass,
        format!(
            "∇θB vs FD {grad_worst:.1e}, ∇ℓ vs FD {lik_worst:.1e} (tol 1e-5); workers 1 vs 3 identical: {deterministic}; Lyapunov vs dense {lyap_worst:.1e} (tol 1e-10)"
        ),
    )
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, &str, fn() -> Verdict); 12] = [
        (1, "closed-form vs numeric MLE", criterion_1),
        (2, "offline rate (Nt)^(-1/2)", criterion_2),
        (3, "offline MSE decreasing in N", criterion_3),
        (4, "asymptotic normality", criterion_4),
        (5, "Fisher closed form vs quadrature", criterion_5),
        (6, "online fixed point", criterion_6),
        (7, "online learning-rate decay", criterion_7),
        (8, "averaged beats per-particle", criterion_8),
        (9, "propagation of chaos", criterion_9),
        (10, "ridge flattening", criterion_10),
        (11, "opinion dynamics online", criterion_11),
        (12, "property suites", criterion_12),
    ];
    let mut failed = Vec::new();
    for (id, name, check) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let v = check();
        let secs = start.elapsed().as_secs_f64();
        println!("[{}] {id:>2} {name}: {} ({secs:.1}s)", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        if id == 7 {
            println!("[INFO]  7 {}", criterion_7_info());
        }
        if !v.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all selected criteria passed");
    } else {
        println!("acceptance: failed {failed:?}");
        std::process::exit(1);
    }
}
