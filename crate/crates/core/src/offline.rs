//! Batch (offline) estimation over an observed trajectory window.
//!
//! The objective is the data form of the Girsanov log-likelihood,
//!
//! ```text
//! ℓ(θ) = 1/(Nσ²) Σ_i Σ_k [ ⟨B(θ, x_k^i, μ_k), Δx_k^i⟩ − ½ ‖B(θ, x_k^i, μ_k)‖² dt ]
//! ```
//!
//! with left-point (Itô) sums. It differs from the likelihood written in
//! terms of the unknown true drift only by θ-free terms, so maximizers and
//! gradients coincide.

use nalgebra::{DMatrix, Matrix2, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{EmpiricalMeasure, ModelKind, ModelSpec, Theta};
use crate::rng::derive_seed;
use crate::simulate::{IpsStepper, SimConfig, TrajectoryBatch};

/// Denominators below this make the closed-form MLE degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct LikelihoodValue {
    pub value: f64,
    pub gradient: Option<Vec<f64>>,
    pub at_theta: Theta,
    pub window: (f64, f64),
}

/// Evaluates ℓ(θ) over `window` (defaults to the whole trajectory).
pub fn log_likelihood(
    model: &ModelSpec,
    theta: &Theta,
    traj: &TrajectoryBatch,
    window: Option<(f64, f64)>,
    with_gradient: bool,
) -> Result<LikelihoodValue> {
    model.check_theta(theta)?;
    check_traj(model, traj)?;
    let window = window.unwrap_or((0.0, traj.horizon()));
    let steps = traj.window_steps(window.0, window.1)?;
    let (p, d) = (model.param_dim(), model.state_dim());
    let dt = traj.dt;
    let mut drift = vec![0.0; d];
    let mut jac = vec![0.0; p * d];
    let mut value = 0.0;
    let mut grad = vec![0.0; p];

    for k in steps {
        let (cur, next) = (traj.frame(k), traj.frame(k + 1));
        let mu = EmpiricalMeasure::new_unchecked(cur, d);
        for (x, y) in cur.chunks_exact(d).zip(next.chunks_exact(d)) {
            if with_gradient {
                model.drift_and_grad_into(theta, x, &mu, &mut drift, &mut jac);
            } else {
                model.drift_into(theta, x, &mu, &mut drift);
            }
            for c in 0..d {
                let dx = y[c] - x[c];
                value += drift[c] * dx - 0.5 * drift[c] * drift[c] * dt;
                if with_gradient {
                    // ∂ℓ/∂θ_j = ∂B/∂θ_j · (Δx − B dt)
                    let innovation = dx - drift[c] * dt;
                    for (j, g) in grad.iter_mut().enumerate() {
                        *g += jac[j * d + c] * innovation;
                    }
                }
            }
        }
    }
    let scale = 1.0 / (traj.n_particles as f64 * model.sigma() * model.sigma());
    Ok(LikelihoodValue {
        value: value * scale,
        gradient: with_gradient.then(|| grad.iter().map(|g| g * scale).collect()),
        at_theta: theta.clone(),
        window,
    })
}

fn check_traj(model: &ModelSpec, traj: &TrajectoryBatch) -> Result<()> {
    if traj.state_dim != model.state_dim() {
        return Err(Error::DimensionMismatch {
            what: "trajectory state dimension",
            expected: model.state_dim(),
            got: traj.state_dim,
        });
    }
    if traj.steps() == 0 {
        return Err(Error::InvalidParameter("trajectory has no steps".into()));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Largest number of step halvings per line search.
    pub max_halvings: usize,
    pub window: Option<(f64, f64)>,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            max_iters: 500,
            grad_tol: 1e-8,
            max_halvings: 60,
            window: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MleOutcome {
    pub theta: Theta,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    /// Set when a line search failed to find an ascent step before the
    /// gradient tolerance was met (flat or singular curvature).
    pub line_search_stalled: bool,
}

/// Maximizes ℓ by gradient ascent with backtracking (Armijo) line search.
pub fn mle_numeric(
    model: &ModelSpec,
    traj: &TrajectoryBatch,
    init: &Theta,
    opts: &MleOptions,
) -> Result<MleOutcome> {
    gradient_ascent(
        |theta| {
            let v = log_likelihood(model, theta, traj, opts.window, true)?;
            Ok((v.value, v.gradient.unwrap_or_default()))
        },
        init,
        opts,
    )
}

/// Gradient ascent on an arbitrary smooth objective returning
/// `(value, gradient)`.
///
/// Trial steps start from the Barzilai–Borwein length of the previous
/// iteration, which converges quickly on quadratic objectives.
pub fn gradient_ascent<F>(objective: F, init: &Theta, opts: &MleOptions) -> Result<MleOutcome>
where
    F: Fn(&Theta) -> Result<(f64, Vec<f64>)>,
{
    let norm = |g: &[f64]| g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut theta = init.clone();
    let (mut value, mut grad) = objective(&theta)?;
    if grad.len() != theta.len() {
        return Err(Error::DimensionMismatch {
            what: "objective gradient",
            expected: theta.len(),
            got: grad.len(),
        });
    }
    let mut step = 1.0;

    for iter in 0..=opts.max_iters {
        let gnorm = norm(&grad);
        if gnorm <= opts.grad_tol {
            return Ok(MleOutcome {
                theta,
                value,
                grad_norm: gnorm,
                iterations: iter,
                line_search_stalled: false,
            });
        }
        if iter == opts.max_iters {
            break;
        }
        let mut accepted = None;
        let mut trial_step = step;
        for _ in 0..=opts.max_halvings {
            let cand: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t + trial_step * g).collect();
            if let Ok(cand) = Theta::new(cand) {
                let (v, g) = objective(&cand)?;
                let armijo = v >= value + 1e-4 * trial_step * gnorm * gnorm;
                // Near the optimum the change in value drops below its
                // rounding error; fall back to requiring a smaller gradient.
                let flat = (v - value).abs() <= 1e-12 * (1.0 + value.abs()) && norm(&g) < gnorm;
                if armijo || flat {
                    accepted = Some((cand, v, g));
                    break;
                }
            }
            trial_step *= 0.5;
        }
        let Some((next, next_value, next_grad)) = accepted else {
            log::warn!("line search stalled at iteration {iter}, gradient norm {gnorm:e}");
            if gnorm <= 1e3 * opts.grad_tol {
                return Ok(MleOutcome {
                    theta,
                    value,
                    grad_norm: gnorm,
                    iterations: iter,
                    line_search_stalled: true,
                });
            }
            return Err(Error::NoConvergence {
                iterations: iter,
                grad_norm: gnorm,
                last: theta.into_vec(),
            });
        };
        // BB length for ascent: s·s / −(s·y), y = change in gradient
        let s: Vec<f64> = next.iter().zip(theta.iter()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|a| a * a).sum();
        step = if sy < 0.0 && ss > 0.0 { ss / -sy } else { trial_step * 2.0 };
        theta = next;
        value = next_value;
        grad = next_grad;
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iters,
        grad_norm: norm(&grad),
        last: theta.into_vec(),
    })
}

/// Running sufficient statistics of the linear model:
///
/// * `a = Σ (x − x̄) Δx`
/// * `b = Σ x Δx`
/// * `c = Σ (x − x̄)² dt`
/// * `d = Σ x² dt`
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LinearStats {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl LinearStats {
    /// Accumulates one observation step between consecutive frames.
    pub fn accumulate(&mut self, cur: &[f64], next: &[f64], dt: f64) {
        let mean = cur.iter().sum::<f64>() / cur.len() as f64;
        let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
        for (&x, &y) in cur.iter().zip(next) {
            let dx = y - x;
            let centered = x - mean;
            a += centered * dx;
            b += x * dx;
            c += centered * centered;
            d += x * x;
        }
        self.a += a;
        self.b += b;
        self.c += c * dt;
        self.d += d * dt;
    }

    /// Closed-form maximizer of the quadratic log-likelihood.
    ///
    /// Setting the gradient of `−θ₁b − θ₂a − ½(θ₁²d + 2θ₁θ₂c + θ₂²c)` to
    /// zero gives `θ₁ = (a − b)/(d − c)` and `θ₂ = (da − cb)/(c² − cd)`.
    pub fn estimate(&self) -> Result<Theta> {
        let LinearStats { a, b, c, d } = *self;
        let den1 = d - c;
        let den2 = c * c - c * d;
        if den1.abs() < DEGENERACY_TOL {
            return Err(Error::Degenerate(format!(
                "confinement denominator {den1:e} (initial mean zero?)"
            )));
        }
        if den2.abs() < DEGENERACY_TOL {
            return Err(Error::Degenerate(format!(
                "interaction denominator {den2:e} (single particle?)"
            )));
        }
        Theta::new(vec![(a - b) / den1, (d * a - c * b) / den2])
            .map_err(|_| Error::Degenerate("non-finite closed-form estimate".into()))
    }
}

/// Closed-form MLE of the linear mean-field model over `window`.
pub fn mle_linear_closed_form(traj: &TrajectoryBatch, window: Option<(f64, f64)>) -> Result<Theta> {
    if traj.model_id != ModelSpec::linear().name() {
        return Err(Error::InvalidConfig(format!(
            "closed-form MLE needs a linear-model trajectory, got '{}'",
            traj.model_id
        )));
    }
    if traj.state_dim != 1 {
        return Err(Error::DimensionMismatch {
            what: "trajectory state dimension",
            expected: 1,
            got: traj.state_dim,
        });
    }
    let (start, end) = window.unwrap_or((0.0, traj.horizon()));
    let mut stats = LinearStats::default();
    for k in traj.window_steps(start, end)? {
        stats.accumulate(traj.frame(k), traj.frame(k + 1), traj.dt);
    }
    stats.estimate()
}

/// Fisher information `I_t(θ₀)` of the linear mean-field model.
#[derive(Clone, Debug, PartialEq)]
pub struct FisherInfo {
    pub matrix: Matrix2<f64>,
    pub at_theta: Theta,
    pub t: f64,
}

impl FisherInfo {
    pub fn inverse(&self) -> Result<Matrix2<f64>> {
        self.matrix
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("Fisher information is singular".into()))
    }

    pub fn eigenvalues(&self) -> [f64; 2] {
        let e = SymmetricEigen::new(self.matrix).eigenvalues;
        [e[0].min(e[1]), e[0].max(e[1])]
    }
}

/// `∫₀ᵗ Var(x_s) ds` and `∫₀ᵗ E[x_s]² ds` for the linear McKean–Vlasov
/// dynamics started from `N(μ₀, σ₀²)` with unit diffusion.
fn linear_moment_integrals(theta1: f64, theta2: f64, t: f64, mu0: f64, sigma0_sq: f64) -> (f64, f64) {
    let gamma = -2.0 * (theta1 + theta2);
    let egt = (gamma * t).exp_m1();
    let var_int = egt / (gamma * gamma) - t / gamma + sigma0_sq * egt / gamma;
    let mean_sq_int = -mu0 * mu0 * (-2.0 * theta1 * t).exp_m1() / (2.0 * theta1);
    (var_int, mean_sq_int)
}

/// Closed-form `I_t(θ₀) = [[D_t, C_t], [C_t, C_t]]` with
/// `C_t = ∫ Var(x_s) ds` and `D_t = C_t + ∫ E[x_s]² ds` (unit diffusion).
pub fn fisher_information_linear(theta0: &Theta, t: f64, mu0: f64, sigma0_sq: f64) -> Result<FisherInfo> {
    if theta0.len() != 2 {
        return Err(Error::DimensionMismatch {
            what: "theta",
            expected: 2,
            got: theta0.len(),
        });
    }
    let (t1, t2) = (theta0[0], theta0[1]);
    if t1 + t2 <= 0.0 || t1 == 0.0 {
        return Err(Error::Domain(format!(
            "Fisher information needs θ₁ + θ₂ > 0 and θ₁ ≠ 0, got {theta0}"
        )));
    }
    if !(t >= 0.0 && t.is_finite()) || !(sigma0_sq >= 0.0) || !mu0.is_finite() {
        return Err(Error::Domain(format!(
            "invalid horizon or initial moments (t={t}, μ₀={mu0}, σ₀²={sigma0_sq})"
        )));
    }
    let (c, mean_part) = linear_moment_integrals(t1, t2, t, mu0, sigma0_sq);
    let d = c + mean_part;
    Ok(FisherInfo {
        matrix: Matrix2::new(d, c, c, c),
        at_theta: theta0.clone(),
        t,
    })
}

/// Residuals `√N(θ̂ − θ₀)` of the closed-form MLE over independent runs.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalitySample {
    /// `(trial, residual)` for every non-degenerate trial, in trial order.
    pub residuals: Vec<(usize, [f64; 2])>,
    pub dropped: usize,
    pub trials: usize,
}

impl NormalitySample {
    pub fn mean(&self) -> [f64; 2] {
        let n = self.residuals.len() as f64;
        let mut m = [0.0; 2];
        for (_, r) in &self.residuals {
            m[0] += r[0];
            m[1] += r[1];
        }
        [m[0] / n, m[1] / n]
    }

    /// Unbiased sample covariance.
    pub fn covariance(&self) -> Matrix2<f64> {
        let m = self.mean();
        let n = self.residuals.len() as f64;
        let mut cov = Matrix2::zeros();
        for (_, r) in &self.residuals {
            let (a, b) = (r[0] - m[0], r[1] - m[1]);
            cov[(0, 0)] += a * a;
            cov[(0, 1)] += a * b;
            cov[(1, 1)] += b * b;
        }
        cov[(1, 0)] = cov[(0, 1)];
        cov / (n - 1.0)
    }

    /// Sample excess-free kurtosis `m₄ / m₂²` of one component.
    pub fn kurtosis(&self, comp: usize) -> f64 {
        let m = self.mean()[comp];
        let n = self.residuals.len() as f64;
        let (mut m2, mut m4) = (0.0, 0.0);
        for (_, r) in &self.residuals {
            let z = (r[comp] - m) * (r[comp] - m);
            m2 += z;
            m4 += z * z;
        }
        (m4 / n) / (m2 / n).powi(2)
    }
}

/// Runs `trials` independent linear-model simulations and records the
/// scaled closed-form MLE error of each. Trials are seeded by
/// `(cfg.seed, trial)` and run in parallel.
pub fn normality_sample(
    model: &ModelSpec,
    theta0: &Theta,
    cfg: &SimConfig,
    trials: usize,
) -> Result<NormalitySample> {
    if trials < 100 {
        return Err(Error::InvalidConfig(format!("normality_sample needs at least 100 trials, got {trials}")));
    }
    if model.kind() != ModelKind::LinearMeanField {
        return Err(Error::InvalidConfig("normality_sample uses the linear closed-form MLE".into()));
    }
    model.check_theta(theta0)?;
    cfg.steps()?;
    let scale = (cfg.n_particles as f64).sqrt();
    let outcomes: Vec<Result<Option<[f64; 2]>>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut trial_cfg = cfg.clone();
            trial_cfg.seed = derive_seed(cfg.seed, &[trial as u64]);
            match closed_form_run(model, theta0, &trial_cfg) {
                Ok(est) => Ok(Some([scale * (est[0] - theta0[0]), scale * (est[1] - theta0[1])])),
                Err(Error::Degenerate(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut residuals = Vec::with_capacity(trials);
    let mut dropped = 0;
    for (trial, out) in outcomes.into_iter().enumerate() {
        match out? {
            Some(r) => residuals.push((trial, r)),
            None => dropped += 1,
        }
    }
    if dropped * 100 >= trials {
        return Err(Error::Degenerate(format!(
            "{dropped} of {trials} trials had a degenerate MLE (cap is 1%)"
        )));
    }
    Ok(NormalitySample {
        residuals,
        dropped,
        trials,
    })
}

/// Simulates the linear IPS and returns the closed-form MLE over the full
/// horizon without storing the trajectory.
pub fn closed_form_run(model: &ModelSpec, theta0: &Theta, cfg: &SimConfig) -> Result<Theta> {
    closed_form_checkpoints(model, theta0, cfg, &[cfg.horizon])?
        .pop()
        .expect("one checkpoint")
}

/// Like [`closed_form_run`], evaluating the estimator at each horizon in
/// `checkpoints` (ascending, each a multiple of `dt`).
pub fn closed_form_checkpoints(
    model: &ModelSpec,
    theta0: &Theta,
    cfg: &SimConfig,
    checkpoints: &[f64],
) -> Result<Vec<Result<Theta>>> {
    let mut sim = IpsStepper::new(model, theta0, cfg)?;
    let marks: Vec<usize> = checkpoints.iter().map(|t| (t / cfg.dt).round() as usize).collect();
    if marks.windows(2).any(|w| w[0] > w[1]) || marks.last().is_some_and(|&m| m > sim.total_steps()) {
        return Err(Error::InvalidConfig("checkpoints must be ascending and within the horizon".into()));
    }
    let mut stats = LinearStats::default();
    let mut out = Vec::with_capacity(marks.len());
    let mut next_mark = marks.iter().peekable();
    while let Some(&&m) = next_mark.peek() {
        if sim.step_index() == m {
            out.push(stats.estimate());
            next_mark.next();
            continue;
        }
        sim.advance()?;
        stats.accumulate(sim.previous(), sim.current(), cfg.dt);
    }
    Ok(out)
}

/// Convenience for tests and diagnostics: dense Hessian of ℓ by central
/// differences of the analytic gradient.
pub fn hessian_fd(
    model: &ModelSpec,
    theta: &Theta,
    traj: &TrajectoryBatch,
    h: f64,
) -> Result<DMatrix<f64>> {
    let p = theta.len();
    let mut hess = DMatrix::zeros(p, p);
    for j in 0..p {
        let shifted = |sign: f64| -> Result<Vec<f64>> {
            let mut v = theta.to_vec();
            v[j] += sign * h;
            Ok(log_likelihood(model, &Theta::new(v)?, traj, None, true)?
                .gradient
                .unwrap_or_default())
        };
        let (gp, gm) = (shifted(1.0)?, shifted(-1.0)?);
        for i in 0..p {
            hess[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    Ok(hess)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{simulate_ips, step_euler, InitialCondition};
    use approx::assert_relative_eq;

    fn th(v: &[f64]) -> Theta {
        Theta::new(v.to_vec()).unwrap()
    }

    /// Euler path with all increments set to zero.
    fn noiseless(model: &ModelSpec, theta: &Theta, x0: &[f64], dt: f64, steps: usize) -> TrajectoryBatch {
        let mut frames = vec![x0.to_vec()];
        for _ in 0..steps {
            let last = frames.last().unwrap();
            let next = step_euler(model, theta, last, dt, &vec![0.0; last.len()]).unwrap();
            frames.push(next);
        }
        TrajectoryBatch::from_frames(model, theta.clone(), x0.len(), dt, frames, None).unwrap()
    }

    #[test]
    fn zero_path_has_zero_likelihood() {
        let m = ModelSpec::linear();
        let traj = TrajectoryBatch::from_frames(&m, th(&[1.0, 0.5]), 3, 0.1, vec![vec![0.0; 3]; 11], None)
            .unwrap();
        for t in [[1.0, 0.5], [-3.0, 2.0], [0.0, 0.0]] {
            let v = log_likelihood(&m, &th(&t), &traj, None, true).unwrap();
            assert_eq!(v.value, 0.0);
            assert_eq!(v.gradient.unwrap(), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn noiseless_data_is_maximized_at_truth() {
        let m = ModelSpec::linear();
        let theta0 = th(&[1.0, 0.5]);
        let traj = noiseless(&m, &theta0, &[2.0, -1.0, 0.5, 3.0], 0.1, 40);
        let at_truth = log_likelihood(&m, &theta0, &traj, None, false).unwrap().value;
        for t in [[1.1, 0.5], [0.9, 0.6], [1.0, 0.0], [2.0, -1.0]] {
            assert!(log_likelihood(&m, &th(&t), &traj, None, false).unwrap().value < at_truth);
        }
        let est = mle_numeric(&m, &traj, &th(&[0.0, 0.0]), &MleOptions::default()).unwrap();
        assert!(est.grad_norm <= 1e-8);
        assert_relative_eq!(est.theta[0], 1.0, epsilon = 1e-6);
        assert_relative_eq!(est.theta[1], 0.5, epsilon = 1e-6);
        let closed = mle_linear_closed_form(&traj, None).unwrap();
        assert_relative_eq!(closed[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(closed[1], 0.5, epsilon = 1e-10);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for (model, theta) in [
            (ModelSpec::linear(), th(&[0.8, 0.3])),
            (ModelSpec::opinion().with_sigma(0.7).unwrap(), th(&[2.0, 0.6])),
        ] {
            let cfg = SimConfig::new(12, 0.1, 4.0, 9)
                .with_init(InitialCondition::Normal { mean: 0.0, std: 1.0 });
            let traj = simulate_ips(&model, &th(&[1.0, 0.5]), &cfg).unwrap();
            let g = log_likelihood(&model, &theta, &traj, None, true).unwrap().gradient.unwrap();
            let h = 1e-5;
            for j in 0..2 {
                let mut up = theta.to_vec();
                let mut dn = theta.to_vec();
                up[j] += h;
                dn[j] -= h;
                let fd = (log_likelihood(&model, &th(&up), &traj, None, false).unwrap().value
                    - log_likelihood(&model, &th(&dn), &traj, None, false).unwrap().value)
                    / (2.0 * h);
                assert!((g[j] - fd).abs() <= 1e-5 * g[j].abs().max(1.0), "{j}: {} vs {fd}", g[j]);
            }
        }
    }

    #[test]
    fn closed_form_agrees_with_numeric() {
        let m = ModelSpec::linear();
        for seed in 0..5 {
            let cfg = SimConfig::new(20, 0.1, 10.0, seed);
            let traj = simulate_ips(&m, &th(&[1.0, 0.5]), &cfg).unwrap();
            let closed = mle_linear_closed_form(&traj, None).unwrap();
            let num = mle_numeric(&m, &traj, &th(&[0.0, 0.0]), &MleOptions::default()).unwrap();
            for j in 0..2 {
                assert!((closed[j] - num.theta[j]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn single_particle_is_degenerate() {
        let cfg = SimConfig::new(1, 0.1, 5.0, 1);
        let traj = simulate_ips(&ModelSpec::linear(), &th(&[1.0, 0.5]), &cfg).unwrap();
        assert!(matches!(mle_linear_closed_form(&traj, None), Err(Error::Degenerate(_))));
    }

    #[test]
    fn window_beyond_horizon_is_rejected() {
        let cfg = SimConfig::new(3, 0.1, 2.0, 1);
        let m = ModelSpec::linear();
        let traj = simulate_ips(&m, &th(&[1.0, 0.5]), &cfg).unwrap();
        assert!(matches!(
            log_likelihood(&m, &th(&[1.0, 0.5]), &traj, Some((0.0, 3.0)), false),
            Err(Error::WindowOutOfRange { .. })
        ));
    }

    #[test]
    fn windowed_closed_form_uses_only_the_window() {
        let cfg = SimConfig::new(10, 0.1, 4.0, 2);
        let m = ModelSpec::linear();
        let traj = simulate_ips(&m, &th(&[1.0, 0.5]), &cfg).unwrap();
        let mut stats = LinearStats::default();
        for k in 10..30 {
            stats.accumulate(traj.frame(k), traj.frame(k + 1), traj.dt);
        }
        assert_eq!(mle_linear_closed_form(&traj, Some((1.0, 3.0))).unwrap(), stats.estimate().unwrap());
    }

    #[test]
    fn likelihood_is_exactly_quadratic_for_linear_model() {
        let cfg = SimConfig::new(15, 0.1, 6.0, 4);
        let m = ModelSpec::linear();
        let traj = simulate_ips(&m, &th(&[1.0, 0.5]), &cfg).unwrap();
        let h1 = hessian_fd(&m, &th(&[0.2, -0.4]), &traj, 0.5).unwrap();
        let h2 = hessian_fd(&m, &th(&[3.0, 1.5]), &traj, 0.5).unwrap();
        assert!((&h1 - &h2).abs().max() <= 1e-10 * h1.abs().max());
    }

    #[test]
    fn one_newton_step_lands_on_ascent_result() {
        let cfg = SimConfig::new(15, 0.1, 6.0, 8);
        let m = ModelSpec::linear();
        let traj = simulate_ips(&m, &th(&[1.0, 0.5]), &cfg).unwrap();
        let start = th(&[-2.0, 4.0]);
        let hess = hessian_fd(&m, &start, &traj, 1.0).unwrap();
        let g = log_likelihood(&m, &start, &traj, None, true).unwrap().gradient.unwrap();
        let step = hess.lu().solve(&nalgebra::DVector::from_vec(g)).unwrap();
        let newton = [start[0] - step[0], start[1] - step[1]];
        let ascent = mle_numeric(&m, &traj, &start, &MleOptions::default()).unwrap();
        for j in 0..2 {
            assert!((newton[j] - ascent.theta[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn argmax_is_invariant_to_constant_shift() {
        let cfg = SimConfig::new(10, 0.1, 5.0, 12);
        let m = ModelSpec::linear();
        let traj = simulate_ips(&m, &th(&[1.0, 0.5]), &cfg).unwrap();
        let opts = MleOptions::default();
        let base = mle_numeric(&m, &traj, &th(&[0.0, 0.0]), &opts).unwrap();
        let shifted = gradient_ascent(
            |t| {
                let v = log_likelihood(&m, t, &traj, None, true)?;
                Ok((v.value + 1234.5, v.gradient.unwrap()))
            },
            &th(&[0.0, 0.0]),
            &opts,
        )
        .unwrap();
        for j in 0..2 {
            assert!((base.theta[j] - shifted.theta[j]).abs() < 1e-7);
        }
    }

    #[test]
    fn iteration_cap_reports_no_convergence() {
        let cfg = SimConfig::new(10, 0.1, 5.0, 12);
        let m = ModelSpec::linear();
        let traj = simulate_ips(&m, &th(&[1.0, 0.5]), &cfg).unwrap();
        let opts = MleOptions {
            max_iters: 1,
            ..MleOptions::default()
        };
        assert!(matches!(
            mle_numeric(&m, &traj, &th(&[-5.0, 5.0]), &opts),
            Err(Error::NoConvergence { iterations: 1, .. })
        ));
    }

    #[test]
    fn fisher_at_zero_is_zero() {
        let f = fisher_information_linear(&th(&[1.0, 0.5]), 0.0, 1.0, 1.0).unwrap();
        assert_eq!(f.matrix, Matrix2::zeros());
    }

    #[test]
    fn fisher_domain_errors() {
        assert!(fisher_information_linear(&th(&[0.5, -0.5]), 1.0, 1.0, 1.0).is_err());
        assert!(fisher_information_linear(&th(&[0.0, 0.5]), 1.0, 1.0, 1.0).is_err());
        assert!(fisher_information_linear(&th(&[1.0, 0.5]), -1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn fisher_is_positive_definite_and_symmetric() {
        for t in [0.5, 1.0, 5.0, 30.0] {
            let f = fisher_information_linear(&th(&[1.0, 0.5]), t, 1.0, 1.0).unwrap();
            assert_eq!(f.matrix[(0, 1)], f.matrix[(1, 0)]);
            assert!(f.eigenvalues()[0] > 0.0);
            assert!(f.matrix.determinant() > 0.0);
        }
    }

    #[test]
    fn normality_sample_needs_enough_trials() {
        let cfg = SimConfig::new(10, 0.1, 1.0, 0);
        assert!(normality_sample(&ModelSpec::linear(), &th(&[1.0, 0.5]), &cfg, 50).is_err());
    }

    #[test]
    fn checkpoints_match_windowed_estimates() {
        let m = ModelSpec::linear();
        let theta0 = th(&[1.0, 0.5]);
        let cfg = SimConfig::new(6, 0.1, 3.0, 21);
        let traj = simulate_ips(&m, &theta0, &cfg).unwrap();
        let ests = closed_form_checkpoints(&m, &theta0, &cfg, &[1.0, 2.0, 3.0]).unwrap();
        for (est, t) in ests.into_iter().zip([1.0, 2.0, 3.0]) {
            assert_eq!(est.unwrap(), mle_linear_closed_form(&traj, Some((0.0, t))).unwrap());
        }
    }
}
