//! Online estimation by stochastic gradient ascent in continuous time.
//!
//! Each observation step moves the estimate along
//!
//! ```text
//! dθ = γ_t ⊙ 1/σ² · ∇_θB(θ, x, μ) · (Δx − B(θ, x, μ) dt)
//! ```
//!
//! either averaged over all particles (one shared estimate) or separately
//! per particle (one estimate per particle, each using only its own
//! increment and the shared empirical measure). The parameter ODE is
//! discretized with explicit Euler on the observation grid.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{EmpiricalMeasure, ModelSpec, Theta};
use crate::rng::{stream_rng, PARAMETER_INIT_STREAM};
use crate::simulate::{predicted_position, IpsStepper, SimConfig, TrajectoryBatch};

/// Any |θ_j| above this aborts the run.
pub const THETA_DIVERGENCE_BOUND: f64 = 1e8;

/// Default cap on recorded history points per run.
pub const MAX_HISTORY: usize = 10_000;

/// A positive, non-increasing learning-rate schedule for one coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Schedule {
    /// `γ_t = c`. Zero is allowed and freezes the coordinate.
    Constant { value: f64 },
    /// `γ_t = min{γ₀, γ₀ t^{−α}}`, with `α ∈ (1/2, 1]`.
    PowerMin { gamma0: f64, alpha: f64 },
    /// `γ_t = C_γ / (C₀ + t)`.
    Reciprocal { c_gamma: f64, c0: f64 },
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Schedule::Constant { value } => value.is_finite() && value >= 0.0,
            Schedule::PowerMin { gamma0, alpha } => {
                gamma0.is_finite() && gamma0 > 0.0 && alpha > 0.5 && alpha <= 1.0
            }
            Schedule::Reciprocal { c_gamma, c0 } => {
                c_gamma.is_finite() && c0.is_finite() && c_gamma > 0.0 && c0 > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid learning-rate schedule {self:?}")))
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Schedule::Constant { value } => value,
            Schedule::PowerMin { gamma0, alpha } => {
                if t <= 1.0 {
                    gamma0
                } else {
                    gamma0 * t.powf(-alpha)
                }
            }
            Schedule::Reciprocal { c_gamma, c0 } => c_gamma / (c0 + t),
        }
    }

    /// Parses `const:c`, `powmin:γ0,α` or `recip:Cγ,C0`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("cannot parse learning rate '{s}'"));
        let (kind, args) = s.trim().split_once(':').ok_or_else(bad)?;
        let nums = args
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        let sched = match (kind, nums.as_slice()) {
            ("const" | "constant", [c]) => Schedule::Constant { value: *c },
            ("powmin" | "power-min", [g, a]) => Schedule::PowerMin {
                gamma0: *g,
                alpha: *a,
            },
            ("recip" | "reciprocal", [c, c0]) => Schedule::Reciprocal {
                c_gamma: *c,
                c0: *c0,
            },
            _ => return Err(bad()),
        };
        sched.validate()?;
        Ok(sched)
    }
}

/// Per-coordinate learning rates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LearningRate(pub Vec<Schedule>);

impl LearningRate {
    pub fn new(schedules: Vec<Schedule>) -> Result<Self> {
        if schedules.is_empty() {
            return Err(Error::InvalidConfig("learning rate needs at least one schedule".into()));
        }
        schedules.iter().try_for_each(Schedule::validate)?;
        Ok(LearningRate(schedules))
    }

    /// Same schedule on all `p` coordinates.
    pub fn uniform(schedule: Schedule, p: usize) -> Result<Self> {
        Self::new(vec![schedule; p])
    }

    /// Semicolon separated schedules, one per coordinate.
    pub fn parse(s: &str) -> Result<Self> {
        Self::new(s.split(';').map(Schedule::parse).collect::<Result<_>>()?)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        self.0.iter().map(|s| s.eval(t)).collect()
    }

    fn eval_into(&self, t: f64, out: &mut [f64]) {
        for (o, s) in out.iter_mut().zip(&self.0) {
            *o = s.eval(t);
        }
    }
}

/// Evaluates every coordinate's schedule at time `t`.
pub fn lr_eval(lr: &LearningRate, t: f64) -> Vec<f64> {
    lr.eval(t)
}

/// How the initial estimate of one coordinate is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ParamInit {
    Fixed { value: f64 },
    Uniform { low: f64, high: f64 },
}

impl ParamInit {
    fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("cannot parse parameter init '{s}'"));
        let (kind, args) = s.trim().split_once(':').ok_or_else(bad)?;
        let nums = args
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        let init = match (kind, nums.as_slice()) {
            ("fixed", [v]) => ParamInit::Fixed { value: *v },
            ("uniform", [a, b]) => ParamInit::Uniform { low: *a, high: *b },
            _ => return Err(bad()),
        };
        init.validate()?;
        Ok(init)
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            ParamInit::Fixed { value } => value.is_finite(),
            ParamInit::Uniform { low, high } => low.is_finite() && high.is_finite() && low <= high,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid parameter init {self:?}")))
        }
    }
}

/// Initial-estimate sampler, one entry per coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InitSpec(pub Vec<ParamInit>);

impl InitSpec {
    pub fn fixed(theta: &Theta) -> Self {
        InitSpec(theta.iter().map(|&value| ParamInit::Fixed { value }).collect())
    }

    /// Semicolon separated, e.g. `uniform:-1,2;fixed:0.1`.
    pub fn parse(s: &str) -> Result<Self> {
        Ok(InitSpec(s.split(';').map(ParamInit::parse).collect::<Result<_>>()?))
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::InvalidConfig("parameter init needs at least one entry".into()));
        }
        self.0.iter().try_for_each(ParamInit::validate)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<Theta> {
        self.validate()?;
        let values = self
            .0
            .iter()
            .map(|p| match *p {
                ParamInit::Fixed { value } => value,
                ParamInit::Uniform { low, high } => {
                    if low == high {
                        low
                    } else {
                        rng.random_range(low..high)
                    }
                }
            })
            .collect();
        Theta::new(values)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorMode {
    Averaged,
    PerParticle,
}

impl fmt::Display for EstimatorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EstimatorMode::Averaged => "averaged",
            EstimatorMode::PerParticle => "per-particle",
        })
    }
}

/// Current estimate and elapsed observation time.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorState {
    pub theta: Theta,
    pub t: f64,
    pub step: usize,
}

impl EstimatorState {
    pub fn new(theta: Theta) -> Self {
        EstimatorState {
            theta,
            t: 0.0,
            step: 0,
        }
    }

    fn apply(&mut self, gamma: &[f64], direction: &[f64], dt: f64) -> Result<()> {
        let mut next = self.theta.to_vec();
        for ((v, g), dir) in next.iter_mut().zip(gamma).zip(direction) {
            *v += g * dir;
        }
        if next.iter().any(|v| !(v.abs() <= THETA_DIVERGENCE_BOUND)) {
            return Err(Error::EstimatorDiverged { step: self.step });
        }
        self.theta = Theta::new(next).map_err(|_| Error::EstimatorDiverged { step: self.step })?;
        self.step += 1;
        self.t = self.step as f64 * dt;
        Ok(())
    }
}

fn check_frames(model: &ModelSpec, frame_k: &[f64], frame_k1: &[f64], gamma: &[f64]) -> Result<()> {
    let d = model.state_dim();
    if frame_k.is_empty() || frame_k.len() % d != 0 || frame_k.len() != frame_k1.len() {
        return Err(Error::DimensionMismatch {
            what: "observation frames",
            expected: frame_k.len(),
            got: frame_k1.len(),
        });
    }
    if gamma.len() != model.param_dim() {
        return Err(Error::DimensionMismatch {
            what: "learning-rate vector",
            expected: model.param_dim(),
            got: gamma.len(),
        });
    }
    if frame_k.iter().chain(frame_k1).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("observation frames must be finite".into()));
    }
    Ok(())
}

/// Ascent direction for particle `x` with successor `y`, added into `out`
/// with weight `w`: `w · ∇_θB(θ, x, μ) · (y − (x + B dt))`.
///
/// The innovation is formed with the simulator's own Euler expression, so
/// data generated at θ without noise gives exactly zero.
#[allow(clippy::too_many_arguments)]
fn add_direction(
    model: &ModelSpec,
    theta: &[f64],
    x: &[f64],
    y: &[f64],
    mu: &EmpiricalMeasure<'_>,
    dt: f64,
    w: f64,
    drift: &mut [f64],
    jac: &mut [f64],
    out: &mut [f64],
) {
    let d = x.len();
    model.drift_and_grad_into(theta, x, mu, drift, jac);
    for c in 0..d {
        let innovation = y[c] - predicted_position(x[c], drift[c], dt);
        for (j, o) in out.iter_mut().enumerate() {
            *o += w * jac[j * d + c] * innovation;
        }
    }
}

/// The averaged ascent direction `1/(Nσ²) Σ_i ∇_θB(θ, x_i, μ)(Δx_i − B dt)`
/// before the learning rate is applied.
pub fn averaged_direction(
    model: &ModelSpec,
    theta: &Theta,
    frame_k: &[f64],
    frame_k1: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    model.check_theta(theta)?;
    check_frames(model, frame_k, frame_k1, &vec![0.0; model.param_dim()])?;
    Ok(averaged_direction_unchecked(model, theta, frame_k, frame_k1, dt))
}

fn averaged_direction_unchecked(
    model: &ModelSpec,
    theta: &[f64],
    frame_k: &[f64],
    frame_k1: &[f64],
    dt: f64,
) -> Vec<f64> {
    let (p, d) = (model.param_dim(), model.state_dim());
    let mu = EmpiricalMeasure::new_unchecked(frame_k, d);
    let w = 1.0 / (mu.len() as f64 * model.sigma() * model.sigma());
    let mut drift = vec![0.0; d];
    let mut jac = vec![0.0; p * d];
    let mut dir = vec![0.0; p];
    for (x, y) in frame_k.chunks_exact(d).zip(frame_k1.chunks_exact(d)) {
        add_direction(model, theta, x, y, &mu, dt, w, &mut drift, &mut jac, &mut dir);
    }
    dir
}

/// One step of the averaged estimator from `frame_k` to `frame_k1`.
pub fn online_step_averaged(
    model: &ModelSpec,
    state: &mut EstimatorState,
    frame_k: &[f64],
    frame_k1: &[f64],
    dt: f64,
    gamma: &[f64],
) -> Result<()> {
    model.check_theta(&state.theta)?;
    check_frames(model, frame_k, frame_k1, gamma)?;
    let dir = averaged_direction_unchecked(model, &state.theta, frame_k, frame_k1, dt);
    state.apply(gamma, &dir, dt)
}

/// One step of the per-particle estimators; `states[i]` only sees the
/// increment of particle `i`.
pub fn online_step_per_particle(
    model: &ModelSpec,
    states: &mut [EstimatorState],
    frame_k: &[f64],
    frame_k1: &[f64],
    dt: f64,
    gamma: &[f64],
) -> Result<()> {
    check_frames(model, frame_k, frame_k1, gamma)?;
    let (p, d) = (model.param_dim(), model.state_dim());
    if states.len() * d != frame_k.len() {
        return Err(Error::DimensionMismatch {
            what: "per-particle estimators",
            expected: frame_k.len() / d,
            got: states.len(),
        });
    }
    let mu = EmpiricalMeasure::new_unchecked(frame_k, d);
    let w = 1.0 / (model.sigma() * model.sigma());
    let mut drift = vec![0.0; d];
    let mut jac = vec![0.0; p * d];
    let mut dir = vec![0.0; p];
    for ((state, x), y) in states
        .iter_mut()
        .zip(frame_k.chunks_exact(d))
        .zip(frame_k1.chunks_exact(d))
    {
        model.check_theta(&state.theta)?;
        dir.iter_mut().for_each(|v| *v = 0.0);
        add_direction(model, &state.theta, x, y, &mu, dt, w, &mut drift, &mut jac, &mut dir);
        state.apply(gamma, &dir, dt)?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineConfig {
    pub lr: LearningRate,
    pub init: InitSpec,
    pub mode: EstimatorMode,
    #[serde(default = "default_history")]
    pub max_history: usize,
}

fn default_history() -> usize {
    MAX_HISTORY
}

impl OnlineConfig {
    pub fn new(lr: LearningRate, init: InitSpec, mode: EstimatorMode) -> Self {
        OnlineConfig {
            lr,
            init,
            mode,
            max_history: MAX_HISTORY,
        }
    }

    fn validate(&self, model: &ModelSpec) -> Result<()> {
        let p = model.param_dim();
        if self.lr.len() != p {
            return Err(Error::DimensionMismatch {
                what: "learning-rate schedules",
                expected: p,
                got: self.lr.len(),
            });
        }
        self.lr.0.iter().try_for_each(Schedule::validate)?;
        if self.init.0.len() != p {
            return Err(Error::DimensionMismatch {
                what: "parameter init",
                expected: p,
                got: self.init.0.len(),
            });
        }
        if self.max_history < 2 {
            return Err(Error::InvalidConfig("max_history must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryPoint {
    pub t: f64,
    /// Estimate (per-particle mode: mean over particles).
    pub theta: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OnlineRun {
    pub mode: EstimatorMode,
    pub initial: Theta,
    pub history: Vec<HistoryPoint>,
    /// One estimate in averaged mode, one per particle otherwise.
    pub final_estimates: Vec<Theta>,
}

impl OnlineRun {
    /// Terminal squared error per coordinate (mean over particles in
    /// per-particle mode).
    pub fn terminal_sq_error(&self, theta_true: &Theta) -> Vec<f64> {
        let n = self.final_estimates.len() as f64;
        let mut out = vec![0.0; theta_true.len()];
        for est in &self.final_estimates {
            for ((o, e), t) in out.iter_mut().zip(est.iter()).zip(theta_true.iter()) {
                *o += (e - t) * (e - t) / n;
            }
        }
        out
    }

    /// Terminal absolute error per coordinate (mean over particles in
    /// per-particle mode).
    pub fn terminal_abs_error(&self, theta_true: &Theta) -> Vec<f64> {
        let n = self.final_estimates.len() as f64;
        let mut out = vec![0.0; theta_true.len()];
        for est in &self.final_estimates {
            for ((o, e), t) in out.iter_mut().zip(est.iter()).zip(theta_true.iter()) {
                *o += (e - t).abs() / n;
            }
        }
        out
    }

    /// Mean of the final estimates.
    pub fn final_mean(&self) -> Vec<f64> {
        mean_theta(&self.final_estimates)
    }
}

fn mean_theta(states: &[Theta]) -> Vec<f64> {
    let n = states.len() as f64;
    let mut m = vec![0.0; states[0].len()];
    for s in states {
        for (a, v) in m.iter_mut().zip(s.iter()) {
            *a += v / n;
        }
    }
    m
}

/// Streams observation frames through the chosen estimator.
struct OnlineDriver<'a> {
    model: &'a ModelSpec,
    cfg: &'a OnlineConfig,
    dt: f64,
    stride: usize,
    gamma: Vec<f64>,
    states: Vec<EstimatorState>,
    history: Vec<HistoryPoint>,
    initial: Theta,
}

impl<'a> OnlineDriver<'a> {
    fn new(
        model: &'a ModelSpec,
        cfg: &'a OnlineConfig,
        n_particles: usize,
        steps: usize,
        dt: f64,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate(model)?;
        let initial = cfg.init.sample(&mut stream_rng(seed, PARAMETER_INIT_STREAM))?;
        let copies = match cfg.mode {
            EstimatorMode::Averaged => 1,
            EstimatorMode::PerParticle => n_particles,
        };
        let stride = steps.div_ceil(cfg.max_history - 1).max(1);
        Ok(OnlineDriver {
            model,
            cfg,
            dt,
            stride,
            gamma: vec![0.0; model.param_dim()],
            states: vec![EstimatorState::new(initial.clone()); copies],
            history: vec![HistoryPoint {
                t: 0.0,
                theta: initial.to_vec(),
            }],
            initial,
        })
    }

    fn observe(&mut self, k: usize, frame_k: &[f64], frame_k1: &[f64], last: bool) -> Result<()> {
        self.cfg.lr.eval_into(k as f64 * self.dt, &mut self.gamma);
        match self.cfg.mode {
            EstimatorMode::Averaged => {
                online_step_averaged(self.model, &mut self.states[0], frame_k, frame_k1, self.dt, &self.gamma)?
            }
            EstimatorMode::PerParticle => {
                online_step_per_particle(self.model, &mut self.states, frame_k, frame_k1, self.dt, &self.gamma)?
            }
        }
        if (k + 1) % self.stride == 0 || last {
            self.history.push(HistoryPoint {
                t: (k + 1) as f64 * self.dt,
                theta: self.current_mean(),
            });
        }
        Ok(())
    }

    fn current_mean(&self) -> Vec<f64> {
        let thetas: Vec<Theta> = self.states.iter().map(|s| s.theta.clone()).collect();
        mean_theta(&thetas)
    }

    fn finish(self) -> OnlineRun {
        OnlineRun {
            mode: self.cfg.mode,
            initial: self.initial,
            history: self.history,
            final_estimates: self.states.into_iter().map(|s| s.theta).collect(),
        }
    }
}

/// Simulates the IPS at `theta_true` and runs the online estimator on the
/// frames as they are produced. The initial estimate is drawn from
/// `cfg.init` on a dedicated stream of `sim_cfg.seed`; in per-particle
/// mode all particles start from that same draw.
pub fn run_online(
    model: &ModelSpec,
    theta_true: &Theta,
    sim_cfg: &SimConfig,
    cfg: &OnlineConfig,
) -> Result<OnlineRun> {
    let mut sim = IpsStepper::new(model, theta_true, sim_cfg)?;
    let steps = sim.total_steps();
    let mut driver = OnlineDriver::new(model, cfg, sim_cfg.n_particles, steps, sim_cfg.dt, sim_cfg.seed)?;
    while sim.advance()? {
        let k = sim.step_index() - 1;
        driver.observe(k, sim.previous(), sim.current(), k + 1 == steps)?;
    }
    Ok(driver.finish())
}

/// Replays a stored trajectory through the online estimator.
///
/// `horizon`, when given, must not exceed the trajectory's.
pub fn run_online_replay(
    model: &ModelSpec,
    traj: &TrajectoryBatch,
    cfg: &OnlineConfig,
    seed: u64,
    horizon: Option<f64>,
) -> Result<OnlineRun> {
    if traj.state_dim != model.state_dim() {
        return Err(Error::DimensionMismatch {
            what: "trajectory state dimension",
            expected: model.state_dim(),
            got: traj.state_dim,
        });
    }
    let steps = match horizon {
        Some(h) => traj.window_steps(0.0, h)?.end,
        None => traj.steps(),
    };
    let mut driver = OnlineDriver::new(model, cfg, traj.n_particles, steps, traj.dt, seed)?;
    for k in 0..steps {
        driver.observe(k, traj.frame(k), traj.frame(k + 1), k + 1 == steps)?;
    }
    Ok(driver.finish())
}
