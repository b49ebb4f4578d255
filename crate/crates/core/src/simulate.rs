//! Euler–Maruyama simulation of the N-particle system
//!
//! `x'_i = x_i + B(θ, x_i, μᴺ)·dt + σ·Δw_i`
//!
//! where μᴺ is the empirical measure of the state at the *start* of the
//! step, so all particles advance from the same snapshot.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{EmpiricalMeasure, ModelKind, ModelSpec, Theta};
use crate::rng::{stream_rng, SURROGATE_STREAM_BASE};

/// Any |x| above this aborts the run.
pub const DIVERGENCE_BOUND: f64 = 1e12;

/// Particle-count multiplier of the auxiliary population used to stand in
/// for the true law when no closed form is available.
pub const SURROGATE_FACTOR: usize = 32;

/// Initial law of each coordinate of each particle (i.i.d.).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialCondition {
    PointMass { x0: f64 },
    Normal { mean: f64, std: f64 },
}

impl Default for InitialCondition {
    /// `N(1, 1)`. A nonzero mean keeps both linear-model parameters
    /// jointly identifiable.
    fn default() -> Self {
        InitialCondition::Normal {
            mean: 1.0,
            std: 1.0,
        }
    }
}

impl InitialCondition {
    pub fn mean(&self) -> f64 {
        match *self {
            InitialCondition::PointMass { x0 } => x0,
            InitialCondition::Normal { mean, .. } => mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            InitialCondition::PointMass { .. } => 0.0,
            InitialCondition::Normal { std, .. } => std * std,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            InitialCondition::PointMass { x0 } => x0.is_finite(),
            InitialCondition::Normal { mean, std } => mean.is_finite() && std.is_finite() && std >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("invalid initial condition {self:?}")))
        }
    }

    fn sample_into(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        match *self {
            InitialCondition::PointMass { x0 } => out.iter_mut().for_each(|v| *v = x0),
            InitialCondition::Normal { mean, std } => out.iter_mut().for_each(|v| {
                let z: f64 = rng.sample(StandardNormal);
                *v = mean + std * z;
            }),
        }
    }

    /// Parses `point:x0` or `normal:mean,std`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("cannot parse initial condition '{s}'"));
        let (kind, args) = s.split_once(':').ok_or_else(bad)?;
        let nums = args
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        let ic = match (kind.trim(), nums.as_slice()) {
            ("point", [x0]) => InitialCondition::PointMass { x0: *x0 },
            ("normal", [mean, std]) => InitialCondition::Normal {
                mean: *mean,
                std: *std,
            },
            _ => return Err(bad()),
        };
        ic.validate()?;
        Ok(ic)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_particles: usize,
    pub dt: f64,
    pub horizon: f64,
    #[serde(default)]
    pub init: InitialCondition,
    pub seed: u64,
    #[serde(default)]
    pub record_noise: bool,
}

impl SimConfig {
    pub fn new(n_particles: usize, dt: f64, horizon: f64, seed: u64) -> Self {
        SimConfig {
            n_particles,
            dt,
            horizon,
            init: InitialCondition::default(),
            seed,
            record_noise: false,
        }
    }

    pub fn with_init(mut self, init: InitialCondition) -> Self {
        self.init = init;
        self
    }

    pub fn with_noise(mut self, record: bool) -> Self {
        self.record_noise = record;
        self
    }

    /// Validates the config and returns the number of Euler steps.
    pub fn steps(&self) -> Result<usize> {
        if self.n_particles == 0 {
            return Err(Error::InvalidConfig("n_particles must be at least 1".into()));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon.is_finite() && self.horizon >= self.dt) {
            return Err(Error::InvalidConfig(format!(
                "horizon {} must be at least dt {}",
                self.horizon, self.dt
            )));
        }
        let ratio = self.horizon / self.dt;
        let steps = ratio.round();
        if ((ratio - steps) / ratio).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!(
                "horizon {} is not an integer multiple of dt {}",
                self.horizon, self.dt
            )));
        }
        self.init.validate()?;
        Ok(steps as usize)
    }
}

/// A full recorded run: `K + 1` frames of `N` particles in ℝᵈ.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryBatch {
    pub model_id: String,
    pub sigma: f64,
    pub theta_true: Theta,
    pub n_particles: usize,
    pub state_dim: usize,
    pub dt: f64,
    pub times: Vec<f64>,
    /// Flat `[K+1][N][d]`.
    pub states: Vec<f64>,
    /// Flat `[K][N][d]` Brownian increments, if recorded.
    pub noise: Option<Vec<f64>>,
    pub config: Option<SimConfig>,
}

impl TrajectoryBatch {
    /// Assembles a batch from raw frames, checking shapes and finiteness.
    pub fn from_frames(
        model: &ModelSpec,
        theta_true: Theta,
        n_particles: usize,
        dt: f64,
        frames: Vec<Vec<f64>>,
        noise: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let d = model.state_dim();
        let width = n_particles * d;
        if frames.len() < 2 {
            return Err(Error::InvalidParameter("trajectory needs at least two frames".into()));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
        }
        for f in &frames {
            if f.len() != width {
                return Err(Error::DimensionMismatch {
                    what: "trajectory frame",
                    expected: width,
                    got: f.len(),
                });
            }
        }
        let noise = match noise {
            Some(nz) => {
                if nz.len() != frames.len() - 1 || nz.iter().any(|f| f.len() != width) {
                    return Err(Error::InvalidParameter("noise frames do not match states".into()));
                }
                Some(nz.concat())
            }
            None => None,
        };
        let states = frames.concat();
        if states.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("trajectory contains non-finite values".into()));
        }
        let times = (0..frames.len()).map(|k| k as f64 * dt).collect();
        Ok(TrajectoryBatch {
            model_id: model.name().to_string(),
            sigma: model.sigma(),
            theta_true,
            n_particles,
            state_dim: d,
            dt,
            times,
            states,
            noise,
            config: None,
        })
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    fn width(&self) -> usize {
        self.n_particles * self.state_dim
    }

    pub fn frame(&self, k: usize) -> &[f64] {
        let w = self.width();
        &self.states[k * w..(k + 1) * w]
    }

    pub fn noise_frame(&self, k: usize) -> Option<&[f64]> {
        let w = self.width();
        self.noise.as_ref().map(|nz| &nz[k * w..(k + 1) * w])
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.states.chunks_exact(self.width())
    }

    /// Index range of steps `k` (frame `k` to `k+1`) covering `[start, end]`.
    pub fn window_steps(&self, start: f64, end: f64) -> Result<std::ops::Range<usize>> {
        let horizon = self.horizon();
        let tol = 1e-9 * horizon.max(1.0);
        if !(start >= 0.0 && end >= start && end <= horizon + tol) {
            return Err(Error::WindowOutOfRange {
                start,
                end,
                horizon,
            });
        }
        let a = (start / self.dt).round() as usize;
        let b = ((end / self.dt).round() as usize).min(self.steps());
        Ok(a..b)
    }
}

/// One Euler–Maruyama step from `state` (flat `[N][d]`) with the given
/// Brownian increments (already scaled to variance `dt`).
pub fn step_euler(
    model: &ModelSpec,
    theta: &Theta,
    state: &[f64],
    dt: f64,
    noise: &[f64],
) -> Result<Vec<f64>> {
    model.check_theta(theta)?;
    let d = model.state_dim();
    if state.is_empty() || state.len() % d != 0 {
        return Err(Error::DimensionMismatch {
            what: "state",
            expected: d,
            got: state.len() % d,
        });
    }
    if noise.len() != state.len() {
        return Err(Error::DimensionMismatch {
            what: "noise",
            expected: state.len(),
            got: noise.len(),
        });
    }
    let mu = EmpiricalMeasure::new(state, d)?;
    let mut out = vec![0.0; state.len()];
    step_into(model, theta, state, &mu, dt, noise, &mut out, 0)?;
    Ok(out)
}

/// Advances every particle of `state` under the drift induced by `law`.
///
/// For the ordinary IPS step `law` is the empirical measure of `state`
/// itself; the coupled proxy passes a surrogate instead.
#[allow(clippy::too_many_arguments)]
pub(crate) fn step_into(
    model: &ModelSpec,
    theta: &[f64],
    state: &[f64],
    law: &EmpiricalMeasure<'_>,
    dt: f64,
    noise: &[f64],
    out: &mut [f64],
    step: usize,
) -> Result<()> {
    let d = model.state_dim();
    let sigma = model.sigma();
    let mut drift = vec![0.0; d];
    for ((x, dw), next) in state
        .chunks_exact(d)
        .zip(noise.chunks_exact(d))
        .zip(out.chunks_exact_mut(d))
    {
        model.drift_into(theta, x, law, &mut drift);
        for c in 0..d {
            let v = euler_update(x[c], drift[c], dt, sigma, dw[c]);
            if !(v.abs() <= DIVERGENCE_BOUND) {
                return Err(Error::SimulationDiverged { step });
            }
            next[c] = v;
        }
    }
    Ok(())
}

/// The single expression used for every Euler update, so that callers can
/// reproduce the arithmetic exactly (see [`predicted_position`]).
#[inline]
pub(crate) fn euler_update(x: f64, drift: f64, dt: f64, sigma: f64, dw: f64) -> f64 {
    predicted_position(x, drift, dt) + sigma * dw
}

/// Deterministic part of an Euler step, `x + B·dt`.
#[inline]
pub(crate) fn predicted_position(x: f64, drift: f64, dt: f64) -> f64 {
    x + drift * dt
}

/// Incremental IPS simulator. Holds the previous and current frame plus the
/// increments that connected them.
pub struct IpsStepper<'m> {
    model: &'m ModelSpec,
    theta: Vec<f64>,
    dt: f64,
    sqrt_dt: f64,
    steps: usize,
    k: usize,
    prev: Vec<f64>,
    cur: Vec<f64>,
    noise: Vec<f64>,
    rngs: Vec<ChaCha8Rng>,
}

impl<'m> IpsStepper<'m> {
    pub fn new(model: &'m ModelSpec, theta: &Theta, cfg: &SimConfig) -> Result<Self> {
        Self::with_streams(model, theta, cfg, cfg.n_particles, 0)
    }

    fn with_streams(
        model: &'m ModelSpec,
        theta: &Theta,
        cfg: &SimConfig,
        n: usize,
        stream_offset: u64,
    ) -> Result<Self> {
        model.check_theta(theta)?;
        let steps = cfg.steps()?;
        let d = model.state_dim();
        let mut rngs: Vec<ChaCha8Rng> = (0..n)
            .map(|i| stream_rng(cfg.seed, stream_offset + i as u64))
            .collect();
        let mut cur = vec![0.0; n * d];
        for (x, rng) in cur.chunks_exact_mut(d).zip(rngs.iter_mut()) {
            cfg.init.sample_into(rng, x);
        }
        Ok(IpsStepper {
            model,
            theta: theta.to_vec(),
            dt: cfg.dt,
            sqrt_dt: cfg.dt.sqrt(),
            steps,
            k: 0,
            prev: cur.clone(),
            cur,
            noise: vec![0.0; n * d],
            rngs,
        })
    }

    pub fn step_index(&self) -> usize {
        self.k
    }

    pub fn total_steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.k >= self.steps
    }

    pub fn time(&self) -> f64 {
        self.k as f64 * self.dt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn current(&self) -> &[f64] {
        &self.cur
    }

    /// Frame before the most recent step (equals `current` before any step).
    pub fn previous(&self) -> &[f64] {
        &self.prev
    }

    /// Increments used by the most recent step.
    pub fn noise(&self) -> &[f64] {
        &self.noise
    }

    fn draw_noise(&mut self) {
        let d = self.model.state_dim();
        let sqrt_dt = self.sqrt_dt;
        for (dw, rng) in self.noise.chunks_exact_mut(d).zip(self.rngs.iter_mut()) {
            for v in dw {
                let z: f64 = rng.sample(StandardNormal);
                *v = sqrt_dt * z;
            }
        }
    }

    /// Performs one step. Returns `false` once the horizon is reached.
    pub fn advance(&mut self) -> Result<bool> {
        if self.is_done() {
            return Ok(false);
        }
        self.draw_noise();
        std::mem::swap(&mut self.prev, &mut self.cur);
        let mu = EmpiricalMeasure::new_unchecked(&self.prev, self.model.state_dim());
        step_into(
            self.model,
            &self.theta,
            &self.prev,
            &mu,
            self.dt,
            &self.noise,
            &mut self.cur,
            self.k,
        )?;
        self.k += 1;
        Ok(true)
    }
}

/// Simulates the interacting particle system over the configured grid.
pub fn simulate_ips(model: &ModelSpec, theta_true: &Theta, cfg: &SimConfig) -> Result<TrajectoryBatch> {
    let mut sim = IpsStepper::new(model, theta_true, cfg)?;
    let steps = sim.total_steps();
    let width = sim.current().len();
    let mut states = Vec::with_capacity((steps + 1) * width);
    states.extend_from_slice(sim.current());
    let mut noise = cfg.record_noise.then(|| Vec::with_capacity(steps * width));
    while sim.advance()? {
        states.extend_from_slice(sim.current());
        if let Some(nz) = noise.as_mut() {
            nz.extend_from_slice(sim.noise());
        }
    }
    Ok(TrajectoryBatch {
        model_id: model.name().to_string(),
        sigma: model.sigma(),
        theta_true: theta_true.clone(),
        n_particles: cfg.n_particles,
        state_dim: model.state_dim(),
        dt: cfg.dt,
        times: (0..=steps).map(|k| k as f64 * cfg.dt).collect(),
        states,
        noise,
        config: Some(cfg.clone()),
    })
}

/// What the coupled proxy system interacts with in place of the true law.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LawSurrogate {
    /// Closed form for the linear model when available, otherwise an
    /// auxiliary population of [`SURROGATE_FACTOR`]·N particles.
    Auto,
    /// Linear model only: the law enters through its mean, which under the
    /// Euler scheme is `m_k = m_0 (1 − θ₁ dt)^k` exactly.
    ClosedFormMean,
    /// An independent IPS with `factor · N` particles.
    Population { factor: usize },
}

/// Runs the IPS and a synchronously coupled proxy (same initial positions,
/// same increments) whose particles feel a surrogate of the true law
/// instead of the empirical measure.
pub fn simulate_coupled_pair(
    model: &ModelSpec,
    theta_true: &Theta,
    cfg: &SimConfig,
) -> Result<(TrajectoryBatch, TrajectoryBatch)> {
    simulate_coupled_pair_with(model, theta_true, cfg, LawSurrogate::Auto)
}

pub fn simulate_coupled_pair_with(
    model: &ModelSpec,
    theta_true: &Theta,
    cfg: &SimConfig,
    surrogate: LawSurrogate,
) -> Result<(TrajectoryBatch, TrajectoryBatch)> {
    let surrogate = match surrogate {
        LawSurrogate::Auto if model.kind() == ModelKind::LinearMeanField => {
            LawSurrogate::ClosedFormMean
        }
        LawSurrogate::Auto => LawSurrogate::Population {
            factor: SURROGATE_FACTOR,
        },
        other => other,
    };
    if surrogate == LawSurrogate::ClosedFormMean && model.kind() != ModelKind::LinearMeanField {
        return Err(Error::InvalidConfig(
            "closed-form law surrogate exists only for the linear model".into(),
        ));
    }
    let d = model.state_dim();
    let mut ips = IpsStepper::new(model, theta_true, cfg)?;
    let mut population = match surrogate {
        LawSurrogate::Population { factor } => {
            if factor == 0 {
                return Err(Error::InvalidConfig("surrogate factor must be positive".into()));
            }
            Some(IpsStepper::with_streams(
                model,
                theta_true,
                cfg,
                factor * cfg.n_particles,
                SURROGATE_STREAM_BASE,
            )?)
        }
        _ => None,
    };
    let steps = ips.total_steps();
    let width = ips.current().len();
    let mut proxy = ips.current().to_vec();
    let mut proxy_next = vec![0.0; width];
    let mut ips_states = Vec::with_capacity((steps + 1) * width);
    let mut proxy_states = Vec::with_capacity((steps + 1) * width);
    ips_states.extend_from_slice(ips.current());
    proxy_states.extend_from_slice(&proxy);
    let mut noise = cfg.record_noise.then(|| Vec::with_capacity(steps * width));
    let mut law_mean = cfg.init.mean();
    let contraction = 1.0 - theta_true[0] * cfg.dt;

    for k in 0..steps {
        ips.advance()?;
        let mean_atom = [law_mean];
        let law = match &population {
            Some(pop) => EmpiricalMeasure::new_unchecked(pop.current(), d),
            None => EmpiricalMeasure::new_unchecked(&mean_atom, d),
        };
        step_into(model, theta_true, &proxy, &law, cfg.dt, ips.noise(), &mut proxy_next, k)?;
        std::mem::swap(&mut proxy, &mut proxy_next);
        if let Some(pop) = population.as_mut() {
            pop.advance()?;
        }
        law_mean *= contraction;

        ips_states.extend_from_slice(ips.current());
        proxy_states.extend_from_slice(&proxy);
        if let Some(nz) = noise.as_mut() {
            nz.extend_from_slice(ips.noise());
        }
    }

    let batch = |states: Vec<f64>, noise: Option<Vec<f64>>| TrajectoryBatch {
        model_id: model.name().to_string(),
        sigma: model.sigma(),
        theta_true: theta_true.clone(),
        n_particles: cfg.n_particles,
        state_dim: d,
        dt: cfg.dt,
        times: (0..=steps).map(|k| k as f64 * cfg.dt).collect(),
        states,
        noise,
        config: Some(cfg.clone()),
    };
    Ok((batch(ips_states, noise.clone()), batch(proxy_states, noise)))
}

/// Independent McKean–Vlasov paths for the linear model (observation
/// "Case I"): each particle interacts with the exact law mean rather than
/// the empirical mean.
pub fn simulate_mckean_vlasov_linear(theta_true: &Theta, cfg: &SimConfig, sigma: f64) -> Result<TrajectoryBatch> {
    let model = ModelSpec::linear().with_sigma(sigma)?;
    let (_, proxy) =
        simulate_coupled_pair_with(&model, theta_true, cfg, LawSurrogate::ClosedFormMean)?;
    Ok(proxy)
}
