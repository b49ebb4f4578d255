//! Parametric drift families `B(θ, x, μ) = b(θ, x) + ∫ φ(θ, x, y) μ(dy)`.
//!
//! Two built-in one-dimensional models are provided:
//!
//! * **linear mean-field**: `b = −θ₁x`, `φ = −θ₂(x − y)`. The interaction
//!   depends on the measure only through its mean, so the drift of every
//!   particle costs O(1) once the empirical mean is known.
//! * **opinion dynamics**: `b = 0`, `φ = −φ_θ(|x − y|)(x − y)` with the
//!   smoothed bump kernel `φ_θ(r) = θ₁ exp(−0.01 / (1 − (r − θ₂)²))`,
//!   taken as zero for `r ≤ 0` and wherever `(r − θ₂)² ≥ 1`.
//!
//! Anything else can be plugged in through [`CustomModel`].

use std::fmt;
use std::ops::Deref;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width parameter of the opinion-dynamics bump kernel.
const OPINION_BUMP_WIDTH: f64 = 0.01;

/// Parameter vector θ ∈ ℝᵖ. All entries are finite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Theta(Vec<f64>);

impl Theta {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("theta must be nonempty".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "theta entries must be finite, got {v}"
            )));
        }
        Ok(Theta(values))
    }

    /// Parses a comma separated list such as `"1,0.5"`.
    pub fn parse(s: &str) -> Result<Self> {
        let values = s
            .split(',')
            .map(|tok| {
                tok.trim().parse::<f64>().map_err(|_| {
                    Error::InvalidParameter(format!("cannot parse '{tok}' as a number"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Theta::new(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Theta {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Theta {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Theta::new(values)
    }
}

impl From<Theta> for Vec<f64> {
    fn from(theta: Theta) -> Self {
        theta.0
    }
}

impl fmt::Display for Theta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "({})", parts.join(", "))
    }
}

/// Uniform probability measure on a set of particle positions in ℝᵈ.
///
/// Positions are stored flat, particle-major: particle `j` occupies
/// `positions[j*d .. (j+1)*d]`. The mean is computed at most once.
#[derive(Debug)]
pub struct EmpiricalMeasure<'a> {
    positions: &'a [f64],
    dim: usize,
    mean: OnceLock<Vec<f64>>,
}

impl<'a> EmpiricalMeasure<'a> {
    pub fn new(positions: &'a [f64], dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("state dimension must be positive".into()));
        }
        if positions.is_empty() {
            return Err(Error::InvalidParameter(
                "empirical measure needs at least one particle".into(),
            ));
        }
        if positions.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                what: "particle positions",
                expected: dim,
                got: positions.len() % dim,
            });
        }
        if positions.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("particle positions must be finite".into()));
        }
        Ok(Self::new_unchecked(positions, dim))
    }

    /// Skips validation; the caller guarantees a nonempty, finite,
    /// correctly shaped slice.
    pub(crate) fn new_unchecked(positions: &'a [f64], dim: usize) -> Self {
        debug_assert!(!positions.is_empty() && positions.len() % dim == 0);
        EmpiricalMeasure {
            positions,
            dim,
            mean: OnceLock::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn positions(&self) -> &'a [f64] {
        self.positions
    }

    pub fn point(&self, j: usize) -> &'a [f64] {
        &self.positions[j * self.dim..(j + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &'a [f64]> + '_ {
        self.positions.chunks_exact(self.dim)
    }

    pub fn mean(&self) -> &[f64] {
        self.mean.get_or_init(|| {
            let mut m = vec![0.0; self.dim];
            for p in self.points() {
                for (acc, v) in m.iter_mut().zip(p) {
                    *acc += v;
                }
            }
            let n = self.len() as f64;
            m.iter_mut().for_each(|v| *v /= n);
            m
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    LinearMeanField,
    OpinionDynamics,
    Custom,
}

/// How the interaction term depends on the measure.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reduction {
    /// `∫φ dμ` depends on μ only through its mean.
    MeanOnly,
    /// Full O(N) sum over the measure's support.
    Pairwise,
}

type VecFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;
type PairFn = dyn Fn(&[f64], &[f64], &[f64], &mut [f64]) + Send + Sync;

/// User supplied drift components. Every callback writes into `out`,
/// which arrives zeroed.
///
/// * `confinement(θ, x, out[d])`
/// * `interaction(θ, x, y, out[d])`
/// * `grad_confinement(θ, x, out[p×d])`, row-major with one row per parameter
/// * `grad_interaction(θ, x, y, out[p×d])`
#[derive(Clone)]
pub struct CustomModel {
    pub name: String,
    pub param_dim: usize,
    pub state_dim: usize,
    pub confinement: Arc<VecFn>,
    pub interaction: Arc<PairFn>,
    pub grad_confinement: Arc<VecFn>,
    pub grad_interaction: Arc<PairFn>,
}

impl fmt::Debug for CustomModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomModel")
            .field("name", &self.name)
            .field("param_dim", &self.param_dim)
            .field("state_dim", &self.state_dim)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Debug)]
enum Family {
    Linear,
    Opinion,
    Custom(Arc<CustomModel>),
}

/// An immutable drift model plus constant diffusion coefficient σ.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    family: Family,
    sigma: f64,
}

impl ModelSpec {
    pub fn linear() -> Self {
        ModelSpec {
            family: Family::Linear,
            sigma: 1.0,
        }
    }

    pub fn opinion() -> Self {
        ModelSpec {
            family: Family::Opinion,
            sigma: 1.0,
        }
    }

    pub fn custom(model: CustomModel) -> Result<Self> {
        if model.param_dim == 0 || model.state_dim == 0 {
            return Err(Error::InvalidParameter(
                "custom model needs positive parameter and state dimensions".into(),
            ));
        }
        Ok(ModelSpec {
            family: Family::Custom(Arc::new(model)),
            sigma: 1.0,
        })
    }

    /// Looks up a built-in model by its config name (`linear` or `opinion`).
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "linear" | "linear-mean-field" => Ok(Self::linear()),
            "opinion" | "opinion-dynamics" => Ok(Self::opinion()),
            other => Err(Error::InvalidConfig(format!("unknown model '{other}'"))),
        }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        self.sigma = sigma;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        match &self.family {
            Family::Linear => "linear",
            Family::Opinion => "opinion",
            Family::Custom(c) => &c.name,
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self.family {
            Family::Linear => ModelKind::LinearMeanField,
            Family::Opinion => ModelKind::OpinionDynamics,
            Family::Custom(_) => ModelKind::Custom,
        }
    }

    pub fn reduction(&self) -> Reduction {
        match self.family {
            Family::Linear => Reduction::MeanOnly,
            _ => Reduction::Pairwise,
        }
    }

    pub fn param_dim(&self) -> usize {
        match &self.family {
            Family::Linear | Family::Opinion => 2,
            Family::Custom(c) => c.param_dim,
        }
    }

    pub fn state_dim(&self) -> usize {
        match &self.family {
            Family::Linear | Family::Opinion => 1,
            Family::Custom(c) => c.state_dim,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.param_dim() {
            return Err(Error::DimensionMismatch {
                what: "theta",
                expected: self.param_dim(),
                got: theta.len(),
            });
        }
        Ok(())
    }

    fn check_point(&self, x: &[f64], what: &'static str) -> Result<()> {
        if x.len() != self.state_dim() {
            return Err(Error::DimensionMismatch {
                what,
                expected: self.state_dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{what} must be finite")));
        }
        Ok(())
    }

    fn check_measure(&self, mu: &EmpiricalMeasure<'_>) -> Result<()> {
        if mu.dim() != self.state_dim() {
            return Err(Error::DimensionMismatch {
                what: "measure dimension",
                expected: self.state_dim(),
                got: mu.dim(),
            });
        }
        Ok(())
    }

    /// Confinement term `b(θ, x)`.
    pub fn confinement_b(&self, theta: &Theta, x: &[f64]) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        self.check_point(x, "x")?;
        let mut out = vec![0.0; self.state_dim()];
        self.confinement_into(theta, x, &mut out);
        Ok(out)
    }

    /// Interaction term `φ(θ, x, y)`.
    pub fn interaction_phi(&self, theta: &Theta, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        self.check_point(x, "x")?;
        self.check_point(y, "y")?;
        let mut out = vec![0.0; self.state_dim()];
        self.interaction_add(theta, x, y, 1.0, &mut out);
        Ok(out)
    }

    /// Full drift `B(θ, x, μ)`.
    pub fn drift_b(&self, theta: &Theta, x: &[f64], mu: &EmpiricalMeasure<'_>) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        self.check_point(x, "x")?;
        self.check_measure(mu)?;
        let mut out = vec![0.0; self.state_dim()];
        self.drift_into(theta, x, mu, &mut out);
        Ok(out)
    }

    /// Drift evaluated by summing `φ` over every atom of μ, ignoring the
    /// mean-only reduction. Useful as a cross-check of the fast path.
    pub fn drift_pairwise(
        &self,
        theta: &Theta,
        x: &[f64],
        mu: &EmpiricalMeasure<'_>,
    ) -> Result<Vec<f64>> {
        self.check_theta(theta)?;
        self.check_point(x, "x")?;
        self.check_measure(mu)?;
        let mut out = vec![0.0; self.state_dim()];
        self.confinement_into(theta, x, &mut out);
        let w = 1.0 / mu.len() as f64;
        for y in mu.points() {
            self.interaction_add(theta, x, y, w, &mut out);
        }
        Ok(out)
    }

    /// θ-Jacobian of the drift as a `p × d` matrix (row `k` is `∂B/∂θ_k`).
    pub fn grad_theta_b(
        &self,
        theta: &Theta,
        x: &[f64],
        mu: &EmpiricalMeasure<'_>,
    ) -> Result<DMatrix<f64>> {
        self.check_theta(theta)?;
        self.check_point(x, "x")?;
        self.check_measure(mu)?;
        let (p, d) = (self.param_dim(), self.state_dim());
        let mut drift = vec![0.0; d];
        let mut grad = vec![0.0; p * d];
        self.drift_and_grad_into(theta, x, mu, &mut drift, &mut grad);
        Ok(DMatrix::from_row_slice(p, d, &grad))
    }

    pub(crate) fn confinement_into(&self, theta: &[f64], x: &[f64], out: &mut [f64]) {
        match &self.family {
            Family::Linear => out[0] = -theta[0] * x[0],
            Family::Opinion => out[0] = 0.0,
            Family::Custom(c) => {
                out.iter_mut().for_each(|v| *v = 0.0);
                (c.confinement)(theta, x, out);
            }
        }
    }

    /// Adds `weight · φ(θ, x, y)` to `out`.
    fn interaction_add(&self, theta: &[f64], x: &[f64], y: &[f64], weight: f64, out: &mut [f64]) {
        match &self.family {
            Family::Linear => out[0] += weight * (-theta[1] * (x[0] - y[0])),
            Family::Opinion => {
                let diff = x[0] - y[0];
                out[0] += weight * (-opinion_kernel(theta[0], theta[1], diff.abs()) * diff);
            }
            Family::Custom(c) => {
                let mut tmp = vec![0.0; out.len()];
                (c.interaction)(theta, x, y, &mut tmp);
                for (o, t) in out.iter_mut().zip(&tmp) {
                    *o += weight * t;
                }
            }
        }
    }

    /// Hot-path drift. No validation beyond debug assertions.
    pub(crate) fn drift_into(
        &self,
        theta: &[f64],
        x: &[f64],
        mu: &EmpiricalMeasure<'_>,
        out: &mut [f64],
    ) {
        match &self.family {
            Family::Linear => {
                let m = mu.mean()[0];
                out[0] = -theta[0] * x[0] - theta[1] * (x[0] - m);
            }
            Family::Opinion => {
                let (a, r0) = (theta[0], theta[1]);
                let xi = x[0];
                let mut acc = 0.0;
                for &y in mu.positions() {
                    let diff = xi - y;
                    acc -= opinion_kernel(a, r0, diff.abs()) * diff;
                }
                out[0] = acc / mu.len() as f64;
            }
            Family::Custom(c) => {
                out.iter_mut().for_each(|v| *v = 0.0);
                (c.confinement)(theta, x, out);
                let w = 1.0 / mu.len() as f64;
                let mut tmp = vec![0.0; out.len()];
                for y in mu.points() {
                    tmp.iter_mut().for_each(|v| *v = 0.0);
                    (c.interaction)(theta, x, y, &mut tmp);
                    for (o, t) in out.iter_mut().zip(&tmp) {
                        *o += w * t;
                    }
                }
            }
        }
    }

    /// Hot-path drift and θ-Jacobian (`grad` is `p × d`, row-major).
    pub(crate) fn drift_and_grad_into(
        &self,
        theta: &[f64],
        x: &[f64],
        mu: &EmpiricalMeasure<'_>,
        drift: &mut [f64],
        grad: &mut [f64],
    ) {
        match &self.family {
            Family::Linear => {
                let m = mu.mean()[0];
                let centered = x[0] - m;
                drift[0] = -theta[0] * x[0] - theta[1] * centered;
                grad[0] = -x[0];
                grad[1] = -centered;
            }
            Family::Opinion => {
                let (a, r0) = (theta[0], theta[1]);
                let xi = x[0];
                let (mut b, mut g1, mut g2) = (0.0, 0.0, 0.0);
                for &y in mu.positions() {
                    let diff = xi - y;
                    if let Some(k) = OpinionKernelEval::at(a, r0, diff.abs()) {
                        b -= k.value * diff;
                        g1 -= k.d_scale * diff;
                        g2 -= k.d_range * diff;
                    }
                }
                let n = mu.len() as f64;
                drift[0] = b / n;
                grad[0] = g1 / n;
                grad[1] = g2 / n;
            }
            Family::Custom(c) => {
                self.drift_into(theta, x, mu, drift);
                grad.iter_mut().for_each(|v| *v = 0.0);
                (c.grad_confinement)(theta, x, grad);
                let w = 1.0 / mu.len() as f64;
                let mut tmp = vec![0.0; grad.len()];
                for y in mu.points() {
                    tmp.iter_mut().for_each(|v| *v = 0.0);
                    (c.grad_interaction)(theta, x, y, &mut tmp);
                    for (g, t) in grad.iter_mut().zip(&tmp) {
                        *g += w * t;
                    }
                }
            }
        }
    }
}

/// The smoothed bump `φ_θ(r)`; zero for `r ≤ 0` and outside `(θ₂ − 1, θ₂ + 1)`.
pub fn opinion_kernel(scale: f64, range: f64, r: f64) -> f64 {
    OpinionKernelEval::at(scale, range, r).map_or(0.0, |k| k.value)
}

/// Kernel value together with its partial derivatives in (θ₁, θ₂).
#[derive(Clone, Copy, Debug)]
pub struct OpinionKernelEval {
    pub value: f64,
    pub d_scale: f64,
    pub d_range: f64,
}

impl OpinionKernelEval {
    /// `None` when `r` lies outside the kernel support.
    pub fn at(scale: f64, range: f64, r: f64) -> Option<Self> {
        if r <= 0.0 {
            return None;
        }
        let u = r - range;
        let s = 1.0 - u * u;
        if s <= 0.0 {
            return None;
        }
        let bump = (-OPINION_BUMP_WIDTH / s).exp();
        Some(OpinionKernelEval {
            value: scale * bump,
            d_scale: bump,
            // ∂/∂θ₂ of −w/s with s = 1 − (r − θ₂)² is 2w·u/s²
            d_range: scale * bump * 2.0 * OPINION_BUMP_WIDTH * u / (s * s),
        })
    }
}
