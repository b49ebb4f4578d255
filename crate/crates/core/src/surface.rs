//! Asymptotic log-likelihood surfaces for the linear mean-field model.
//!
//! Two limits are compared. Under the McKean–Vlasov law the stationary
//! contrast depends on θ only through θ₁ + θ₂, so it has a ridge of
//! maximizers. The finite-N particle system has a Gaussian invariant law,
//! which restores a unique maximizer whose curvature across the ridge
//! shrinks like 1/N. Both assume unit diffusion.

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::Theta;

fn pair(theta: &Theta) -> Result<(f64, f64)> {
    if theta.len() != 2 {
        return Err(Error::DimensionMismatch {
            what: "linear model parameter",
            expected: 2,
            got: theta.len(),
        });
    }
    Ok((theta[0], theta[1]))
}

/// Limit of `ℓ_t(θ)/t` under the McKean–Vlasov law started in its
/// stationary state: `−((θ₁ + θ₂) − s₀)² / (4 s₀)` with `s₀ = θ₁,₀ + θ₂,₀`.
pub fn asymptotic_contrast_linear(theta: &Theta, theta0: &Theta) -> Result<f64> {
    let (a, b) = pair(theta)?;
    let (a0, b0) = pair(theta0)?;
    let s0 = a0 + b0;
    if !(s0 > 0.0) {
        return Err(Error::Domain(format!(
            "stationary contrast needs θ₁ + θ₂ > 0 at the truth, got {s0}"
        )));
    }
    let gap = (a + b) - s0;
    Ok(-gap * gap / (4.0 * s0))
}

/// Invariant covariance of the N-particle linear system,
/// `Σ = P/(2θ₁) + (I − P)/(2(θ₁ + θ₂))` with `P = 11ᵀ/N`.
///
/// Stored as the two coefficients on `P` and `I − P`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IpsInvariantCovariance {
    pub n: usize,
    /// Variance of the particle mean direction, `1/(2θ₁)`.
    pub on_mean: f64,
    /// Variance on the centered subspace, `1/(2(θ₁ + θ₂))`.
    pub centered: f64,
}

impl IpsInvariantCovariance {
    pub fn new(theta0: &Theta, n: usize) -> Result<Self> {
        let (a0, b0) = pair(theta0)?;
        if n == 0 {
            return Err(Error::InvalidParameter("need at least one particle".into()));
        }
        if !(a0 > 0.0) || !(a0 + b0 > 0.0) {
            return Err(Error::Domain(format!(
                "invariant law needs θ₁ > 0 and θ₁ + θ₂ > 0, got ({a0}, {b0})"
            )));
        }
        Ok(IpsInvariantCovariance {
            n,
            on_mean: 1.0 / (2.0 * a0),
            centered: 1.0 / (2.0 * (a0 + b0)),
        })
    }

    /// Common diagonal entry of Σ.
    pub fn diagonal(&self) -> f64 {
        let n = self.n as f64;
        self.on_mean / n + self.centered * (1.0 - 1.0 / n)
    }

    /// Common off-diagonal entry of Σ.
    pub fn off_diagonal(&self) -> f64 {
        (self.on_mean - self.centered) / self.n as f64
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let (diag, off) = (self.diagonal(), self.off_diagonal());
        DMatrix::from_fn(self.n, self.n, |i, j| if i == j { diag } else { off })
    }

    /// Stationary moments `(C₁, C₂, C₃)` with
    /// `C₁ = E[(1/N)Σ x_i²]`, `C₂ = E[(1/N)Σ x_i(x_i − x̄)]`,
    /// `C₃ = E[(1/N)Σ (x_i − x̄)²]`. The last two coincide.
    pub fn moments(&self) -> (f64, f64, f64) {
        let n = self.n as f64;
        let c = self.centered * (1.0 - 1.0 / n);
        (self.on_mean / n + c, c, c)
    }
}

/// Limit of `ℓ_t(θ)/t` for the N-particle system in stationarity,
/// normalized by N:
///
/// `−½[(θ₁ − θ₁,₀)² C₁ + 2(θ₁ − θ₁,₀)(θ₂ − θ₂,₀) C₂ + (θ₂ − θ₂,₀)² C₃]`.
pub fn asymptotic_loglik_ips_linear(theta: &Theta, theta0: &Theta, n: usize) -> Result<f64> {
    let (a, b) = pair(theta)?;
    let (a0, b0) = pair(theta0)?;
    let (c1, c2, c3) = IpsInvariantCovariance::new(theta0, n)?.moments();
    let (u, v) = (a - a0, b - b0);
    Ok(-0.5 * (u * u * c1 + 2.0 * u * v * c2 + v * v * c3))
}

/// Hessian of [`asymptotic_loglik_ips_linear`] in θ (constant in θ).
pub fn asymptotic_loglik_ips_linear_hessian(theta0: &Theta, n: usize) -> Result<Matrix2<f64>> {
    let (c1, c2, c3) = IpsInvariantCovariance::new(theta0, n)?.moments();
    Ok(-Matrix2::new(c1, c2, c2, c3))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub theta1: f64,
    pub theta2: f64,
    pub ips: f64,
    pub mean_field: f64,
}

/// Evaluates both surfaces on a regular grid. Each axis is
/// `(low, high, points)` with `points ≥ 2`.
pub fn surface_grid(
    theta0: &Theta,
    n: usize,
    axis1: (f64, f64, usize),
    axis2: (f64, f64, usize),
) -> Result<Vec<SurfacePoint>> {
    let linspace = |(lo, hi, m): (f64, f64, usize)| -> Result<Vec<f64>> {
        if m < 2 || !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidConfig(format!("bad grid axis ({lo}, {hi}, {m})")));
        }
        Ok((0..m)
            .map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64)
            .collect())
    };
    let (g1, g2) = (linspace(axis1)?, linspace(axis2)?);
    let mut out = Vec::with_capacity(g1.len() * g2.len());
    for &t1 in &g1 {
        for &t2 in &g2 {
            let th = Theta::new(vec![t1, t2])?;
            out.push(SurfacePoint {
                theta1: t1,
                theta2: t2,
                ips: asymptotic_loglik_ips_linear(&th, theta0, n)?,
                mean_field: asymptotic_contrast_linear(&th, theta0)?,
            });
        }
    }
    Ok(out)
}
