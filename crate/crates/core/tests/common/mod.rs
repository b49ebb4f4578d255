//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the closed forms under test; each oracle gets to
//! the same quantity by a different route (dense linear algebra, ODE
//! integration, finite differences).

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};

/// Solves `AΣ + ΣAᵀ = I` through the Kronecker form
/// `(I ⊗ A + A ⊗ I) vec Σ = vec I`. Cubic in N², so keep N small.
pub fn lyapunov_kronecker(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let big = id.kronecker(a) + a.kronecker(&id);
    let rhs = DMatrix::<f64>::identity(n, n).reshape_generic(nalgebra::Dyn(n * n), nalgebra::Dyn(1));
    let sol = big.lu().solve(&rhs).expect("nonsingular Lyapunov operator");
    sol.reshape_generic(nalgebra::Dyn(n), nalgebra::Dyn(n))
}

/// Same equation for symmetric `A` by diagonalization:
/// `Σ = V [ (VᵀV)_{ij} / (λ_i + λ_j) ] Vᵀ`.
pub fn lyapunov_eigen(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a.clone());
    let v = &eig.eigenvectors;
    let inner = DMatrix::from_fn(n, n, |i, j| 1.0 / (eig.eigenvalues[i] + eig.eigenvalues[j]));
    let rotated = (v.transpose() * v).component_mul(&inner);
    v * rotated * v.transpose()
}

/// Drift matrix of the N-particle linear system written as `dX = −A X dt + dW`.
pub fn linear_ips_matrix(theta1: f64, theta2: f64, n: usize) -> DMatrix<f64> {
    let nf = n as f64;
    DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { theta1 + theta2 } else { 0.0 };
        diag - theta2 / nf
    })
}

/// Fisher information of the linear model obtained by integrating the
/// moment ODEs of the McKean–Vlasov law with classical RK4:
///
/// `m' = −θ₁ m`, `v' = −2(θ₁ + θ₂) v + 1`, `I' = [[m² + v, v], [v, v]]`.
pub fn fisher_by_quadrature(theta1: f64, theta2: f64, t: f64, mu0: f64, var0: f64, steps: usize) -> [[f64; 2]; 2] {
    // state: m, v, I11, I12
    let rhs = |s: [f64; 4]| -> [f64; 4] {
        let (m, v) = (s[0], s[1]);
        [-theta1 * m, -2.0 * (theta1 + theta2) * v + 1.0, m * m + v, v]
    };
    let h = t / steps as f64;
    let mut s = [mu0, var0, 0.0, 0.0];
    let add = |a: [f64; 4], b: [f64; 4], w: f64| -> [f64; 4] { std::array::from_fn(|i| a[i] + w * b[i]) };
    for _ in 0..steps {
        let k1 = rhs(s);
        let k2 = rhs(add(s, k1, h / 2.0));
        let k3 = rhs(add(s, k2, h / 2.0));
        let k4 = rhs(add(s, k3, h));
        s = std::array::from_fn(|i| s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    [[s[2], s[3]], [s[3], s[3]]]
}

/// Central finite-difference gradient.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[j] += h;
            dn[j] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}

/// Relative error `|a − b| / max(|b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn sample_sd(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// One-sided 95% quantile of Student's t for large degrees of freedom
/// (Cornish–Fisher expansion around the normal quantile 1.6449).
pub fn t_quantile_95(df: f64) -> f64 {
    let z: f64 = 1.6448536269514722;
    let g1 = (z.powi(3) + z) / 4.0;
    let g2 = (5.0 * z.powi(5) + 16.0 * z.powi(3) + 3.0 * z) / 96.0;
    z + g1 / df + g2 / (df * df)
}
