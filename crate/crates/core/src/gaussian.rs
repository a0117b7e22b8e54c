//! Gaussian-state algebra in the quadrature convention `Q = (b + b†)/√2`,
//! `P = i(b† − b)/√2`, ordered `(Q_1..Q_n, P_1..P_n)`, vacuum variance 1/2.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::dynamics::EvolvedObservable;
use crate::error::{Error, Result};
use crate::linalg::{max_abs, symplectic_form};

/// Tolerance on the minimum eigenvalue of `V + iΩ/2`.
pub const PHYSICALITY_TOL: f64 = 1e-9;

/// Highest moment order handled by the exact and empirical moment routines.
pub const MAX_MOMENT_ORDER: usize = 8;

/// Mean vector and covariance matrix of an `n`-mode Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianState {
    /// Builds a state from a mean vector and covariance matrix.
    ///
    /// The covariance is symmetrized; asymmetry beyond rounding noise is
    /// rejected. Physicality is not enforced here, see [`check_physicality`].
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let dim = mean.len();
        if dim == 0 || dim % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "mean vector length {dim} is not a positive even number"
            )));
        }
        if cov.nrows() != dim || cov.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: cov.nrows(),
            });
        }
        let asym = max_abs(&(&cov - cov.transpose()));
        if asym > 1e-9 * (1.0 + max_abs(&cov)) {
            return Err(Error::InvalidArgument(format!(
                "covariance not symmetric (max asymmetry {asym:e})"
            )));
        }
        let cov = (&cov + cov.transpose()) * 0.5;
        Ok(Self { mean, cov })
    }

    pub fn vacuum(n_modes: usize) -> Self {
        Self::thermal(n_modes, 0.0)
    }

    pub fn thermal(n_modes: usize, nbar: f64) -> Self {
        Self {
            mean: DVector::zeros(2 * n_modes),
            cov: DMatrix::identity(2 * n_modes, 2 * n_modes) * (nbar + 0.5),
        }
    }

    /// Coherent state of a single mode with amplitude `gamma` (`⟨b⟩ = γ`).
    pub fn coherent(gamma: Complex64) -> Self {
        let mut s = Self::vacuum(1);
        s.mean[0] = std::f64::consts::SQRT_2 * gamma.re;
        s.mean[1] = std::f64::consts::SQRT_2 * gamma.im;
        s
    }

    pub fn n_modes(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn displaced(&self, shift: &DVector<f64>) -> Self {
        Self {
            mean: &self.mean + shift,
            cov: self.cov.clone(),
        }
    }

    /// Applies the linear map `x ↦ S x` to the quadratures.
    pub fn transformed(&self, s: &DMatrix<f64>) -> Self {
        let cov = s * &self.cov * s.transpose();
        Self {
            mean: s * &self.mean,
            cov: (&cov + cov.transpose()) * 0.5,
        }
    }
}

/// Single-mode squeezed thermal state: `(n̄+½)·R(φ) diag(e^{−2r}, e^{2r}) R(φ)ᵀ`.
pub fn make_squeezed_thermal(nbar: f64, r: f64, phase: f64) -> Result<GaussianState> {
    if !(nbar >= 0.0) {
        return Err(Error::InvalidArgument(format!("nbar = {nbar} must be >= 0")));
    }
    let (s, c) = phase.sin_cos();
    let rot = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
    let sq = DMatrix::from_diagonal(&DVector::from_vec(vec![(-2.0 * r).exp(), (2.0 * r).exp()]));
    let cov = &rot * sq * rot.transpose() * (nbar + 0.5);
    GaussianState::new(DVector::zeros(2), cov)
}

/// Two-mode squeezing of a symmetric thermal state with occupancy `nbar`.
pub fn make_two_mode_squeezed_thermal(nbar: f64, r: f64) -> Result<GaussianState> {
    if !(nbar >= 0.0) {
        return Err(Error::InvalidArgument(format!("nbar = {nbar} must be >= 0")));
    }
    let (ch, sh) = (r.cosh(), r.sinh());
    // (Q1, Q2, P1, P2)
    #[rustfmt::skip]
    let s = DMatrix::from_row_slice(4, 4, &[
        ch, sh, 0.0, 0.0,
        sh, ch, 0.0, 0.0,
        0.0, 0.0, ch, -sh,
        0.0, 0.0, -sh, ch,
    ]);
    Ok(GaussianState::thermal(2, nbar).transformed(&s))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalityReport {
    /// Minimum eigenvalue of `V + iΩ/2`.
    pub min_eigenvalue: f64,
    pub physical: bool,
}

pub fn check_physicality(state: &GaussianState) -> PhysicalityReport {
    let n = state.n_modes();
    let omega = symplectic_form(n);
    let m = DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        Complex64::new(state.cov[(i, j)], 0.5 * omega[(i, j)])
    });
    let min_eigenvalue = nalgebra::SymmetricEigen::new(m).eigenvalues.min();
    PhysicalityReport {
        min_eigenvalue,
        physical: min_eigenvalue >= -PHYSICALITY_TOL,
    }
}

/// Symplectic eigenvalues of a covariance matrix, ascending.
pub fn symplectic_eigenvalues(cov: &DMatrix<f64>) -> Vec<f64> {
    let n = cov.nrows() / 2;
    let omega = symplectic_form(n);
    paired_moduli(&(&omega * cov))
}

/// Moduli of the `±iλ` eigenvalue pairs of a real matrix, one per pair.
fn paired_moduli(m: &DMatrix<f64>) -> Vec<f64> {
    let mut mods: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.norm()).collect();
    mods.sort_by(f64::total_cmp);
    mods.chunks(2).map(|p| p.iter().sum::<f64>() / p.len() as f64).collect()
}

/// Logarithmic negativity of the bipartition `modes | rest`.
pub fn log_negativity(state: &GaussianState, modes: &[usize]) -> f64 {
    let n = state.n_modes();
    let mut flip = DMatrix::<f64>::identity(2 * n, 2 * n);
    for &m in modes {
        flip[(n + m, n + m)] = -1.0;
    }
    let pt = &flip * state.cov() * &flip;
    symplectic_eigenvalues(&pt)
        .iter()
        .map(|&nu| (-(2.0 * nu).ln()).max(0.0))
        .sum()
}

/// A linear quadrature combination whose statistics are Gaussian under a
/// Gaussian mechanical state and a vacuum cavity.
#[derive(Debug, Clone, Copy)]
pub enum Observable<'a> {
    /// Evolved cavity observable acting on the mechanical normal modes.
    Evolved(&'a EvolvedObservable),
    /// `Q_θ = cos θ Q_mode + sin θ P_mode`.
    Quadrature { mode: usize, theta: f64 },
}

impl<'a> From<&'a EvolvedObservable> for Observable<'a> {
    fn from(obs: &'a EvolvedObservable) -> Self {
        Observable::Evolved(obs)
    }
}

/// Mean and variance of an observable under `state ⊗ |0⟩⟨0|_cavity`.
pub fn observable_mean_variance(state: &GaussianState, obs: Observable<'_>) -> Result<(f64, f64)> {
    let n = state.n_modes();
    let mut w = DVector::<f64>::zeros(2 * n);
    let mut cavity_var = 0.0;
    match obs {
        Observable::Evolved(e) => {
            if e.quad_weights.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: e.quad_weights.len(),
                });
            }
            for (j, (&qw, &th)) in e.quad_weights.iter().zip(&e.thetas).enumerate() {
                w[j] = qw * th.cos();
                w[n + j] = qw * th.sin();
            }
            cavity_var = 0.5 * (e.p_weight * e.p_weight + e.x_weight * e.x_weight);
        }
        Observable::Quadrature { mode, theta } => {
            if mode >= n {
                return Err(Error::DimensionMismatch { expected: n, got: mode + 1 });
            }
            w[mode] = theta.cos();
            w[n + mode] = theta.sin();
        }
    }
    let mean = w.dot(state.mean());
    let var = cavity_var + (w.transpose() * state.cov() * &w)[(0, 0)];
    Ok((mean, var))
}

/// Raw moments `⟨L^k⟩`, `k = 1..=order`, of a Gaussian scalar.
pub fn normal_raw_moments(mean: f64, var: f64, order: usize) -> Vec<f64> {
    let mut m = vec![1.0, mean];
    for k in 2..=order {
        m.push(mean * m[k - 1] + (k - 1) as f64 * var * m[k - 2]);
    }
    m.truncate(order + 1);
    m.split_off(1)
}

/// Exact moments of the observable, orders `1..=order`.
pub fn quadrature_moments_exact(
    state: &GaussianState,
    obs: Observable<'_>,
    order: usize,
) -> Result<Vec<f64>> {
    if order > MAX_MOMENT_ORDER {
        return Err(Error::OrderTooHigh(order));
    }
    let (mean, var) = observable_mean_variance(state, obs)?;
    Ok(normal_raw_moments(mean, var, order))
}

/// Uhlmann fidelity `tr√(√ρ σ √ρ)` between two Gaussian states.
pub fn gaussian_fidelity(a: &GaussianState, b: &GaussianState) -> Result<f64> {
    if a.n_modes() != b.n_modes() {
        return Err(Error::DimensionMismatch {
            expected: a.n_modes(),
            got: b.n_modes(),
        });
    }
    for s in [a, b] {
        let rep = check_physicality(s);
        if !rep.physical {
            return Err(Error::Unphysical(rep.min_eigenvalue));
        }
    }
    let n = a.n_modes();
    let omega = symplectic_form(n);
    let vsum = a.cov() + b.cov();
    let vsum_inv = vsum
        .clone()
        .try_inverse()
        .ok_or(Error::Unphysical(0.0))?;
    let v_aux = omega.transpose() * &vsum_inv * (&omega * 0.25 + b.cov() * &omega * a.cov());
    let ftot: f64 = paired_moduli(&(&v_aux * &omega))
        .iter()
        .map(|&l| {
            let f = 2.0 * (l + (l * l - 0.25).max(0.0).sqrt());
            f * f
        })
        .product();
    let du = a.mean() - b.mean();
    let exponent = -0.25 * du.dot(&(&vsum_inv * &du));
    let f = (ftot / vsum.determinant()).powf(0.25) * exponent.exp();
    Ok(f.clamp(0.0, 1.0))
}
