//! Direct Schrödinger integration of the cavity–mechanics interaction in a
//! truncated Fock space. Used to cross-check the closed-form displacement.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::network::NormalModeBasis;
use crate::ode::{dopri5, Tolerances};
use crate::profile::InteractionProfile;

/// Population allowed in the two highest retained levels of any subsystem.
pub const LEAKAGE_TOL: f64 = 1e-4;
/// Allowed drift of the state norm.
pub const NORM_TOL: f64 = 1e-8;

/// Joint state `|ψ⟩ = Σ ψ[c·M + m] |c⟩_cavity |m⟩_mech`, with the mechanical
/// index in mixed radix over `mech_dims`, first mode most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    amps: Vec<Complex64>,
    cavity_dim: usize,
    mech_dims: Vec<usize>,
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Truncated coherent-state amplitudes `e^{−|α|²/2} αⁿ/√n!`.
pub fn coherent_ket(alpha: Complex64, dim: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(dim);
    let mut c = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..dim {
        out.push(c);
        c = c * alpha / ((n + 1) as f64).sqrt();
    }
    out
}

pub fn fock_ket(n: usize, dim: usize) -> Vec<Complex64> {
    let mut out = vec![zero(); dim];
    out[n] = Complex64::new(1.0, 0.0);
    out
}

/// Kronecker product, first factor most significant.
pub fn tensor_kets(kets: &[Vec<Complex64>]) -> Vec<Complex64> {
    kets.iter().fold(vec![Complex64::new(1.0, 0.0)], |acc, k| {
        acc.iter().flat_map(|a| k.iter().map(move |b| a * b)).collect()
    })
}

impl JointState {
    pub fn product(cavity: &[Complex64], mech: &[Vec<Complex64>]) -> Self {
        let mech_dims = mech.iter().map(Vec::len).collect();
        let mut kets = vec![cavity.to_vec()];
        kets.extend(mech.iter().cloned());
        Self {
            amps: tensor_kets(&kets),
            cavity_dim: cavity.len(),
            mech_dims,
        }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    fn mech_size(&self) -> usize {
        self.mech_dims.iter().product()
    }

    fn strides(&self) -> Vec<usize> {
        let mut s = vec![1; self.mech_dims.len()];
        for j in (0..self.mech_dims.len().saturating_sub(1)).rev() {
            s[j] = s[j + 1] * self.mech_dims[j + 1];
        }
        s
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Population of the two highest levels of subsystem `s` (0 = cavity,
    /// `j + 1` = mechanical mode `j`).
    pub fn edge_population(&self, s: usize) -> f64 {
        let m = self.mech_size();
        let strides = self.strides();
        self.amps
            .iter()
            .enumerate()
            .filter(|(idx, _)| {
                let (level, dim) = if s == 0 {
                    (idx / m, self.cavity_dim)
                } else {
                    ((idx % m) / strides[s - 1] % self.mech_dims[s - 1], self.mech_dims[s - 1])
                };
                level + 2 >= dim
            })
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    fn check_leakage(&self) -> Result<()> {
        for s in 0..=self.mech_dims.len() {
            let population = self.edge_population(s);
            if population > LEAKAGE_TOL {
                return Err(Error::TruncationLeakage { subsystem: s, population });
            }
        }
        Ok(())
    }

    /// Applies `f` to the cavity factor: `out[c'] = Σ_c op(c', c) ψ[c]`.
    fn apply_cavity(&self, op: impl Fn(usize, &[Complex64], &mut [Complex64])) -> Vec<Complex64> {
        let m = self.mech_size();
        let d = self.cavity_dim;
        let mut out = vec![zero(); self.amps.len()];
        let mut column = vec![zero(); d];
        let mut result = vec![zero(); d];
        for mi in 0..m {
            for c in 0..d {
                column[c] = self.amps[c * m + mi];
            }
            result.iter_mut().for_each(|r| *r = zero());
            op(d, &column, &mut result);
            for c in 0..d {
                out[c * m + mi] = result[c];
            }
        }
        out
    }

    fn inner(&self, other: &[Complex64]) -> Complex64 {
        self.amps.iter().zip(other).map(|(a, b)| a.conj() * b).sum()
    }

    /// `⟨a⟩` of the cavity.
    pub fn cavity_annihilation(&self) -> Complex64 {
        self.inner(&self.apply_cavity(lower))
    }

    pub fn cavity_x(&self) -> f64 {
        self.inner(&self.apply_cavity(apply_x)).re
    }

    pub fn cavity_p(&self) -> f64 {
        self.inner(&self.apply_cavity(apply_p)).re
    }

    /// `⟨P^k⟩` of the cavity within the truncated space.
    pub fn cavity_p_moment(&self, k: usize) -> f64 {
        let mut v = self.clone();
        for _ in 0..k {
            v.amps = v.apply_cavity(apply_p);
        }
        self.inner(&v.amps).re
    }
}

fn lower(d: usize, x: &[Complex64], out: &mut [Complex64]) {
    for n in 1..d {
        out[n - 1] += x[n] * (n as f64).sqrt();
    }
}

fn raise(d: usize, x: &[Complex64], out: &mut [Complex64]) {
    for n in 0..d - 1 {
        out[n + 1] += x[n] * ((n + 1) as f64).sqrt();
    }
}

fn apply_x(d: usize, x: &[Complex64], out: &mut [Complex64]) {
    let mut tmp = vec![zero(); d];
    lower(d, x, &mut tmp);
    raise(d, x, &mut tmp);
    for (o, t) in out.iter_mut().zip(tmp) {
        *o += t * std::f64::consts::FRAC_1_SQRT_2;
    }
}

fn apply_p(d: usize, x: &[Complex64], out: &mut [Complex64]) {
    // P = i(a† − a)/√2
    let mut up = vec![zero(); d];
    let mut down = vec![zero(); d];
    raise(d, x, &mut up);
    lower(d, x, &mut down);
    let f = Complex64::new(0.0, std::f64::consts::FRAC_1_SQRT_2);
    for n in 0..d {
        out[n] += f * (up[n] - down[n]);
    }
}

/// Cavity operator multiplying the mechanical coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CavityCoupling {
    /// Linearized coupling through `X_c`.
    Quadrature,
    /// Single-photon coupling through `N = a†a`.
    Number,
}

/// Evolves `initial` under `H(t) = g(t) X_c ⊗ Σ_j (G_j e^{−iν_j t} d_j + h.c.)`
/// over `[0, τ]`, in the interaction picture of the normal modes.
pub fn propagate_truncated(
    profile: &InteractionProfile,
    basis: &NormalModeBasis,
    initial: &JointState,
    tol: Tolerances,
) -> Result<JointState> {
    propagate_truncated_with(CavityCoupling::Quadrature, profile, basis, initial, tol)
}

/// As [`propagate_truncated`] with a choice of cavity operator.
pub fn propagate_truncated_with(
    coupling: CavityCoupling,
    profile: &InteractionProfile,
    basis: &NormalModeBasis,
    initial: &JointState,
    tol: Tolerances,
) -> Result<JointState> {
    if initial.mech_dims.len() != basis.n_modes() {
        return Err(Error::DimensionMismatch {
            expected: basis.n_modes(),
            got: initial.mech_dims.len(),
        });
    }
    initial.check_leakage()?;
    let m = initial.mech_size();
    let d = initial.cavity_dim;
    let strides = initial.strides();
    let dims = initial.mech_dims.clone();
    let g_vec = basis.g_vec().to_vec();
    let nu = basis.nu().to_vec();
    let mut mech_out = vec![zero(); d * m];

    let amps = dopri5(initial.amps.clone(), 0.0, profile.tau(), tol, |t, psi, dpsi| {
        let g_t = profile.value(t);
        let phases: Vec<Complex64> = g_vec
            .iter()
            .zip(&nu)
            .map(|(g, v)| g * Complex64::from_polar(1.0, -v * t))
            .collect();
        mech_out.iter_mut().for_each(|x| *x = zero());
        for c in 0..d {
            let base = c * m;
            for mi in 0..m {
                let amp = psi[base + mi];
                if amp == zero() {
                    continue;
                }
                for (j, (&stride, &dim)) in strides.iter().zip(&dims).enumerate() {
                    let level = mi / stride % dim;
                    if level > 0 {
                        mech_out[base + mi - stride] += phases[j] * (level as f64).sqrt() * amp;
                    }
                    if level + 1 < dim {
                        mech_out[base + mi + stride] += phases[j].conj() * ((level + 1) as f64).sqrt() * amp;
                    }
                }
            }
        }
        dpsi.iter_mut().for_each(|x| *x = zero());
        match coupling {
            CavityCoupling::Quadrature => {
                let scale = Complex64::new(0.0, -g_t * std::f64::consts::FRAC_1_SQRT_2);
                for mi in 0..m {
                    for c in 0..d {
                        let w = mech_out[c * m + mi];
                        if c > 0 {
                            dpsi[(c - 1) * m + mi] += scale * (c as f64).sqrt() * w;
                        }
                        if c + 1 < d {
                            dpsi[(c + 1) * m + mi] += scale * ((c + 1) as f64).sqrt() * w;
                        }
                    }
                }
            }
            CavityCoupling::Number => {
                let scale = Complex64::new(0.0, -g_t);
                for (i, (dp, w)) in dpsi.iter_mut().zip(&mech_out).enumerate() {
                    *dp = scale * (i / m) as f64 * w;
                }
            }
        }
    });
    let out = JointState {
        amps,
        cavity_dim: d,
        mech_dims: initial.mech_dims.clone(),
    };
    let drift = (out.norm() - initial.norm()).abs();
    if drift > NORM_TOL {
        return Err(Error::VerificationFailed(format!("norm drift {drift:.3e}")));
    }
    out.check_leakage()?;
    Ok(out)
}

pub const DEFAULT_TOLERANCES: Tolerances = Tolerances { rtol: 1e-10, atol: 1e-12 };

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn coherent_ket_moments() {
        let alpha = Complex64::new(0.8, -0.3);
        let st = JointState::product(&coherent_ket(alpha, 30), &[fock_ket(0, 2)]);
        assert_relative_eq!(st.norm(), 1.0, epsilon = 1e-12);
        assert!((st.cavity_annihilation() - alpha).norm() < 1e-12);
        assert_relative_eq!(st.cavity_x(), std::f64::consts::SQRT_2 * alpha.re, epsilon = 1e-12);
        assert_relative_eq!(st.cavity_p(), std::f64::consts::SQRT_2 * alpha.im, epsilon = 1e-12);
        let p = std::f64::consts::SQRT_2 * alpha.im;
        assert_relative_eq!(st.cavity_p_moment(2), p * p + 0.5, epsilon = 1e-10);
    }

    #[test]
    fn mixed_radix_layout() {
        let st = JointState::product(&fock_ket(1, 3), &[fock_ket(2, 4), fock_ket(1, 5)]);
        let idx = st.amplitudes().iter().position(|a| a.re == 1.0).unwrap();
        assert_eq!(idx, 20 + 2 * 5 + 1);
        assert_relative_eq!(st.edge_population(1), 1.0);
        assert_relative_eq!(st.edge_population(2), 0.0);
    }

    #[test]
    fn zero_profile_is_identity() {
        let basis = NormalModeBasis::single_mode(1.0);
        let profile = InteractionProfile::zero(2.0).unwrap();
        let st = JointState::product(&coherent_ket(Complex64::new(0.5, 0.0), 20), &[coherent_ket(Complex64::new(0.0, 0.4), 20)]);
        let out = propagate_truncated(&profile, &basis, &st, DEFAULT_TOLERANCES).unwrap();
        for (a, b) in out.amplitudes().iter().zip(st.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn leakage_detected() {
        let basis = NormalModeBasis::single_mode(1.0);
        let profile = InteractionProfile::constant(3.0, 2.0).unwrap();
        let st = JointState::product(&fock_ket(0, 6), &[fock_ket(0, 6)]);
        assert!(matches!(
            propagate_truncated(&profile, &basis, &st, DEFAULT_TOLERANCES),
            Err(Error::TruncationLeakage { .. })
        ));
    }
}
