//! Nonlinear (single-photon) coupling `g₀ N (b + b†)` with constant `g₀`.
//!
//! The evolution is `e^{iψN²} D(Nβ)`. For a coherent cavity state `|α⟩` the
//! cavity amplitude after the pulse is
//! `⟨X⟩ + i⟨P⟩ = √2 ⟨a⟩ = √2 α e^{iψ} exp(|α|²(e^{2iψ} − 1)) χ(β)`,
//! so sweeping the pulse length traces `χ` on a ring of radius up to `2g₀/ω_m`.

use std::f64::consts::{PI, SQRT_2};
use std::io::Write;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::integrals::{double_exp_integral, exp_integral};

/// Prefactor magnitude below which `χ` is not recovered.
pub const PREFACTOR_FLOOR: f64 = 1e-12;
/// Default number of pulse lengths per mechanical period.
pub const DEFAULT_RING_POINTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingPoint {
    pub tau: f64,
    pub beta: Complex64,
    pub psi: f64,
}

/// `β = −i g₀ ∫₀^τ e^{iω_m s} ds` and the Kerr phase for constant coupling.
pub fn ring_point(g0: f64, omega_m: f64, tau: f64) -> Result<RingPoint> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidArgument(format!("pulse length must be non-negative, got {tau}")));
    }
    let beta = Complex64::new(0.0, -g0) * exp_integral(omega_m, tau);
    let psi = -(g0 * g0 * double_exp_integral(-omega_m, omega_m, tau)).im;
    Ok(RingPoint { tau, beta, psi })
}

/// `√2 α e^{iψ} exp(|α|²(e^{2iψ} − 1))`.
pub fn prefactor(alpha: Complex64, psi: f64) -> Complex64 {
    let n = alpha.norm_sqr();
    let rot = Complex64::from_polar(1.0, 2.0 * psi) - 1.0;
    SQRT_2 * alpha * Complex64::from_polar(1.0, psi) * (rot * n).exp()
}

/// Cavity `(⟨X⟩, ⟨P⟩)` after the pulse for a mechanical state with `χ(β) = chi`.
pub fn forward_expectations(alpha: Complex64, ring: &RingPoint, chi: Complex64) -> (f64, f64) {
    let z = prefactor(alpha, ring.psi) * chi;
    (z.re, z.im)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Measured,
    ForwardModeled,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiEstimate {
    pub beta: Complex64,
    pub chi: Complex64,
    pub provenance: Provenance,
}

impl ChiEstimate {
    /// `|χ| ≤ 1` holds for every physical state.
    pub fn is_physical(&self, tol: f64) -> bool {
        self.chi.norm() <= 1.0 + tol
    }
}

pub fn reconstruct_chi(x_mean: f64, p_mean: f64, alpha: Complex64, ring: &RingPoint) -> Result<ChiEstimate> {
    let pre = prefactor(alpha, ring.psi);
    if pre.norm() <= PREFACTOR_FLOOR {
        return Err(Error::VanishingPrefactor(pre.norm()));
    }
    Ok(ChiEstimate {
        beta: ring.beta,
        chi: Complex64::new(x_mean, p_mean) / pre,
        provenance: Provenance::Measured,
    })
}

/// Mechanical states with closed-form characteristic functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MechanicalState {
    Vacuum,
    Thermal(f64),
    Coherent(Complex64),
}

/// `χ(β) = tr{D(β)ρ}` with `D(β) = exp(βb† − β*b)`.
pub fn analytic_chi(state: MechanicalState, beta: Complex64) -> Complex64 {
    let b2 = beta.norm_sqr();
    match state {
        MechanicalState::Vacuum => Complex64::new((-0.5 * b2).exp(), 0.0),
        MechanicalState::Thermal(nbar) => Complex64::new((-(nbar + 0.5) * b2).exp(), 0.0),
        MechanicalState::Coherent(gamma) => (-0.5 * b2 + beta * gamma.conj() - beta.conj() * gamma).exp(),
    }
}

/// Pulse lengths `τ_k = 2πk/(n ω_m)`, `k = 0..n`.
pub fn ring_times(omega_m: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| 2.0 * PI * k as f64 / (n as f64 * omega_m)).collect()
}

/// One point of a ring scan: truth, cavity means and the recovered `χ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingSample {
    pub ring: RingPoint,
    pub chi_true: Complex64,
    pub x_mean: f64,
    pub p_mean: f64,
    pub estimate: ChiEstimate,
    /// Standard error of `χ̂` (combined over real and imaginary parts); zero
    /// for exact expectations.
    pub std_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingScan {
    pub g0: f64,
    pub omega_m: f64,
    pub alpha: Complex64,
}

impl RingScan {
    /// Exact expectations on every ring point.
    pub fn exact(&self, state: MechanicalState, n_points: usize) -> Result<Vec<RingSample>> {
        ring_times(self.omega_m, n_points)
            .into_iter()
            .map(|tau| {
                let ring = ring_point(self.g0, self.omega_m, tau)?;
                let chi_true = analytic_chi(state, ring.beta);
                let (x, p) = forward_expectations(self.alpha, &ring, chi_true);
                let mut estimate = reconstruct_chi(x, p, self.alpha, &ring)?;
                estimate.provenance = Provenance::ForwardModeled;
                Ok(RingSample { ring, chi_true, x_mean: x, p_mean: p, estimate, std_error: 0.0 })
            })
            .collect()
    }

    /// Sample means of `shots` homodyne outcomes per quadrature.
    ///
    /// The interaction conserves photon number, so `⟨X²⟩ + ⟨P²⟩ = 2|α|² + 1`
    /// exactly; the remaining variance is split evenly between the quadratures.
    pub fn sampled(&self, state: MechanicalState, n_points: usize, shots: usize, seed: u64) -> Result<Vec<RingSample>> {
        if shots == 0 {
            return Err(Error::EmptySamples);
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let second = 2.0 * self.alpha.norm_sqr() + 1.0;
        ring_times(self.omega_m, n_points)
            .into_iter()
            .map(|tau| {
                let ring = ring_point(self.g0, self.omega_m, tau)?;
                let chi_true = analytic_chi(state, ring.beta);
                let (x, p) = forward_expectations(self.alpha, &ring, chi_true);
                let per_quad = (0.5 * (second - x * x - p * p)).max(0.0);
                let se = (per_quad / shots as f64).sqrt();
                let noise = Normal::new(0.0, se).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                let (xs, ps) = (x + noise.sample(&mut rng), p + noise.sample(&mut rng));
                let estimate = reconstruct_chi(xs, ps, self.alpha, &ring)?;
                let std_error = SQRT_2 * se / prefactor(self.alpha, ring.psi).norm();
                Ok(RingSample { ring, chi_true, x_mean: xs, p_mean: ps, estimate, std_error })
            })
            .collect()
    }
}

/// Writes `tau,beta_re,beta_im,psi,chi_re,chi_im` rows.
pub fn write_ring_csv<W: Write>(mut out: W, samples: &[RingSample]) -> std::io::Result<()> {
    writeln!(out, "tau,beta_re,beta_im,psi,chi_re,chi_im")?;
    for s in samples {
        writeln!(
            out,
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            s.ring.tau, s.ring.beta.re, s.ring.beta.im, s.ring.psi, s.estimate.chi.re, s.estimate.chi.im
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// `√2 α e^{−|α|²} e^{−iψ} Σ_{n≥1} |α|^{2(n−1)}/(n−1)! e^{2inψ}`, summed term by term.
    fn prefactor_series(alpha: Complex64, psi: f64, terms: usize) -> Complex64 {
        let n2 = alpha.norm_sqr();
        let mut sum = Complex64::new(0.0, 0.0);
        let mut w = 1.0;
        for n in 1..=terms {
            sum += w * Complex64::from_polar(1.0, 2.0 * n as f64 * psi);
            w *= n2 / n as f64;
        }
        SQRT_2 * alpha * (-n2).exp() * Complex64::from_polar(1.0, -psi) * sum
    }

    #[test]
    fn ring_geometry() {
        let p = ring_point(0.1, 1.0, 0.0).unwrap();
        assert_eq!((p.beta, p.psi), (Complex64::new(0.0, 0.0), 0.0));
        let closed = ring_point(0.1, 1.0, 2.0 * PI).unwrap();
        assert!(closed.beta.norm() < 1e-15);
        let half = ring_point(0.1, 1.0, PI).unwrap();
        assert!((half.beta.norm() - 0.2).abs() < 1e-14);
        for tau in ring_times(1.0, 64) {
            assert!(ring_point(0.1, 1.0, tau).unwrap().beta.norm() <= 0.2 + 1e-15);
        }
        assert!(ring_point(0.1, 1.0, -1.0).is_err());
    }

    #[test]
    fn kerr_phase_closed_form() {
        // Constant coupling: ψ = (g₀/ω)² (ωτ − sin ωτ).
        let (g0, w) = (0.3f64, 1.7f64);
        for tau in [0.4f64, 1.9, 5.0] {
            let expected = (g0 / w).powi(2) * (w * tau - (w * tau).sin());
            assert!((ring_point(g0, w, tau).unwrap().psi - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn prefactor_special_cases() {
        let ring = RingPoint { tau: 0.0, beta: Complex64::new(0.0, 0.0), psi: 0.0 };
        let (x, p) = forward_expectations(Complex64::new(0.8, 0.0), &ring, Complex64::new(1.0, 0.0));
        assert!((x - SQRT_2 * 0.8).abs() < 1e-15 && p.abs() < 1e-15);
        assert!(matches!(
            reconstruct_chi(0.1, 0.1, Complex64::new(0.0, 0.0), &ring),
            Err(Error::VanishingPrefactor(_))
        ));
    }

    proptest! {
        #[test]
        fn closed_sum_matches_series(re in -3.5f64..3.5, im in -3.5f64..3.5, psi in -PI..PI) {
            let alpha = Complex64::new(re, im);
            prop_assume!(alpha.norm_sqr() <= 25.0);
            let a = prefactor(alpha, psi);
            let b = prefactor_series(alpha, psi, 200);
            prop_assert!((a - b).norm() <= 1e-12 * (1.0 + b.norm()));
        }

        #[test]
        fn forward_reconstruct_round_trip(re in -2.0f64..2.0, im in -2.0f64..2.0, tau in 0.0f64..7.0,
                                          cr in -1.0f64..1.0, ci in -1.0f64..1.0) {
            let alpha = Complex64::new(re, im);
            prop_assume!(alpha.norm() > 0.1);
            let ring = ring_point(0.2, 1.0, tau).unwrap();
            let chi = Complex64::new(cr, ci);
            let (x, p) = forward_expectations(alpha, &ring, chi);
            let est = reconstruct_chi(x, p, alpha, &ring).unwrap();
            prop_assert!((est.chi - chi).norm() <= 1e-10);
            let (x2, p2) = forward_expectations(alpha, &ring, est.chi);
            prop_assert!((x2 - x).abs() <= 1e-10 && (p2 - p).abs() <= 1e-10);
        }
    }

    #[test]
    fn exact_scan_recovers_analytic_chi() {
        let scan = RingScan { g0: 0.3, omega_m: 1.0, alpha: Complex64::new(1.0, 0.0) };
        for state in [
            MechanicalState::Vacuum,
            MechanicalState::Thermal(1.0),
            MechanicalState::Coherent(Complex64::new(0.7, 0.3)),
        ] {
            let samples = scan.exact(state, DEFAULT_RING_POINTS).unwrap();
            assert_eq!(samples.len(), 64);
            for s in &samples {
                assert!((s.estimate.chi - s.chi_true).norm() <= 1e-10);
                assert!(s.estimate.is_physical(1e-12));
            }
            assert!((samples[0].estimate.chi - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn hermitian_symmetry_on_forward_data() {
        let state = MechanicalState::Thermal(0.5);
        let beta = Complex64::new(0.12, -0.05);
        assert!((analytic_chi(state, -beta) - analytic_chi(state, beta).conj()).norm() < 1e-15);
        let gamma = MechanicalState::Coherent(Complex64::new(0.4, 0.1));
        assert!((analytic_chi(gamma, -beta) - analytic_chi(gamma, beta).conj()).norm() < 1e-15);
    }

    #[test]
    fn ring_csv_header() {
        let scan = RingScan { g0: 0.1, omega_m: 1.0, alpha: Complex64::new(1.0, 0.0) };
        let samples = scan.exact(MechanicalState::Vacuum, 4).unwrap();
        let mut buf = Vec::new();
        write_ring_csv(&mut buf, &samples).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("tau,beta_re,beta_im,psi,chi_re,chi_im\n"));
    }
}
