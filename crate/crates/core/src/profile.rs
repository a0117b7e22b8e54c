//! Coupling profiles `g(s) = Σ_k c_k e^{−i f_k s}`, the displacement `β` and
//! quadratic phase `Ψ` they imprint, and synthesis of profiles that realize a
//! chosen `β` with `Ψ = 0`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::integrals::{double_exp_integral, exp_integral};
use crate::linalg::condition_number_c;
use crate::network::NormalModeBasis;

/// Relative tolerance when matching conjugate term pairs.
const PAIRING_TOL: f64 = 1e-10;
/// Acceptance threshold on realized `β` and `Ψ` of synthesized profiles.
pub const SYNTHESIS_TOL: f64 = 1e-8;
/// Condition number of `R` above which coefficient solves are refused.
pub const MAX_CONDITION: f64 = 1e12;
/// Angular grid for the single-mode minimum-norm search.
const SINGLE_MODE_GRID: usize = 720;
/// Angular grid for `h = |h| e^{iφ}`.
pub const PHI_GRID: usize = 64;
/// Samples used to rank candidate profiles by their peak.
pub const PEAK_SAMPLES: usize = 512;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileTerm {
    pub amplitude: Complex64,
    pub frequency: f64,
}

impl ProfileTerm {
    pub fn new(amplitude: Complex64, frequency: f64) -> Self {
        Self { amplitude, frequency }
    }
}

/// Real coupling `g(s) = Σ_k c_k e^{−i f_k s}` on `[0, τ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionProfile {
    terms: Vec<ProfileTerm>,
    tau: f64,
}

impl InteractionProfile {
    /// Validates `τ > 0` and that terms come in conjugate pairs `(c, f)`, `(c*, −f)`.
    pub fn new(terms: Vec<ProfileTerm>, tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidArgument(format!("duration must be positive, got {tau}")));
        }
        if terms.iter().any(|t| !t.frequency.is_finite() || !t.amplitude.is_finite()) {
            return Err(Error::InvalidArgument("non-finite profile term".into()));
        }
        let merged = merge_frequencies(&terms);
        for (f, amp) in &merged {
            let scale = PAIRING_TOL * (1.0 + amp.norm());
            let partner = merged
                .iter()
                .find(|(g, _)| (g + f).abs() <= PAIRING_TOL * (1.0 + f.abs()))
                .map(|(_, a)| *a)
                .unwrap_or_default();
            if (partner - amp.conj()).norm() > scale {
                return Err(Error::InvalidArgument(format!(
                    "profile term at frequency {f} has no conjugate partner"
                )));
            }
        }
        Ok(Self { terms, tau })
    }

    pub fn zero(tau: f64) -> Result<Self> {
        Self::new(Vec::new(), tau)
    }

    pub fn constant(g0: f64, tau: f64) -> Result<Self> {
        Self::new(vec![ProfileTerm::new(c(g0, 0.0), 0.0)], tau)
    }

    /// `g(s) = Σ_k a_k cos(f_k s)`.
    pub fn cosines(pairs: &[(f64, f64)], tau: f64) -> Result<Self> {
        let terms = pairs
            .iter()
            .flat_map(|&(a, f)| [ProfileTerm::new(c(0.5 * a, 0.0), f), ProfileTerm::new(c(0.5 * a, 0.0), -f)])
            .collect();
        Self::new(terms, tau)
    }

    pub fn terms(&self) -> &[ProfileTerm] {
        &self.terms
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.frequency).collect()
    }

    pub fn amplitudes(&self) -> DVector<Complex64> {
        DVector::from_iterator(self.terms.len(), self.terms.iter().map(|t| t.amplitude))
    }

    /// The complex sum; its imaginary part is rounding noise.
    pub fn value_complex(&self, s: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|t| t.amplitude * Complex64::from_polar(1.0, -t.frequency * s))
            .sum()
    }

    pub fn value(&self, s: f64) -> f64 {
        self.value_complex(s).re
    }

    /// `n ≥ 2` equally spaced samples `(t, g(t))` covering `[0, τ]`.
    pub fn sample(&self, n: usize) -> Vec<(f64, f64)> {
        let n = n.max(2);
        (0..n)
            .map(|i| {
                let t = self.tau * i as f64 / (n - 1) as f64;
                (t, self.value(t))
            })
            .collect()
    }

    pub fn peak(&self, n: usize) -> f64 {
        self.sample(n).iter().fold(0.0, |m, (_, g)| m.max(g.abs()))
    }

    /// Writes `t,g` rows sampled on `n` points.
    pub fn write_csv<W: Write>(&self, mut out: W, n: usize) -> std::io::Result<()> {
        writeln!(out, "t,g")?;
        for (t, g) in self.sample(n) {
            writeln!(out, "{t:.12e},{g:.12e}")?;
        }
        Ok(())
    }
}

fn merge_frequencies(terms: &[ProfileTerm]) -> Vec<(f64, Complex64)> {
    let mut merged: Vec<(f64, Complex64)> = Vec::new();
    for t in terms {
        match merged
            .iter_mut()
            .find(|(f, _)| (f - t.frequency).abs() <= PAIRING_TOL * (1.0 + f.abs()))
        {
            Some((_, a)) => *a += t.amplitude,
            None => merged.push((t.frequency, t.amplitude)),
        }
    }
    merged
}

/// Displacement `β_j` per normal mode, quadratic phase `Ψ`, and the quadrature
/// angles `θ_j = arg β_j + π/2` they address.
#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementResult {
    pub beta: Vec<Complex64>,
    pub psi: f64,
    pub theta: Vec<f64>,
}

impl DisplacementResult {
    pub fn new(beta: Vec<Complex64>, psi: f64) -> Self {
        let theta = beta.iter().map(|b| b.arg() + FRAC_PI_2).collect();
        Self { beta, psi, theta }
    }
}

/// `β = |β| e^{i(θ − π/2)}`.
pub fn target_beta(theta: f64, magnitude: f64) -> Complex64 {
    Complex64::from_polar(magnitude, theta - FRAC_PI_2)
}

/// Linear map from term amplitudes to `β`: `β_j = −i G_j* Σ_k c_k E(ν_j − f_k, τ)`.
fn beta_map(freqs: &[f64], basis: &NormalModeBasis, tau: f64) -> DMatrix<Complex64> {
    DMatrix::from_fn(basis.n_modes(), freqs.len(), |j, k| {
        c(0.0, -1.0) * basis.g_vec()[j].conj() * exp_integral(basis.nu()[j] - freqs[k], tau)
    })
}

/// Bilinear form with `Ψ = −Im(cᵀ Φ c)`, where
/// `Φ_kl = Σ_j |G_j|² ∫₀^τ e^{−i(f_l + ν_j)t} ∫₀^t e^{i(ν_j − f_k)s} ds dt`.
fn psi_form(freqs: &[f64], basis: &NormalModeBasis, tau: f64) -> DMatrix<Complex64> {
    let k = freqs.len();
    let mut phi = DMatrix::zeros(k, k);
    for (g, &nu) in basis.g_vec().iter().zip(basis.nu()) {
        let w = g.norm_sqr();
        if w == 0.0 {
            continue;
        }
        for a in 0..k {
            for b in 0..k {
                phi[(a, b)] += w * double_exp_integral(-(freqs[b] + nu), nu - freqs[a], tau);
            }
        }
    }
    phi
}

fn check_modes(profile_modes: usize, basis: &NormalModeBasis) -> Result<()> {
    if profile_modes != basis.n_modes() {
        return Err(Error::DimensionMismatch {
            expected: basis.n_modes(),
            got: profile_modes,
        });
    }
    Ok(())
}

/// `β_j = −i G_j* ∫₀^τ g(s) e^{iν_j s} ds`.
pub fn beta_of_profile(profile: &InteractionProfile, basis: &NormalModeBasis) -> Vec<Complex64> {
    let b = beta_map(&profile.frequencies(), basis, profile.tau());
    (b * profile.amplitudes()).iter().copied().collect()
}

/// `Ψ = −Σ_j ∫₀^τ Im(β_j β̇_j*) ds`.
pub fn psi_of_profile(profile: &InteractionProfile, basis: &NormalModeBasis) -> f64 {
    let phi = psi_form(&profile.frequencies(), basis, profile.tau());
    let amps = profile.amplitudes();
    -(amps.transpose() * phi * &amps)[(0, 0)].im
}

pub fn displacement_of_profile(profile: &InteractionProfile, basis: &NormalModeBasis) -> DisplacementResult {
    DisplacementResult::new(beta_of_profile(profile, basis), psi_of_profile(profile, basis))
}

fn verify(
    profile: &InteractionProfile,
    basis: &NormalModeBasis,
    target: &[Complex64],
) -> Result<DisplacementResult> {
    check_modes(target.len(), basis)?;
    let disp = displacement_of_profile(profile, basis);
    let beta_err = disp
        .beta
        .iter()
        .zip(target)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    if beta_err > SYNTHESIS_TOL {
        return Err(Error::VerificationFailed(format!("realized β deviates by {beta_err:.3e}")));
    }
    if disp.psi.abs() > SYNTHESIS_TOL {
        return Err(Error::VerificationFailed(format!("residual Ψ = {:.3e}", disp.psi)));
    }
    // Report the requested angles rather than ones re-derived from rounding-level β.
    Ok(DisplacementResult::new(target.to_vec(), disp.psi))
}

/// Single-mode synthesis output, including the ansatz coefficients `A`, `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleModeProfile {
    pub profile: InteractionProfile,
    pub displacement: DisplacementResult,
    pub a: Complex64,
    pub b: Complex64,
}

/// Terms of `g(t) = (ω/2π)(A e^{−iωt} + A* e^{iωt} + B e^{−2iωt} + B* e^{2iωt})`.
pub fn single_mode_terms(a: Complex64, b: Complex64, omega_m: f64) -> Vec<ProfileTerm> {
    let k = omega_m / (2.0 * PI);
    vec![
        ProfileTerm::new(a * k, omega_m),
        ProfileTerm::new(a.conj() * k, -omega_m),
        ProfileTerm::new(b * k, 2.0 * omega_m),
        ProfileTerm::new(b.conj() * k, -2.0 * omega_m),
    ]
}

/// Smallest non-negative root of `a ρ² + 2b ρ + c = 0`.
fn smallest_root(a: f64, b: f64, c0: f64) -> Option<f64> {
    let scale = a.abs().max(b.abs()).max(c0.abs());
    if scale == 0.0 {
        return Some(0.0);
    }
    if c0.abs() <= 1e-15 * scale {
        return Some(0.0);
    }
    if a.abs() <= 1e-14 * scale {
        let r = -c0 / (2.0 * b);
        return (b != 0.0 && r >= 0.0).then_some(r);
    }
    let disc = b * b - a * c0;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    // Stable pair of roots.
    let q = -(b + b.signum() * sq);
    let roots = [q / a, if q != 0.0 { c0 / q } else { f64::NAN }];
    roots.iter().copied().filter(|r| r.is_finite() && *r >= 0.0).min_by(f64::total_cmp)
}

/// Chooses `(A, B)` with the prescribed `β` and `ψ = 0`, minimizing `|A|² + |B|²`.
pub fn synthesize_single_mode(theta: f64, beta_mag: f64, omega_m: f64, tau: f64) -> Result<SingleModeProfile> {
    if !(beta_mag > 0.0) || !(omega_m > 0.0) || !(tau > 0.0) {
        return Err(Error::InvalidArgument("β magnitude, frequency and duration must be positive".into()));
    }
    let basis = NormalModeBasis::single_mode(omega_m);
    let target = target_beta(theta, beta_mag);
    let freqs = [omega_m, -omega_m, 2.0 * omega_m, -2.0 * omega_m];
    let k = omega_m / (2.0 * PI);
    // Columns: unit steps in Re A, Im A, Re B, Im B.
    let coeffs = DMatrix::from_row_slice(
        4,
        4,
        &[
            c(k, 0.0), c(0.0, k), c(0.0, 0.0), c(0.0, 0.0),
            c(k, 0.0), c(0.0, -k), c(0.0, 0.0), c(0.0, 0.0),
            c(0.0, 0.0), c(0.0, 0.0), c(k, 0.0), c(0.0, k),
            c(0.0, 0.0), c(0.0, 0.0), c(k, 0.0), c(0.0, -k),
        ],
    );
    let bmap = beta_map(&freqs, &basis, tau) * &coeffs;
    let lin = DMatrix::from_fn(2, 4, |r, col| if r == 0 { bmap[(0, col)].re } else { bmap[(0, col)].im });
    let z = coeffs.transpose() * psi_form(&freqs, &basis, tau) * &coeffs;
    let h = DMatrix::from_fn(4, 4, |r, col| -0.5 * (z[(r, col)] + z[(col, r)]).im);

    // Row space / null space of the linear constraint.
    let gram = SymmetricEigen::new(lin.transpose() * &lin);
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&i, &j| gram.eigenvalues[j].total_cmp(&gram.eigenvalues[i]));
    let top = gram.eigenvalues[order[1]];
    if !(top > 1e-20 * gram.eigenvalues[order[0]].max(1e-300)) {
        return Err(Error::SynthesisInfeasible { tau });
    }
    let null = DMatrix::from_fn(4, 2, |r, col| gram.eigenvectors[(r, order[2 + col])]);
    let rhs = DVector::from_vec(vec![target.re, target.im]);
    let llt = &lin * lin.transpose();
    let x0 = lin.transpose()
        * llt
            .try_inverse()
            .ok_or(Error::SynthesisInfeasible { tau })?
        * rhs;

    let h2 = null.transpose() * &h * &null;
    let b2 = null.transpose() * &h * &x0;
    let c0 = (x0.transpose() * &h * &x0)[(0, 0)];
    let rho_at = |phi: f64| {
        let u = DVector::from_vec(vec![phi.cos(), phi.sin()]);
        smallest_root((u.transpose() * &h2 * &u)[(0, 0)], b2.dot(&u), c0)
    };

    let step = 2.0 * PI / SINGLE_MODE_GRID as f64;
    let (best_i, _) = (0..SINGLE_MODE_GRID)
        .filter_map(|i| rho_at(i as f64 * step).map(|r| (i, r)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(Error::SynthesisInfeasible { tau })?;
    let eval = |phi: f64| rho_at(phi).unwrap_or(f64::INFINITY);
    let phi = golden_min(eval, (best_i as f64 - 1.0) * step, (best_i as f64 + 1.0) * step);
    let (phi, rho) = match rho_at(phi) {
        Some(r) if r <= eval(best_i as f64 * step) => (phi, r),
        _ => (best_i as f64 * step, eval(best_i as f64 * step)),
    };
    let x = &x0 + &null * DVector::from_vec(vec![rho * phi.cos(), rho * phi.sin()]);
    let (a, b) = (c(x[0], x[1]), c(x[2], x[3]));
    let profile = InteractionProfile::new(single_mode_terms(a, b, omega_m), tau)?;
    let displacement = verify(&profile, &basis, &[target])?;
    Ok(SingleModeProfile { profile, displacement, a, b })
}

/// Golden-section minimization on `[lo, hi]`.
fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = 0.5 * (5.0f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Linear relation `(β; β*) = R (𝒢; 𝒢*) + S (h; h*)` for the multimode ansatz
/// `g(s) = (i/τ)[Σ_k (𝒢_k/G_k*) e^{−iν_k s} − (𝒢_k*/G_k) e^{iν_k s} + h e^{−iωs} − h* e^{iωs}]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RsMatrices {
    pub r: DMatrix<Complex64>,
    pub s: DMatrix<Complex64>,
    pub tau: f64,
    pub omega_free: f64,
    /// Ratio of extreme singular values of `r`.
    pub condition: f64,
}

/// `ν_min/√2`: off every normal-mode frequency for generic spectra.
pub fn default_omega_free(basis: &NormalModeBasis) -> f64 {
    basis.nu_min() * std::f64::consts::FRAC_1_SQRT_2
}

/// Entries
/// `N_nm = G_n* E(ν_n − ν_m)/(τ G_m*)`, `M_nm = −G_n* E(ν_n + ν_m)/(τ G_m)`,
/// `P_n = G_n* E(ν_n − ω)/τ`, `Q_n = −G_n* E(ν_n + ω)/τ`, with
/// `R = [[N, M], [M*, N*]]` and `S = [[P, Q], [Q*, P*]]`.
pub fn build_rs_matrices(basis: &NormalModeBasis, tau: f64, omega_free: f64) -> Result<RsMatrices> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("duration must be positive, got {tau}")));
    }
    let n = basis.n_modes();
    let g = basis.g_vec();
    let nu = basis.nu();
    if let Some(j) = g.iter().position(|x| x.norm() <= crate::network::DEFAULT_TOL_G) {
        return Err(Error::InvalidArgument(format!("normal mode {j} is invisible to the probe")));
    }
    let tol = 1e-6 * basis.nu_min();
    if nu.iter().any(|v| (v - omega_free.abs()).abs() <= tol) || omega_free.abs() <= tol {
        return Err(Error::FrequencyCollision { omega: omega_free });
    }
    let mut r = DMatrix::zeros(2 * n, 2 * n);
    let mut s = DMatrix::zeros(2 * n, 2);
    for a in 0..n {
        for b in 0..n {
            let nn = if a == b {
                c(1.0, 0.0)
            } else {
                g[a].conj() / g[b].conj() * exp_integral(nu[a] - nu[b], tau) / tau
            };
            let mm = -g[a].conj() / g[b] * exp_integral(nu[a] + nu[b], tau) / tau;
            r[(a, b)] = nn;
            r[(a, n + b)] = mm;
            r[(n + a, b)] = mm.conj();
            r[(n + a, n + b)] = nn.conj();
        }
        let p = g[a].conj() * exp_integral(nu[a] - omega_free, tau) / tau;
        let q = -g[a].conj() * exp_integral(nu[a] + omega_free, tau) / tau;
        s[(a, 0)] = p;
        s[(a, 1)] = q;
        s[(n + a, 0)] = q.conj();
        s[(n + a, 1)] = p.conj();
    }
    let condition = condition_number_c(&r);
    Ok(RsMatrices { r, s, tau, omega_free, condition })
}

impl RsMatrices {
    pub fn n_modes(&self) -> usize {
        self.r.nrows() / 2
    }

    fn r_inverse(&self) -> Result<DMatrix<Complex64>> {
        if !(self.condition <= MAX_CONDITION) {
            return Err(Error::IllConditioned { condition: self.condition });
        }
        self.r
            .clone()
            .try_inverse()
            .ok_or(Error::IllConditioned { condition: self.condition })
    }

    /// Frequencies of the doubled coefficient vector `(𝒢, 𝒢*, h, h*)`.
    fn frequencies(&self, basis: &NormalModeBasis) -> Vec<f64> {
        let nu = basis.nu();
        nu.iter()
            .copied()
            .chain(nu.iter().map(|v| -v))
            .chain([self.omega_free, -self.omega_free])
            .collect()
    }

    /// Term amplitudes per entry of `(𝒢, 𝒢*, h, h*)`.
    fn weights(&self, basis: &NormalModeBasis) -> Vec<Complex64> {
        let t = self.tau;
        let g = basis.g_vec();
        g.iter()
            .map(|gk| c(0.0, 1.0) / (t * gk.conj()))
            .chain(g.iter().map(|gk| c(0.0, -1.0) / (t * gk)))
            .chain([c(0.0, 1.0 / t), c(0.0, -1.0 / t)])
            .collect()
    }
}

fn cmax<R: nalgebra::Dim, C: nalgebra::Dim, S: nalgebra::RawStorage<Complex64, R, C>>(
    m: &nalgebra::Matrix<Complex64, R, C, S>,
) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

fn doubled(v: &[Complex64]) -> DVector<Complex64> {
    DVector::from_iterator(2 * v.len(), v.iter().copied().chain(v.iter().map(|z| z.conj())))
}

/// `𝒢` from `(𝒢; 𝒢*) = R⁻¹[(β; β*) − S(h; h*)]`.
pub fn solve_coefficients(target: &[Complex64], h: Complex64, rs: &RsMatrices) -> Result<Vec<Complex64>> {
    let n = rs.n_modes();
    if target.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: target.len() });
    }
    let rinv = rs.r_inverse()?;
    let rhs = doubled(target) - &rs.s * doubled(&[h]);
    let sol = &rinv * &rhs;
    let residual = cmax(&(&rs.r * &sol - &rhs));
    if residual > 1e-10 * (1.0 + cmax(&rhs)) {
        return Err(Error::IllConditioned { condition: rs.condition });
    }
    // Symmetrize the two halves, which agree up to rounding.
    Ok((0..n).map(|k| 0.5 * (sol[k] + sol[n + k].conj())).collect())
}

/// The multimode profile for coefficients `𝒢` and free amplitude `h`.
pub fn multimode_profile(
    coeffs: &[Complex64],
    h: Complex64,
    basis: &NormalModeBasis,
    tau: f64,
    omega_free: f64,
) -> Result<InteractionProfile> {
    check_modes(coeffs.len(), basis)?;
    let mut terms = Vec::with_capacity(2 * coeffs.len() + 2);
    let i_t = c(0.0, 1.0 / tau);
    for ((gk, big_g), nu) in coeffs.iter().zip(basis.g_vec()).zip(basis.nu()) {
        terms.push(ProfileTerm::new(i_t * gk / big_g.conj(), *nu));
        terms.push(ProfileTerm::new(-i_t * gk.conj() / big_g, -nu));
    }
    if h != Complex64::default() {
        terms.push(ProfileTerm::new(i_t * h, omega_free));
        terms.push(ProfileTerm::new(-i_t * h.conj(), -omega_free));
    }
    InteractionProfile::new(terms, tau)
}

/// `Ψ` as a quadratic form in `v = (𝒢, 𝒢*, h, h*)`: `Ψ = −Im(vᵀ F v)`.
///
/// Blocks of `F` pair coefficient families: `gg` (`𝒢`/`𝒢*` with each other),
/// `gh` and `hg` (cross terms with `h`, `h*`) and `hh`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticPhaseForm {
    pub full: DMatrix<Complex64>,
    n: usize,
}

impl QuadraticPhaseForm {
    pub fn new(rs: &RsMatrices, basis: &NormalModeBasis) -> Self {
        let freqs = rs.frequencies(basis);
        let w = DMatrix::from_diagonal(&DVector::from_vec(rs.weights(basis)));
        let full = &w * psi_form(&freqs, basis, rs.tau) * &w;
        Self { full, n: basis.n_modes() }
    }

    pub fn gg(&self) -> DMatrix<Complex64> {
        self.full.view((0, 0), (2 * self.n, 2 * self.n)).into_owned()
    }

    pub fn gh(&self) -> DMatrix<Complex64> {
        self.full.view((0, 2 * self.n), (2 * self.n, 2)).into_owned()
    }

    pub fn hg(&self) -> DMatrix<Complex64> {
        self.full.view((2 * self.n, 0), (2, 2 * self.n)).into_owned()
    }

    pub fn hh(&self) -> DMatrix<Complex64> {
        self.full.view((2 * self.n, 2 * self.n), (2, 2)).into_owned()
    }

    pub fn psi(&self, v: &DVector<Complex64>) -> f64 {
        -(v.transpose() * &self.full * v)[(0, 0)].im
    }
}

/// `Ψ(ρ e^{iφ}) = a(φ)ρ² + b(φ)ρ + c` once `𝒢` is eliminated.
struct PsiOfH {
    q2: DMatrix<Complex64>,
    q1: [Complex64; 2],
    q0: Complex64,
}

impl PsiOfH {
    fn new(target: &[Complex64], rs: &RsMatrices, basis: &NormalModeBasis) -> Result<Self> {
        let n = rs.n_modes();
        let rinv = rs.r_inverse()?;
        let form = QuadraticPhaseForm::new(rs, basis);
        let mut v0 = DVector::zeros(2 * n + 2);
        v0.rows_mut(0, 2 * n).copy_from(&(&rinv * doubled(target)));
        let mut v1 = DMatrix::zeros(2 * n + 2, 2);
        v1.view_mut((0, 0), (2 * n, 2)).copy_from(&(-(&rinv * &rs.s)));
        v1[(2 * n, 0)] = c(1.0, 0.0);
        v1[(2 * n + 1, 1)] = c(1.0, 0.0);
        let f = &form.full;
        let lin = v0.transpose() * f * &v1 + (v1.transpose() * f * &v0).transpose();
        Ok(Self {
            q2: v1.transpose() * f * &v1,
            q1: [lin[0], lin[1]],
            q0: (v0.transpose() * f * &v0)[(0, 0)],
        })
    }

    fn coefficients(&self, phi: f64) -> (f64, f64, f64) {
        let u = DVector::from_vec(vec![Complex64::from_polar(1.0, phi), Complex64::from_polar(1.0, -phi)]);
        let a = -(u.transpose() * &self.q2 * &u)[(0, 0)].im;
        let b = -(self.q1[0] * u[0] + self.q1[1] * u[1]).im;
        (a, b, -self.q0.im)
    }
}

/// Chooses `h` so that the composed profile has `Ψ = 0`.
///
/// For each `φ` on a uniform grid the constraint is a real quadratic in `|h|`;
/// sign changes of its discriminant between grid points are located by
/// bisection. Among all non-negative roots the one whose profile has the
/// smallest peak `|g|` wins.
pub fn solve_h_for_zero_psi(target: &[Complex64], rs: &RsMatrices, basis: &NormalModeBasis) -> Result<Complex64> {
    check_modes(target.len(), basis)?;
    let form = PsiOfH::new(target, rs, basis)?;
    let (_, _, c0) = form.coefficients(0.0);
    let q_scale = cmax(&form.q2)
        .max(form.q1[0].norm())
        .max(form.q1[1].norm())
        .max(c0.abs())
        .max(1e-300);
    if c0.abs() <= 1e-14 * q_scale {
        return Ok(Complex64::default());
    }

    let disc = |phi: f64| {
        let (a, b, c0) = form.coefficients(phi);
        b * b - 4.0 * a * c0
    };
    let roots_at = |phi: f64| -> Vec<f64> {
        let (a, b, c0) = form.coefficients(phi);
        let mut out = Vec::new();
        if a.abs() <= 1e-14 * q_scale {
            if b != 0.0 {
                out.push(-c0 / b);
            }
        } else {
            let d = b * b - 4.0 * a * c0;
            if d >= 0.0 {
                let q = -0.5 * (b + b.signum() * d.sqrt());
                out.push(q / a);
                if q != 0.0 {
                    out.push(c0 / q);
                }
            }
        }
        out.into_iter().filter(|r| r.is_finite() && *r >= 0.0).collect()
    };

    let step = 2.0 * PI / PHI_GRID as f64;
    let mut candidates: Vec<Complex64> = Vec::new();
    for i in 0..PHI_GRID {
        let phi = i as f64 * step;
        candidates.extend(roots_at(phi).into_iter().map(|r| Complex64::from_polar(r, phi)));
        let (d0, d1) = (disc(phi), disc(phi + step));
        if (d0 >= 0.0) != (d1 >= 0.0) {
            let (mut lo, mut hi) = (phi, phi + step);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if (disc(mid) >= 0.0) == (d0 >= 0.0) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let edge = if d0 >= 0.0 { lo } else { hi };
            candidates.extend(roots_at(edge).into_iter().map(|r| Complex64::from_polar(r, edge)));
        }
    }
    if candidates.is_empty() {
        return Err(Error::NoZeroPsiRoot);
    }

    let mut best: Option<(f64, Complex64)> = None;
    for h in candidates {
        let Ok(coeffs) = solve_coefficients(target, h, rs) else { continue };
        let Ok(profile) = multimode_profile(&coeffs, h, basis, rs.tau, rs.omega_free) else { continue };
        let peak = profile.peak(PEAK_SAMPLES);
        if best.map_or(true, |(p, _)| peak < p) {
            best = Some((peak, h));
        }
    }
    let (_, h) = best.ok_or(Error::NoZeroPsiRoot)?;
    Ok(polish_root(&form, h))
}

/// Newton steps on `|h|` along the fixed direction of `h`.
fn polish_root(form: &PsiOfH, h: Complex64) -> Complex64 {
    let phi = h.arg();
    let (a, b, c0) = form.coefficients(phi);
    let mut rho = h.norm();
    for _ in 0..4 {
        let f = a * rho * rho + b * rho + c0;
        let df = 2.0 * a * rho + b;
        if df == 0.0 {
            break;
        }
        let next = rho - f / df;
        if !next.is_finite() || next < 0.0 {
            break;
        }
        rho = next;
    }
    Complex64::from_polar(rho, phi)
}

/// Multimode synthesis output.
#[derive(Debug, Clone, PartialEq)]
pub struct MultimodeProfile {
    pub profile: InteractionProfile,
    pub displacement: DisplacementResult,
    pub coeffs: Vec<Complex64>,
    pub h: Complex64,
    pub rs: RsMatrices,
}

/// Profile addressing quadrature `θ_j` of every normal mode with `|β_j|` given.
pub fn synthesize_multimode(
    thetas: &[f64],
    beta_mags: &[f64],
    basis: &NormalModeBasis,
    tau: f64,
    omega_free: f64,
) -> Result<MultimodeProfile> {
    check_modes(thetas.len(), basis)?;
    check_modes(beta_mags.len(), basis)?;
    if beta_mags.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::InvalidArgument("β magnitudes must be positive".into()));
    }
    let target: Vec<Complex64> = thetas.iter().zip(beta_mags).map(|(t, m)| target_beta(*t, *m)).collect();
    let rs = build_rs_matrices(basis, tau, omega_free)?;
    let h = solve_h_for_zero_psi(&target, &rs, basis)?;
    let coeffs = solve_coefficients(&target, h, &rs)?;
    let profile = multimode_profile(&coeffs, h, basis, tau, omega_free)?;
    let displacement = verify(&profile, basis, &target)?;
    Ok(MultimodeProfile { profile, displacement, coeffs, h, rs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{williamson_diagonalize, NetworkSpec};
    use crate::testutil::{rk4, GaussLegendre};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn pair_basis() -> NormalModeBasis {
        williamson_diagonalize(&NetworkSpec::symmetric_pair(2.0, 0.7, 0.7).unwrap()).unwrap()
    }

    /// `β` by direct quadrature of `−iG*∫ g e^{iνs}`.
    fn beta_quadrature(profile: &InteractionProfile, basis: &NormalModeBasis) -> Vec<Complex64> {
        let gl = GaussLegendre::new(20);
        (0..basis.n_modes())
            .map(|j| {
                let nu = basis.nu()[j];
                let int = gl.integrate_panels(0.0, profile.tau(), 64, |s| {
                    profile.value(s) * Complex64::from_polar(1.0, nu * s)
                });
                c(0.0, -1.0) * basis.g_vec()[j].conj() * int
            })
            .collect()
    }

    /// `Ψ` by time-stepping `β_j(t)` together with `−Im(β_j β̇_j*)`.
    fn psi_time_stepped(profile: &InteractionProfile, basis: &NormalModeBasis) -> f64 {
        let n = basis.n_modes();
        let g = basis.g_vec().to_vec();
        let nu = basis.nu().to_vec();
        let y = rk4(vec![Complex64::default(); n + 1], 0.0, profile.tau(), 20_000, |t, y| {
            let gt = profile.value(t);
            let mut dy = vec![Complex64::default(); n + 1];
            for j in 0..n {
                let bdot = c(0.0, -1.0) * g[j].conj() * gt * Complex64::from_polar(1.0, nu[j] * t);
                dy[j] = bdot;
                dy[n] -= c((y[j] * bdot.conj()).im, 0.0);
            }
            dy
        });
        y[n].re
    }

    fn random_profile(rng: &mut impl Rng, tau: f64) -> InteractionProfile {
        let pairs: Vec<ProfileTerm> = (0..3)
            .flat_map(|_| {
                let a = c(rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4));
                let f = rng.random_range(-4.0..4.0);
                [ProfileTerm::new(a, f), ProfileTerm::new(a.conj(), -f)]
            })
            .collect();
        InteractionProfile::new(pairs, tau).unwrap()
    }

    #[test]
    fn profile_validation() {
        assert!(InteractionProfile::zero(0.0).is_err());
        assert!(InteractionProfile::new(vec![ProfileTerm::new(c(1.0, 0.0), 1.0)], 1.0).is_err());
        assert!(InteractionProfile::new(vec![ProfileTerm::new(c(0.0, 1.0), 0.0)], 1.0).is_err());
        let ok = InteractionProfile::new(
            vec![ProfileTerm::new(c(1.0, 2.0), 1.0), ProfileTerm::new(c(1.0, -2.0), -1.0)],
            1.0,
        )
        .unwrap();
        assert_relative_eq!(ok.value(0.3), 2.0 * (0.3f64.cos() + 2.0 * 0.3f64.sin()), epsilon = 1e-14);
    }

    #[test]
    fn csv_export() {
        let p = InteractionProfile::cosines(&[(1.0, 2.0)], 1.0).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf, 3).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "t,g");
        assert!(lines[1].starts_with("0.0"));
    }

    #[test]
    fn trivial_displacements() {
        let single = NormalModeBasis::single_mode(1.3);
        let zero = InteractionProfile::zero(2.0).unwrap();
        assert_eq!(beta_of_profile(&zero, &single)[0], Complex64::default());
        assert_eq!(psi_of_profile(&zero, &single), 0.0);
        let constant = InteractionProfile::constant(0.7, 2.0 * PI / 1.3).unwrap();
        assert!(beta_of_profile(&constant, &single)[0].norm() < 1e-14);
    }

    #[test]
    fn beta_matches_quadrature() {
        let basis = NormalModeBasis::single_mode(1.0);
        let terms = single_mode_terms(c(0.3, -0.7), c(-1.1, 0.4), 1.0);
        let p = InteractionProfile::new(terms, 4.1).unwrap();
        let (a, b) = (beta_of_profile(&p, &basis), beta_quadrature(&p, &basis));
        assert!((a[0] - b[0]).norm() < 1e-10);

        let multi = pair_basis();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let tau = rng.random_range(0.5..6.0);
            let p = random_profile(&mut rng, tau);
            for (x, y) in beta_of_profile(&p, &multi).iter().zip(beta_quadrature(&p, &multi)) {
                assert!((x - y).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn psi_matches_time_stepping() {
        let single = NormalModeBasis::single_mode(1.0);
        let off = InteractionProfile::cosines(&[(0.1, 3.7)], 5.0).unwrap();
        assert!((psi_of_profile(&off, &single) - psi_time_stepped(&off, &single)).abs() < 1e-8);

        let multi = pair_basis();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..8 {
            let tau = rng.random_range(0.5..5.0);
            let p = random_profile(&mut rng, tau);
            let (a, b) = (psi_of_profile(&p, &multi), psi_time_stepped(&p, &multi));
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn displacement_theta_convention() {
        let d = DisplacementResult::new(vec![target_beta(0.4, 2.0)], 0.0);
        assert!((d.theta[0] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn single_mode_full_period() {
        let omega = 1.0;
        let tau = 2.0 * PI / omega;
        let mut peaks = Vec::new();
        let mut profiles = Vec::new();
        for theta in [0.0, PI / 4.0, -PI / 4.0, PI / 2.0] {
            let out = synthesize_single_mode(theta, 5.0, omega, tau).unwrap();
            // At τ = 2π/ω only the A term displaces: β = −iA.
            assert!((out.a - c(0.0, 1.0) * target_beta(theta, 5.0)).norm() < 1e-9);
            assert!(psi_of_profile(&out.profile, &NormalModeBasis::single_mode(omega)).abs() <= 1e-8);
            assert!(out.profile.sample(1000).iter().all(|(t, _)| out.profile.value_complex(*t).im.abs() <= 1e-12));
            peaks.push(out.profile.peak(1000));
            profiles.push(out.profile);
        }
        let d = (0..1000)
            .map(|i| {
                let t = tau * i as f64 / 999.0;
                (profiles[0].value(t) - profiles[3].value(t)).powi(2)
            })
            .sum::<f64>();
        assert!(d > 1.0);
    }

    #[test]
    fn single_mode_minimum_norm() {
        // No other point on the constraint set has a smaller |A|² + |B|².
        let (omega, tau) = (1.0, 3.3);
        let out = synthesize_single_mode(0.7, 2.0, omega, tau).unwrap();
        let norm = out.a.norm_sqr() + out.b.norm_sqr();
        let basis = NormalModeBasis::single_mode(omega);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..2000 {
            let a = out.a + c(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
            let b = out.b + c(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
            let p = InteractionProfile::new(single_mode_terms(a, b, omega), tau).unwrap();
            let d = displacement_of_profile(&p, &basis);
            if (d.beta[0] - out.displacement.beta[0]).norm() < 1e-3 && d.psi.abs() < 1e-3 {
                assert!(a.norm_sqr() + b.norm_sqr() >= norm - 1e-2);
            }
        }
    }

    #[test]
    fn single_mode_longer_time_lowers_peak() {
        let omega = 1.0;
        let short = synthesize_single_mode(0.0, 5.0, omega, 2.0 * PI).unwrap();
        let long = synthesize_single_mode(0.0, 5.0, omega, 4.0 * PI).unwrap();
        let ratio = long.profile.peak(2000) / short.profile.peak(2000);
        assert!((ratio - 0.5).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn rs_matrices_structure() {
        let basis = pair_basis();
        let tau = 5.0 / basis.nu_min();
        let rs = build_rs_matrices(&basis, tau, default_omega_free(&basis)).unwrap();
        for k in 0..2 {
            assert_eq!(rs.r[(k, k)], c(1.0, 0.0));
        }
        assert!(rs.condition.is_finite() && rs.condition < 1e3);
        assert!(matches!(
            build_rs_matrices(&basis, tau, basis.nu()[1]),
            Err(Error::FrequencyCollision { .. })
        ));
    }

    #[test]
    fn rs_matrices_reproduce_beta() {
        let basis = pair_basis();
        let tau = 7.0;
        let rs = build_rs_matrices(&basis, tau, 0.9).unwrap();
        let coeffs = vec![c(0.3, -1.2), c(-0.8, 0.5)];
        let h = c(0.4, 0.9);
        let p = multimode_profile(&coeffs, h, &basis, tau, 0.9).unwrap();
        let predicted = &rs.r * doubled(&coeffs) + &rs.s * doubled(&[h]);
        let beta = beta_of_profile(&p, &basis);
        for j in 0..2 {
            assert!((predicted[j] - beta[j]).norm() < 1e-12);
            assert!((predicted[2 + j] - beta[j].conj()).norm() < 1e-12);
        }
        let form = QuadraticPhaseForm::new(&rs, &basis);
        let mut v = doubled(&coeffs).as_slice().to_vec();
        v.extend([h, h.conj()]);
        assert!((form.psi(&DVector::from_vec(v)) - psi_of_profile(&p, &basis)).abs() < 1e-12);
        assert_eq!(form.gg().nrows(), 4);
        assert_eq!(form.gh().ncols(), 2);
        assert_eq!(form.hg().nrows(), 2);
        assert_eq!(form.hh().nrows(), 2);
    }

    #[test]
    fn coefficients_at_long_times() {
        let basis = pair_basis();
        let rs = build_rs_matrices(&basis, 4000.0, default_omega_free(&basis)).unwrap();
        let target = vec![c(1.0, 2.0), c(-0.5, 0.3)];
        let h = c(0.2, 0.1);
        let g = solve_coefficients(&target, h, &rs).unwrap();
        let approx = doubled(&target) - &rs.s * doubled(&[h]);
        for j in 0..2 {
            assert!((g[j] - approx[j]).norm() < 1e-2);
        }
    }

    #[test]
    fn coefficient_residuals_on_random_targets() {
        let basis = pair_basis();
        let rs = build_rs_matrices(&basis, 5.0 / basis.nu_min(), default_omega_free(&basis)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let target: Vec<Complex64> =
                (0..2).map(|_| c(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0))).collect();
            let h = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let g = solve_coefficients(&target, h, &rs).unwrap();
            let lhs = &rs.r * doubled(&g) + &rs.s * doubled(&[h]);
            assert!(cmax(&(lhs - doubled(&target))) <= 1e-10);
        }
    }

    #[test]
    fn h_is_zero_when_psi_already_vanishes() {
        // A zero target with h = 0 is the zero profile.
        let basis = pair_basis();
        let rs = build_rs_matrices(&basis, 6.0, 0.77).unwrap();
        let h = solve_h_for_zero_psi(&[Complex64::default(), Complex64::default()], &rs, &basis).unwrap();
        assert_eq!(h, Complex64::default());
    }

    #[test]
    fn multimode_reference_pair() {
        let basis = pair_basis();
        let nu_min = basis.nu_min();
        let out = synthesize_multimode(&[0.0, 0.0], &[5.0, 5.0], &basis, 15.0 / nu_min, default_omega_free(&basis))
            .unwrap();
        assert!(psi_of_profile(&out.profile, &basis).abs() <= 1e-8);
        let out = synthesize_multimode(&[-FRAC_PI_2, -FRAC_PI_2], &[5.0, 5.0], &basis, 5.0 / nu_min, default_omega_free(&basis))
            .unwrap();
        for (b, t) in beta_of_profile(&out.profile, &basis).iter().zip(&out.displacement.beta) {
            assert!((b - t).norm() <= 1e-8);
        }
    }

    #[test]
    fn multimode_single_mode_consistency() {
        let basis = NormalModeBasis::single_mode(1.0);
        let tau = 2.0 * PI;
        let multi = synthesize_multimode(&[0.3], &[2.0], &basis, tau, default_omega_free(&basis)).unwrap();
        let single = synthesize_single_mode(0.3, 2.0, 1.0, tau).unwrap();
        assert!((multi.displacement.beta[0] - single.displacement.beta[0]).norm() <= 1e-8);
        assert!((beta_of_profile(&multi.profile, &basis)[0] - single.displacement.beta[0]).norm() <= 1e-8);
    }

    #[test]
    fn multimode_profile_scales_with_duration() {
        let basis = pair_basis();
        let coeffs = vec![c(0.3, 0.2), c(-0.1, 0.4)];
        let a = multimode_profile(&coeffs, c(0.2, 0.0), &basis, 3.0, 0.8).unwrap();
        let b = multimode_profile(&coeffs, c(0.2, 0.0), &basis, 6.0, 0.8).unwrap();
        for i in 0..50 {
            let s = 0.06 * i as f64;
            assert_relative_eq!(b.value(s), 0.5 * a.value(s), epsilon = 1e-14);
        }
    }

    #[test]
    fn random_network_h_solve_success_rate() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let (mut ok, mut total) = (0, 0);
        while total < 100 {
            let n = 2 + total % 2;
            let omega: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..3.0)).collect();
            let mut j = DMatrix::zeros(n, n);
            let mut k = DMatrix::zeros(n, n);
            for a in 0..n {
                for b in a + 1..n {
                    j[(a, b)] = rng.random_range(-0.4..0.4);
                    j[(b, a)] = j[(a, b)];
                    k[(a, b)] = rng.random_range(-0.3..0.3);
                    k[(b, a)] = k[(a, b)];
                }
            }
            let Ok(basis) = NetworkSpec::new(omega, j, k, 0).and_then(|s| williamson_diagonalize(&s)) else {
                continue;
            };
            total += 1;
            let thetas: Vec<f64> = (0..n).map(|_| rng.random_range(-PI..PI)).collect();
            let mags: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
            let tau = 10.0 / basis.nu_min();
            if let Ok(out) = synthesize_multimode(&thetas, &mags, &basis, tau, default_omega_free(&basis)) {
                ok += 1;
                assert!(psi_of_profile(&out.profile, &basis).abs() <= 1e-8);
            }
        }
        eprintln!("zero-Ψ synthesis succeeded on {ok}/{total} random networks");
        assert!(ok > 0);
    }
}
