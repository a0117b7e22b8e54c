//! End-to-end reconstruction: design one coupling profile per measurement
//! setting, collect cavity moments (exact or sampled), invert them and
//! compare the reconstructed state with the truth.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;

use crate::dynamics::{evolved_momentum, EvolvedObservable};
use crate::error::{Error, Result};
use crate::estimator::{
    assemble_covariance, build_moment_system, derive_seed, empirical_moments, invert_loss, simulate_homodyne,
    solve_moment_system, SettingMoments,
};
use crate::gaussian::{check_physicality, gaussian_fidelity, quadrature_moments_exact, GaussianState, Observable};
use crate::network::{local_to_normal, normal_to_local, NormalModeBasis};
use crate::parallel::{map_indexed, Execution};
use crate::profile::{
    default_omega_free, synthesize_multimode, synthesize_single_mode, DisplacementResult, InteractionProfile,
};

/// Target quadrature angles for every normal mode and the pulse length used.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaConfig {
    pub thetas: Vec<f64>,
    pub tau: f64,
}

/// `θ ∈ {0, π/4, −π/4, π/2}` at one mechanical period.
pub fn standard_single_mode_configs(omega_m: f64) -> Vec<ThetaConfig> {
    [0.0, FRAC_PI_4, -FRAC_PI_4, FRAC_PI_2]
        .iter()
        .map(|&t| ThetaConfig { thetas: vec![t], tau: 2.0 * PI / omega_m })
        .collect()
}

/// Six angle pairs with their pulse lengths in units of `1/ν_min`.
pub const STANDARD_PAIR_SCHEDULE: [(f64, f64, f64); 6] = [
    (-FRAC_PI_2, -FRAC_PI_2, 5.0),
    (0.0, 0.0, 15.0),
    (0.0, -FRAC_PI_2, 3.0),
    (-FRAC_PI_2, 0.0, 25.0),
    (-3.0 * FRAC_PI_4, -3.0 * FRAC_PI_4, 25.0),
    (-FRAC_PI_4, -FRAC_PI_4, 3.0),
];

pub fn standard_pair_configs(nu_min: f64) -> Vec<ThetaConfig> {
    STANDARD_PAIR_SCHEDULE
        .iter()
        .map(|&(a, b, t)| ThetaConfig { thetas: vec![a, b], tau: t / nu_min })
        .collect()
}

/// `|β|` scalings: all ones, then ×2 on each mode, then ×½ on each mode.
pub fn augmentation_schedule(n_modes: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![1.0; n_modes]];
    for factor in [2.0, 0.5] {
        for j in 0..n_modes {
            let mut s = vec![1.0; n_modes];
            s[j] = factor;
            out.push(s);
        }
    }
    out
}

/// Settings per angle configuration needed for the mixed moments up to `order`.
pub fn settings_per_config(n_modes: usize, order: usize) -> usize {
    let unknowns = crate::dynamics::binomial(n_modes + order, order).round() as usize - 1;
    unknowns.div_ceil(order).min(2 * n_modes + 1)
}

/// Fallbacks for configurations whose nominal `(τ, ω)` admit no zero-`Ψ`
/// profile: every free frequency is tried at the nominal `τ`, then `τ` grows
/// by `tau_step` (relative) up to `max_tau_steps` times.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPolicy {
    /// Free frequencies in units of `ν_min`, tried in order.
    pub omega_free: Vec<f64>,
    pub tau_step: f64,
    pub max_tau_steps: usize,
}

impl Default for DesignPolicy {
    fn default() -> Self {
        Self {
            omega_free: vec![FRAC_1_SQRT_2, 1.0 / 3f64.sqrt(), 1.0 / 5f64.sqrt(), 3f64.sqrt() / 2.0],
            tau_step: 0.05,
            max_tau_steps: 20,
        }
    }
}

impl DesignPolicy {
    /// Nominal `τ` and the default free frequency only.
    pub fn strict() -> Self {
        Self { omega_free: vec![FRAC_1_SQRT_2], tau_step: 0.0, max_tau_steps: 0 }
    }
}

/// A designed measurement setting with its profile and readout observable.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSetting {
    pub config: usize,
    pub thetas: Vec<f64>,
    pub beta_mags: Vec<f64>,
    /// Pulse length actually used; differs from the nominal one after a fallback.
    pub tau: f64,
    pub omega_free: Option<f64>,
    pub profile: InteractionProfile,
    pub displacement: DisplacementResult,
    pub observable: EvolvedObservable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Protocol {
    basis: NormalModeBasis,
    settings: Vec<ProtocolSetting>,
    order: usize,
}

fn is_bare_single_mode(basis: &NormalModeBasis) -> bool {
    basis.n_modes() == 1 && (basis.g_vec()[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12
}

fn design_config(
    basis: &NormalModeBasis,
    index: usize,
    cfg: &ThetaConfig,
    mags: &[Vec<f64>],
    policy: &DesignPolicy,
) -> Result<Vec<ProtocolSetting>> {
    let n = basis.n_modes();
    if cfg.thetas.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: cfg.thetas.len() });
    }
    let build = |tau: f64, omega: Option<f64>| -> Result<Vec<ProtocolSetting>> {
        mags.iter()
            .map(|m| {
                let (profile, displacement) = match omega {
                    None => {
                        let out = synthesize_single_mode(cfg.thetas[0], m[0], basis.nu()[0], tau)?;
                        (out.profile, out.displacement)
                    }
                    Some(w) => {
                        let out = synthesize_multimode(&cfg.thetas, m, basis, tau, w)?;
                        (out.profile, out.displacement)
                    }
                };
                Ok(ProtocolSetting {
                    config: index,
                    thetas: cfg.thetas.clone(),
                    beta_mags: m.clone(),
                    tau,
                    omega_free: omega,
                    observable: evolved_momentum(&displacement),
                    profile,
                    displacement,
                })
            })
            .collect()
    };
    if is_bare_single_mode(basis) {
        return build(cfg.tau, None);
    }
    let omegas: Vec<f64> = if policy.omega_free.is_empty() {
        vec![default_omega_free(basis)]
    } else {
        policy.omega_free.iter().map(|w| w * basis.nu_min()).collect()
    };
    let mut last = Error::NoZeroPsiRoot;
    for step in 0..=policy.max_tau_steps {
        let tau = cfg.tau * (1.0 + policy.tau_step * step as f64);
        for &w in &omegas {
            match build(tau, Some(w)) {
                Ok(s) => return Ok(s),
                Err(e @ (Error::NoZeroPsiRoot | Error::FrequencyCollision { .. })) => last = e,
                Err(e) => return Err(e),
            }
        }
    }
    Err(last)
}

impl Protocol {
    /// Synthesizes a zero-`Ψ` profile for every configuration and `|β|` scaling.
    /// A lone directly probed oscillator uses the two-harmonic ansatz; networks
    /// use the normal-mode ansatz with one free frequency. All scalings of one
    /// configuration share the same `(τ, ω)`.
    pub fn design(
        basis: &NormalModeBasis,
        configs: &[ThetaConfig],
        base_mags: &[f64],
        order: usize,
        policy: &DesignPolicy,
        exec: Execution,
    ) -> Result<Self> {
        let n = basis.n_modes();
        if base_mags.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: base_mags.len() });
        }
        let per = settings_per_config(n, order);
        let mags: Vec<Vec<f64>> = augmentation_schedule(n)
            .into_iter()
            .take(per)
            .map(|s| base_mags.iter().zip(&s).map(|(m, f)| m * f).collect())
            .collect();
        let designed = map_indexed(exec, configs.len(), |c| design_config(basis, c, &configs[c], &mags, policy));
        let mut settings = Vec::new();
        for d in designed {
            settings.extend(d?);
        }
        Ok(Self { basis: basis.clone(), settings, order })
    }

    /// Configurations whose pulse length was extended, as `(index, nominal, used)`.
    pub fn adjusted_durations(&self, configs: &[ThetaConfig]) -> Vec<(usize, f64, f64)> {
        let mut out = Vec::new();
        for s in &self.settings {
            let nominal = configs[s.config].tau;
            if (s.tau - nominal).abs() > 1e-12 * nominal && !out.iter().any(|(c, _, _)| *c == s.config) {
                out.push((s.config, nominal, s.tau));
            }
        }
        out
    }

    pub fn basis(&self) -> &NormalModeBasis {
        &self.basis
    }

    pub fn settings(&self) -> &[ProtocolSetting] {
        &self.settings
    }

    pub fn order(&self) -> usize {
        self.order
    }

    fn to_normal(&self, local: &GaussianState) -> Result<GaussianState> {
        local_to_normal(local, &self.basis)
    }

    /// Exact `⟨P(τ)^m⟩` for a state given in local-mode quadratures.
    pub fn exact_moments(&self, local: &GaussianState) -> Result<Vec<SettingMoments>> {
        let normal = self.to_normal(local)?;
        self.settings
            .iter()
            .map(|s| {
                Ok(SettingMoments {
                    thetas: s.thetas.clone(),
                    beta_mags: s.beta_mags.clone(),
                    p_moments: quadrature_moments_exact(&normal, Observable::Evolved(&s.observable), self.order)?,
                })
            })
            .collect()
    }

    /// Loss-corrected sample moments; setting `i` uses `derive_seed(master, i, trial)`.
    pub fn sampled_moments(
        &self,
        local: &GaussianState,
        epsilon: f64,
        n_samples: usize,
        master_seed: u64,
        trial: usize,
    ) -> Result<Vec<SettingMoments>> {
        let normal = self.to_normal(local)?;
        self.settings
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let seed = derive_seed(master_seed, i, trial);
                let mut samples = simulate_homodyne(&normal, &s.observable, epsilon, n_samples, seed)?;
                samples.setting = i;
                let measured = empirical_moments(&samples, self.order)?;
                Ok(SettingMoments {
                    thetas: s.thetas.clone(),
                    beta_mags: s.beta_mags.clone(),
                    p_moments: invert_loss(&measured, epsilon)?,
                })
            })
            .collect()
    }

    /// Reconstructed state in local-mode quadratures.
    pub fn reconstruct(&self, moments: &[SettingMoments]) -> Result<GaussianState> {
        let sol = solve_moment_system(&build_moment_system(moments, self.order)?)?;
        let normal = assemble_covariance(&sol, self.basis.n_modes())?;
        normal_to_local(&normal, &self.basis)
    }

    /// One sampled reconstruction scored against `truth`.
    pub fn run_trial(
        &self,
        truth: &GaussianState,
        epsilon: f64,
        n_samples: usize,
        master_seed: u64,
        trial: usize,
    ) -> TrialOutcome {
        let rec = self
            .sampled_moments(truth, epsilon, n_samples, master_seed, trial)
            .and_then(|m| self.reconstruct(&m));
        match rec {
            Err(e) => TrialOutcome::Failed(e),
            Ok(state) if !check_physicality(&state).physical => TrialOutcome::Unphysical,
            Ok(state) => match gaussian_fidelity(&state, truth) {
                Ok(f) => TrialOutcome::Fidelity(f),
                Err(e) => TrialOutcome::Failed(e),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrialOutcome {
    Fidelity(f64),
    /// The reconstructed covariance violates the uncertainty principle.
    Unphysical,
    Failed(Error),
}

impl TrialOutcome {
    /// Unphysical and failed trials score zero.
    pub fn score(&self) -> f64 {
        match self {
            TrialOutcome::Fidelity(f) => *f,
            _ => 0.0,
        }
    }
}

/// Fidelity statistics over the trials of one `(ε, 𝒩)` point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub epsilon: f64,
    pub n_samples: usize,
    pub trials: usize,
    pub mean: f64,
    pub std: f64,
    pub std_error: f64,
    pub unphysical: usize,
    pub failed: usize,
}

/// Mean, sample standard deviation and standard error.
pub fn summarize(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt(), (var / n).sqrt())
}

/// Runs `trials` reconstructions per `(ε, 𝒩)` pair. Trial `t` reuses the same
/// seeds at every point, so points differ only through `ε` and `𝒩`.
pub fn fidelity_sweep(
    protocol: &Protocol,
    truth: &GaussianState,
    epsilons: &[f64],
    sample_counts: &[usize],
    trials: usize,
    master_seed: u64,
    exec: Execution,
) -> Vec<SweepPoint> {
    let mut points = Vec::new();
    for &epsilon in epsilons {
        for &n_samples in sample_counts {
            let outcomes = map_indexed(exec, trials, |t| protocol.run_trial(truth, epsilon, n_samples, master_seed, t));
            let scores: Vec<f64> = outcomes.iter().map(TrialOutcome::score).collect();
            let (mean, std, std_error) = summarize(&scores);
            points.push(SweepPoint {
                epsilon,
                n_samples,
                trials,
                mean,
                std,
                std_error,
                unphysical: outcomes.iter().filter(|o| matches!(o, TrialOutcome::Unphysical)).count(),
                failed: outcomes.iter().filter(|o| matches!(o, TrialOutcome::Failed(_))).count(),
            });
        }
    }
    points
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::make_squeezed_thermal;

    #[test]
    fn schedule_and_counts() {
        assert_eq!(augmentation_schedule(2), vec![vec![1.0, 1.0], vec![2.0, 1.0], vec![1.0, 2.0], vec![0.5, 1.0], vec![1.0, 0.5]]);
        assert_eq!(settings_per_config(1, 2), 1);
        assert_eq!(settings_per_config(1, 6), 1);
        assert_eq!(settings_per_config(2, 2), 3);
    }

    #[test]
    fn single_mode_exact_round_trip() {
        let basis = NormalModeBasis::single_mode(1.0);
        let protocol =
            Protocol::design(&basis, &standard_single_mode_configs(1.0), &[5.0], 2, &DesignPolicy::default(), Execution::Sequential).unwrap();
        assert_eq!(protocol.settings().len(), 4);
        let truth = make_squeezed_thermal(1.0, 0.2, 0.0).unwrap();
        let rec = protocol.reconstruct(&protocol.exact_moments(&truth).unwrap()).unwrap();
        assert!(1.0 - gaussian_fidelity(&rec, &truth).unwrap() < 1e-9);
    }

    #[test]
    fn summary_statistics() {
        let (m, s, se) = summarize(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((se - s / 2.0).abs() < 1e-15);
    }

    #[test]
    fn sweep_is_reproducible_across_execution_modes() {
        let basis = NormalModeBasis::single_mode(1.0);
        let protocol =
            Protocol::design(&basis, &standard_single_mode_configs(1.0), &[2.0], 2, &DesignPolicy::default(), Execution::Sequential).unwrap();
        let truth = GaussianState::thermal(1, 1.0);
        let a = fidelity_sweep(&protocol, &truth, &[0.4], &[200], 12, 9, Execution::Sequential);
        let b = fidelity_sweep(&protocol, &truth, &[0.4], &[200], 12, 9, Execution::Parallel);
        assert_eq!(a, b);
        assert_eq!(a[0].trials, 12);
    }
}
