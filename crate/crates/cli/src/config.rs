//! TOML experiment configuration.

use std::path::Path;

use mechrecon::gaussian::{make_squeezed_thermal, make_two_mode_squeezed_thermal, GaussianState};
use mechrecon::network::{
    default_tol_gap, validate_assumptions, williamson_diagonalize, NetworkSpec, NormalModeBasis, DEFAULT_TOL_G,
};
use mechrecon::protocol::{standard_pair_configs, standard_single_mode_configs, ThetaConfig};
use mechrecon::singlephoton::MechanicalState;
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    DesignProfile,
    ReconstructSweep,
    LossSweep,
    SinglephotonScan,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::DesignProfile => "design-profile",
            Scenario::ReconstructSweep => "reconstruct-sweep",
            Scenario::LossSweep => "loss-sweep",
            Scenario::SinglephotonScan => "singlephoton-scan",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub seed: u64,
    /// Worker threads; 1 runs sequentially, absent uses every core.
    #[serde(default)]
    pub workers: Option<usize>,
    pub network: NetworkConfig,
    #[serde(default)]
    pub state: Option<StateConfig>,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub singlephoton: Option<SinglePhotonConfig>,
}

/// Either a lone oscillator (`omega_m`) or a coupled network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    #[serde(default)]
    pub omega_m: Option<f64>,
    #[serde(default)]
    pub omega: Option<Vec<f64>>,
    /// Row-major `n×n` beam-splitter couplings.
    #[serde(default)]
    pub beam_splitter: Option<Vec<Vec<f64>>>,
    /// Row-major `n×n` two-mode squeezing couplings.
    #[serde(default)]
    pub squeezing: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub probe_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateConfig {
    Vacuum,
    Thermal { nbar: f64 },
    SqueezedThermal { nbar: f64, r: f64, #[serde(default)] phase: f64 },
    TwoModeSqueezedThermal { nbar: f64, r: f64 },
    Coherent { re: f64, im: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaEntry {
    pub thetas: Vec<f64>,
    /// Pulse length in units of `1/ν_min`.
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Base `|β_j|` per normal mode; a single value is broadcast.
    #[serde(default = "default_beta")]
    pub beta: Vec<f64>,
    #[serde(default = "default_order")]
    pub order: usize,
    /// Angle configurations; absent selects the standard set for one or two modes.
    #[serde(default)]
    pub configs: Option<Vec<ThetaEntry>>,
    /// Fall back to other free frequencies and longer pulses when needed.
    #[serde(default = "default_true")]
    pub allow_fallback: bool,
    /// Samples per profile in the design CSV.
    #[serde(default = "default_profile_samples")]
    pub profile_samples: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            beta: default_beta(),
            order: default_order(),
            configs: None,
            allow_fallback: true,
            profile_samples: default_profile_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_samples")]
    pub samples: Vec<usize>,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { samples: default_samples(), epsilons: default_epsilons(), trials: default_trials() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinglePhotonConfig {
    pub g0: f64,
    pub alpha_re: f64,
    #[serde(default)]
    pub alpha_im: f64,
    #[serde(default = "default_ring_points")]
    pub points: usize,
    /// Shots per quadrature and ring point; absent uses exact expectations.
    #[serde(default)]
    pub shots: Option<usize>,
}

fn default_beta() -> Vec<f64> {
    vec![5.0]
}
fn default_order() -> usize {
    2
}
fn default_true() -> bool {
    true
}
fn default_profile_samples() -> usize {
    512
}
fn default_samples() -> Vec<usize> {
    vec![100, 1000, 10000]
}
fn default_epsilons() -> Vec<f64> {
    vec![0.0]
}
fn default_trials() -> usize {
    100
}
fn default_ring_points() -> usize {
    mechrecon::singlephoton::DEFAULT_RING_POINTS
}

fn matrix(rows: &Option<Vec<Vec<f64>>>, n: usize, name: &str) -> Result<DMatrix<f64>, CliError> {
    match rows {
        None => Ok(DMatrix::zeros(n, n)),
        Some(rows) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(CliError::Config(format!("{name} must be {n}x{n}")));
            }
            Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
        Self::from_toml(&text)
    }

    /// Canonical TOML of the effective configuration; hashed into the manifest.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn network_spec(&self) -> Result<Option<NetworkSpec>, CliError> {
        let net = &self.network;
        match (&net.omega_m, &net.omega) {
            (Some(_), None) => Ok(None),
            (None, Some(omega)) => {
                let n = omega.len();
                let j = matrix(&net.beam_splitter, n, "beam_splitter")?;
                let k = matrix(&net.squeezing, n, "squeezing")?;
                Ok(Some(NetworkSpec::new(omega.clone(), j, k, net.probe_index)?))
            }
            _ => Err(CliError::Config("network needs exactly one of omega_m or omega".into())),
        }
    }

    pub fn basis(&self) -> Result<NormalModeBasis, CliError> {
        match self.network_spec()? {
            None => {
                let w = self.network.omega_m.expect("checked in network_spec");
                if !(w > 0.0) {
                    return Err(CliError::Config(format!("omega_m must be positive, got {w}")));
                }
                Ok(NormalModeBasis::single_mode(w))
            }
            Some(spec) => {
                let basis = williamson_diagonalize(&spec)?;
                let report = validate_assumptions(&basis, DEFAULT_TOL_G, default_tol_gap(&basis));
                if !report.a1_ok {
                    return Err(CliError::Config(format!(
                        "a normal mode is invisible to the probe (|G| = {:?})",
                        report.g_magnitudes
                    )));
                }
                if !report.a2_ok {
                    return Err(CliError::Config(format!("degenerate normal modes (gap {:e})", report.min_gap)));
                }
                Ok(basis)
            }
        }
    }

    pub fn base_mags(&self, n_modes: usize) -> Result<Vec<f64>, CliError> {
        let b = &self.protocol.beta;
        match b.len() {
            1 => Ok(vec![b[0]; n_modes]),
            l if l == n_modes => Ok(b.clone()),
            l => Err(CliError::Config(format!("beta has {l} entries for {n_modes} modes"))),
        }
    }

    pub fn theta_configs(&self, basis: &NormalModeBasis) -> Result<Vec<ThetaConfig>, CliError> {
        let nu = basis.nu_min();
        match &self.protocol.configs {
            Some(list) => Ok(list.iter().map(|c| ThetaConfig { thetas: c.thetas.clone(), tau: c.tau / nu }).collect()),
            None => match basis.n_modes() {
                1 => Ok(standard_single_mode_configs(nu)),
                2 => Ok(standard_pair_configs(nu)),
                n => Err(CliError::Config(format!("no standard angle set for {n} modes; list protocol.configs"))),
            },
        }
    }

    /// The state to reconstruct, in local-mode quadratures.
    pub fn gaussian_state(&self, n_modes: usize) -> Result<GaussianState, CliError> {
        let state = self.state.as_ref().ok_or_else(|| CliError::Config("missing [state] section".into()))?;
        let out = match state {
            StateConfig::Vacuum => GaussianState::vacuum(n_modes),
            StateConfig::Thermal { nbar } => GaussianState::thermal(n_modes, *nbar),
            StateConfig::SqueezedThermal { nbar, r, phase } if n_modes == 1 => make_squeezed_thermal(*nbar, *r, *phase)?,
            StateConfig::TwoModeSqueezedThermal { nbar, r } if n_modes == 2 => make_two_mode_squeezed_thermal(*nbar, *r)?,
            StateConfig::Coherent { re, im } if n_modes == 1 => GaussianState::coherent(Complex64::new(*re, *im)),
            other => return Err(CliError::Config(format!("state {other:?} does not fit {n_modes} modes"))),
        };
        Ok(out)
    }

    pub fn mechanical_state(&self) -> Result<MechanicalState, CliError> {
        match self.state.as_ref() {
            None | Some(StateConfig::Vacuum) => Ok(MechanicalState::Vacuum),
            Some(StateConfig::Thermal { nbar }) => Ok(MechanicalState::Thermal(*nbar)),
            Some(StateConfig::Coherent { re, im }) => Ok(MechanicalState::Coherent(Complex64::new(*re, *im))),
            Some(other) => Err(CliError::Config(format!("no closed-form characteristic function for {other:?}"))),
        }
    }

    /// Checks everything the selected scenario will need.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.workers == Some(0) {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        let basis = self.basis()?;
        let n = basis.n_modes();
        match self.scenario {
            Scenario::DesignProfile | Scenario::ReconstructSweep | Scenario::LossSweep => {
                let mags = self.base_mags(n)?;
                if mags.iter().any(|m| !(*m > 0.0)) {
                    return Err(CliError::Config("beta entries must be positive".into()));
                }
                for c in self.theta_configs(&basis)? {
                    if c.thetas.len() != n || !(c.tau > 0.0) {
                        return Err(CliError::Config(format!("bad angle configuration {c:?}")));
                    }
                }
                if !(1..=mechrecon::gaussian::MAX_MOMENT_ORDER).contains(&self.protocol.order) {
                    return Err(CliError::Config(format!("order {} outside 1..=8", self.protocol.order)));
                }
                if self.scenario != Scenario::DesignProfile {
                    self.gaussian_state(n)?;
                    let s = &self.sweep;
                    if s.samples.is_empty() || s.samples.contains(&0) || s.trials == 0 {
                        return Err(CliError::Config("sweep needs positive sample counts and trials".into()));
                    }
                    for &e in &s.epsilons {
                        mechrecon::dynamics::LossChannel::new(e)?;
                    }
                }
            }
            Scenario::SinglephotonScan => {
                if n != 1 {
                    return Err(CliError::Config("singlephoton-scan needs a single oscillator (omega_m)".into()));
                }
                let sp = self.singlephoton.as_ref().ok_or_else(|| CliError::Config("missing [singlephoton]".into()))?;
                if sp.points == 0 || sp.shots == Some(0) {
                    return Err(CliError::Config("points and shots must be positive".into()));
                }
                self.mechanical_state()?;
            }
        }
        Ok(())
    }
}
