use std::path::Path;

use mechrecon::protocol::{fidelity_sweep, DesignPolicy, Protocol};
use mechrecon::singlephoton::RingScan;
use mechrecon::Execution;
use num_complex::Complex64;

use crate::config::{ExperimentConfig, Scenario};
use crate::manifest::{sha256_hex, FileEntry, Manifest};
use crate::CliError;

/// In-memory CSV table; rendered with shortest round-trip float formatting.
struct Table {
    name: String,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn render(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| CliError::Io(self.name.clone(), e.into_error()))
    }
}

fn f(x: f64) -> String {
    x.to_string()
}

fn joined(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn execution(cfg: &ExperimentConfig) -> Execution {
    match cfg.workers {
        Some(1) => Execution::Sequential,
        _ => Execution::Parallel,
    }
}

fn design(cfg: &ExperimentConfig, notes: &mut Vec<String>) -> Result<Protocol, CliError> {
    let basis = cfg.basis()?;
    let configs = cfg.theta_configs(&basis)?;
    let policy = if cfg.protocol.allow_fallback { DesignPolicy::default() } else { DesignPolicy::strict() };
    let protocol = Protocol::design(
        &basis,
        &configs,
        &cfg.base_mags(basis.n_modes())?,
        cfg.protocol.order,
        &policy,
        execution(cfg),
    )?;
    for (c, nominal, used) in protocol.adjusted_durations(&configs) {
        notes.push(format!(
            "configuration {c}: no zero-phase profile at tau = {:.4}/nu_min; used {:.4}/nu_min",
            nominal * basis.nu_min(),
            used * basis.nu_min()
        ));
    }
    Ok(protocol)
}

fn design_tables(cfg: &ExperimentConfig, notes: &mut Vec<String>) -> Result<Vec<Table>, CliError> {
    let protocol = design(cfg, notes)?;
    let mut settings = Table::new(
        "settings.csv",
        &["setting", "config", "thetas", "beta_mags", "tau", "omega_free", "beta_re", "beta_im", "psi", "peak_g"],
    );
    let mut profiles = Table::new("profiles.csv", &["setting", "t", "g"]);
    for (i, s) in protocol.settings().iter().enumerate() {
        let re: Vec<f64> = s.displacement.beta.iter().map(|b| b.re).collect();
        let im: Vec<f64> = s.displacement.beta.iter().map(|b| b.im).collect();
        settings.push(vec![
            i.to_string(),
            s.config.to_string(),
            joined(&s.thetas),
            joined(&s.beta_mags),
            f(s.tau),
            s.omega_free.map(f).unwrap_or_default(),
            joined(&re),
            joined(&im),
            f(s.displacement.psi),
            f(s.profile.peak(cfg.protocol.profile_samples)),
        ]);
        for (t, g) in s.profile.sample(cfg.protocol.profile_samples) {
            profiles.push(vec![i.to_string(), f(t), f(g)]);
        }
    }
    Ok(vec![settings, profiles])
}

fn sweep_table(cfg: &ExperimentConfig, epsilons: &[f64], notes: &mut Vec<String>) -> Result<Table, CliError> {
    let protocol = design(cfg, notes)?;
    let truth = cfg.gaussian_state(protocol.basis().n_modes())?;
    let points =
        fidelity_sweep(&protocol, &truth, epsilons, &cfg.sweep.samples, cfg.sweep.trials, cfg.seed, execution(cfg));
    let mut t = Table::new(
        "fidelity.csv",
        &["epsilon", "n_samples", "trials", "mean", "std", "std_error", "unphysical", "failed"],
    );
    for p in points {
        t.push(vec![
            f(p.epsilon),
            p.n_samples.to_string(),
            p.trials.to_string(),
            f(p.mean),
            f(p.std),
            f(p.std_error),
            p.unphysical.to_string(),
            p.failed.to_string(),
        ]);
    }
    Ok(t)
}

fn ring_table(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let sp = cfg.singlephoton.as_ref().ok_or_else(|| CliError::Config("missing [singlephoton]".into()))?;
    let omega_m = cfg.basis()?.nu()[0];
    let scan = RingScan { g0: sp.g0, omega_m, alpha: Complex64::new(sp.alpha_re, sp.alpha_im) };
    let state = cfg.mechanical_state()?;
    let samples = match sp.shots {
        None => scan.exact(state, sp.points)?,
        Some(shots) => scan.sampled(state, sp.points, shots, cfg.seed)?,
    };
    let mut t = Table::new(
        "ring.csv",
        &[
            "tau", "beta_re", "beta_im", "psi", "x_mean", "p_mean", "chi_re", "chi_im", "chi_true_re", "chi_true_im",
            "std_error", "provenance",
        ],
    );
    for s in samples {
        t.push(vec![
            f(s.ring.tau),
            f(s.ring.beta.re),
            f(s.ring.beta.im),
            f(s.ring.psi),
            f(s.x_mean),
            f(s.p_mean),
            f(s.estimate.chi.re),
            f(s.estimate.chi.im),
            f(s.chi_true.re),
            f(s.chi_true.im),
            f(s.std_error),
            format!("{:?}", s.estimate.provenance).to_lowercase(),
        ]);
    }
    Ok(t)
}

/// Runs the configured scenario, writes its CSVs and `manifest.toml` into `out`.
pub fn run_scenario(cfg: &ExperimentConfig, out: &Path) -> Result<Manifest, CliError> {
    cfg.validate()?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(out.display().to_string(), e))?;
    let mut notes = Vec::new();
    let tables = match cfg.scenario {
        Scenario::DesignProfile => design_tables(cfg, &mut notes)?,
        Scenario::ReconstructSweep => vec![sweep_table(cfg, &cfg.sweep.epsilons, &mut notes)?],
        Scenario::LossSweep => {
            let eps = if cfg.sweep.epsilons == [0.0] { vec![0.0, 0.4, 0.8] } else { cfg.sweep.epsilons.clone() };
            vec![sweep_table(cfg, &eps, &mut notes)?]
        }
        Scenario::SinglephotonScan => vec![ring_table(cfg)?],
    };
    let mut files = Vec::new();
    for t in &tables {
        let bytes = t.render()?;
        let path = out.join(&t.name);
        std::fs::write(&path, &bytes).map_err(|e| CliError::Io(path.display().to_string(), e))?;
        files.push(FileEntry { name: t.name.clone(), sha256: sha256_hex(&bytes), rows: t.rows.len(), columns: t.columns.clone() });
    }
    let manifest = Manifest {
        scenario: cfg.scenario.name().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        config_sha256: sha256_hex(cfg.canonical().as_bytes()),
        files,
        notes,
    };
    manifest.write(out)?;
    Ok(manifest)
}
