//! Cavity observables after the pulsed interaction, and the detection-loss channel.

use crate::error::{Error, Result};
use crate::profile::DisplacementResult;

pub mod truncated;

/// Below this `|Ψ|` the cavity `X` contribution is dropped.
pub const PSI_NEGLIGIBLE: f64 = 1e-8;

/// `P_out = p_weight·P_c + x_weight·X_c + Σ_j quad_weights[j]·Q_{θ_j}` where
/// `Q_θ = cos θ Q_j + sin θ P_j` on normal mode `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvolvedObservable {
    pub p_weight: f64,
    pub x_weight: f64,
    pub quad_weights: Vec<f64>,
    pub thetas: Vec<f64>,
}

impl EvolvedObservable {
    /// The bare cavity momentum, blind to the mechanics.
    pub fn cavity_momentum(n_modes: usize) -> Self {
        Self {
            p_weight: 1.0,
            x_weight: 0.0,
            quad_weights: vec![0.0; n_modes],
            thetas: vec![0.0; n_modes],
        }
    }

    pub fn n_modes(&self) -> usize {
        self.quad_weights.len()
    }

    pub fn psi_dependent(&self) -> bool {
        self.x_weight != 0.0
    }
}

/// Heisenberg-picture cavity momentum after the interaction:
/// `U†P_cU = P_c + 2Ψ X_c − √2 Σ_j |β_j| Q_{θ_j}`.
pub fn evolved_momentum(displacement: &DisplacementResult) -> EvolvedObservable {
    let psi = displacement.psi;
    EvolvedObservable {
        p_weight: 1.0,
        x_weight: if psi.abs() > PSI_NEGLIGIBLE { 2.0 * psi } else { 0.0 },
        quad_weights: displacement
            .beta
            .iter()
            .map(|b| -std::f64::consts::SQRT_2 * b.norm())
            .collect(),
        thetas: displacement.theta.clone(),
    }
}

/// `⟨0|P^k|0⟩`: zero for odd `k`, `(k−1)!!/2^{k/2}` for even `k`.
pub fn vacuum_moment(k: usize) -> f64 {
    if k % 2 == 1 {
        return 0.0;
    }
    (1..k).step_by(2).map(|i| i as f64 * 0.5).product()
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Beam-splitter loss `P_out = √(1−ε)P + √ε P_vac`, `0 ≤ ε < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossChannel {
    epsilon: f64,
}

impl LossChannel {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&epsilon) {
            return Err(Error::InvalidLoss(epsilon));
        }
        Ok(Self { epsilon })
    }

    pub fn lossless() -> Self {
        Self { epsilon: 0.0 }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn transmission(&self) -> f64 {
        1.0 - self.epsilon
    }

    /// Moments after the loss, given moments `⟨P^m⟩`, `m = 1..=order`, before it.
    pub fn forward(&self, moments: &[f64]) -> Vec<f64> {
        self.transform(moments, 1.0)
    }

    /// Inverts [`Self::forward`]: the added vacuum noise is removed by the
    /// same binomial expansion with a negative noise variance.
    pub fn invert(&self, measured: &[f64]) -> Vec<f64> {
        self.transform(measured, -1.0)
    }

    fn transform(&self, moments: &[f64], direction: f64) -> Vec<f64> {
        let (st, se) = (self.transmission().sqrt(), self.epsilon.sqrt());
        let mut full = Vec::with_capacity(moments.len() + 1);
        full.push(1.0);
        full.extend_from_slice(moments);
        (1..full.len())
            .map(|m| {
                let scale = if direction > 0.0 { 1.0 } else { st.powi(-(m as i32)) };
                let pre = if direction > 0.0 { st } else { 1.0 };
                let terms = (0..=m).step_by(2).map(|k| {
                    let sign = if direction < 0.0 && (k / 2) % 2 == 1 { -1.0 } else { 1.0 };
                    sign * binomial(m, k) * pre.powi((m - k) as i32) * se.powi(k as i32) * vacuum_moment(k) * full[m - k]
                });
                scale * compensated_sum(terms)
            })
            .collect()
    }
}

/// Neumaier summation.
fn compensated_sum(terms: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for x in terms {
        let t = sum + x;
        comp += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + comp
}

/// Moments of `√(1−ε)P + √ε P_vac` from moments of `P`; both vectors are
/// indexed from order 0, whose entry must be 1.
pub fn loss_moments_forward(moments: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    let channel = LossChannel::new(epsilon)?;
    match moments.first() {
        Some(m0) if (m0 - 1.0).abs() <= 1e-12 => {}
        _ => return Err(Error::InvalidArgument("moment vector must start with ⟨P⁰⟩ = 1".into())),
    }
    let mut out = vec![1.0];
    out.extend(channel.forward(&moments[1..]));
    Ok(out)
}
