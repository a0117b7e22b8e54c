//! Homodyne sampling of the evolved cavity momentum and moment-based
//! reconstruction of mechanical moments and covariance matrices.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use crate::dynamics::{binomial, vacuum_moment, EvolvedObservable, LossChannel};
use crate::error::{Error, Result};
use crate::gaussian::{observable_mean_variance, GaussianState, MAX_MOMENT_ORDER};
use crate::linalg::lstsq;

pub mod deconvolution;

/// Relative singular-value cutoff for the moment least-squares solves.
const RANK_TOL: f64 = 1e-10;

/// One measurement configuration: target quadratures, displacement sizes,
/// detection loss and shot count.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSetting {
    pub thetas: Vec<f64>,
    pub beta_mags: Vec<f64>,
    pub epsilon: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl MeasurementSetting {
    pub fn validate(&self) -> Result<()> {
        if self.thetas.len() != self.beta_mags.len() {
            return Err(Error::DimensionMismatch {
                expected: self.thetas.len(),
                got: self.beta_mags.len(),
            });
        }
        if self.beta_mags.iter().any(|b| !(*b > 0.0)) {
            return Err(Error::InvalidArgument("β magnitudes must be positive".into()));
        }
        if self.n_samples == 0 {
            return Err(Error::EmptySamples);
        }
        LossChannel::new(self.epsilon)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementPlan {
    pub settings: Vec<MeasurementSetting>,
    pub order: usize,
}

impl MeasurementPlan {
    pub fn validate(&self) -> Result<()> {
        if self.order == 0 || self.order > MAX_MOMENT_ORDER {
            return Err(Error::OrderTooHigh(self.order));
        }
        self.settings.iter().try_for_each(MeasurementSetting::validate)
    }
}

/// Homodyne outcomes of `P_out` for one setting.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub outcomes: Vec<f64>,
    pub setting: usize,
    pub seed: u64,
}

/// Independent seed for `(setting, trial)` drawn from its own ChaCha stream.
pub fn derive_seed(master: u64, setting: usize, trial: usize) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(((setting as u64) << 32) | trial as u64);
    rng.next_u64()
}

/// Draws `n` shots of `P_out = √(1−ε) P(τ) + √ε P_vac` for a Gaussian
/// mechanical state and vacuum cavity; the law is exactly normal.
pub fn simulate_homodyne(
    state: &GaussianState,
    obs: &EvolvedObservable,
    epsilon: f64,
    n: usize,
    seed: u64,
) -> Result<SampleSet> {
    let channel = LossChannel::new(epsilon)?;
    if n == 0 {
        return Err(Error::EmptySamples);
    }
    let (mean, var) = observable_mean_variance(state, obs.into())?;
    let t = channel.transmission();
    let law = Normal::new(t.sqrt() * mean, (t * var + 0.5 * epsilon).sqrt())
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Ok(SampleSet {
        outcomes: law.sample_iter(&mut rng).take(n).collect(),
        setting: 0,
        seed,
    })
}

/// Raw sample moments of orders `1..=order`.
pub fn empirical_moments(samples: &SampleSet, order: usize) -> Result<Vec<f64>> {
    if order > MAX_MOMENT_ORDER {
        return Err(Error::OrderTooHigh(order));
    }
    if samples.outcomes.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut sums = vec![0.0; order];
    for &x in &samples.outcomes {
        let mut p = 1.0;
        for s in sums.iter_mut() {
            p *= x;
            *s += p;
        }
    }
    let n = samples.outcomes.len() as f64;
    Ok(sums.into_iter().map(|s| s / n).collect())
}

/// Undoes the detection loss on moments of orders `1..=n`.
pub fn invert_loss(measured: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    Ok(LossChannel::new(epsilon)?.invert(measured))
}

/// Mixed mechanical moment `⟨Π_j Q_{θ_j}^{k_j}⟩`; angles of modes with
/// `k_j = 0` are irrelevant and stored as `None`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MomentLabel {
    pub powers: Vec<usize>,
    angle_keys: Vec<Option<i64>>,
}

const ANGLE_QUANTUM: f64 = 1e-9;

fn angle_key(theta: f64) -> i64 {
    (theta.rem_euclid(2.0 * PI) / ANGLE_QUANTUM).round() as i64 % (2.0 * PI / ANGLE_QUANTUM).round() as i64
}

impl MomentLabel {
    pub fn new(powers: Vec<usize>, thetas: &[f64]) -> Self {
        let angle_keys = powers
            .iter()
            .zip(thetas)
            .map(|(&k, &t)| (k > 0).then(|| angle_key(t)))
            .collect();
        Self { powers, angle_keys }
    }

    pub fn order(&self) -> usize {
        self.powers.iter().sum()
    }

    /// Angle of mode `j` in `[0, 2π)` if it appears in the product.
    pub fn theta(&self, j: usize) -> Option<f64> {
        self.angle_keys[j].map(|k| k as f64 * ANGLE_QUANTUM)
    }
}

impl fmt::Display for MomentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<")?;
        let mut first = true;
        for (j, &k) in self.powers.iter().enumerate() {
            if k == 0 {
                continue;
            }
            if !first {
                write!(f, " ")?;
            }
            first = false;
            write!(f, "Q{}[{:.4}]^{}", j + 1, self.theta(j).unwrap_or(0.0), k)?;
        }
        write!(f, ">")
    }
}

/// Moments `⟨P(τ)^m⟩`, `m = 1..=order`, observed for one setting.
#[derive(Debug, Clone, PartialEq)]
pub struct SettingMoments {
    pub thetas: Vec<f64>,
    pub beta_mags: Vec<f64>,
    pub p_moments: Vec<f64>,
}

/// `A x = b` relating cavity moments to mixed mechanical moments.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub labels: Vec<MomentLabel>,
}

/// All `k ∈ ℕⁿ` with `1 ≤ |k| ≤ order`, graded by total order.
fn multi_indices(n: usize, order: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for k in (0..=left).rev() {
            cur.push(k);
            rec(n, left - k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for total in 1..=order {
        let mut level = Vec::new();
        rec(n, total, &mut Vec::new(), &mut level);
        out.extend(level.into_iter().filter(|k| k.iter().sum::<usize>() == total));
    }
    out
}

/// `m! / (k_0! k_1! …)`.
fn multinomial(m: usize, parts: &[usize]) -> f64 {
    let mut left = m;
    let mut acc = 1.0;
    for &k in parts {
        acc *= binomial(left, k);
        left -= k;
    }
    acc
}

/// Expands `⟨(P_c − √2 Σ_j |β_j| Q_{θ_j})^m⟩` for every setting and order:
/// `Σ multinomial(m; k_0, k) V_{k_0} Π_j (−√2|β_j|)^{k_j} ⟨Π_j Q_{θ_j}^{k_j}⟩`,
/// with the `k = 0` term moved to the right-hand side.
pub fn build_moment_system(results: &[SettingMoments], order: usize) -> Result<MomentSystem> {
    if order == 0 || order > MAX_MOMENT_ORDER {
        return Err(Error::OrderTooHigh(order));
    }
    let n = results.first().map(|r| r.thetas.len()).ok_or(Error::EmptySamples)?;
    let mut index: BTreeMap<MomentLabel, usize> = BTreeMap::new();
    let mut labels = Vec::new();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut rhs = Vec::new();
    let ks = multi_indices(n, order);
    for r in results {
        if r.thetas.len() != n || r.beta_mags.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: r.thetas.len() });
        }
        if r.p_moments.len() < order {
            return Err(Error::DimensionMismatch { expected: order, got: r.p_moments.len() });
        }
        let w: Vec<f64> = r.beta_mags.iter().map(|b| -SQRT_2 * b).collect();
        for m in 1..=order {
            let mut row = Vec::new();
            for k in ks.iter().filter(|k| k.iter().sum::<usize>() <= m) {
                let k0 = m - k.iter().sum::<usize>();
                let v = vacuum_moment(k0);
                if v == 0.0 {
                    continue;
                }
                let mut parts = vec![k0];
                parts.extend_from_slice(k);
                let coeff = multinomial(m, &parts)
                    * v
                    * k.iter().zip(&w).map(|(&kj, wj)| wj.powi(kj as i32)).product::<f64>();
                let label = MomentLabel::new(k.clone(), &r.thetas);
                let col = *index.entry(label.clone()).or_insert_with(|| {
                    labels.push(label);
                    labels.len() - 1
                });
                row.push((col, coeff));
            }
            rows.push(row);
            rhs.push(r.p_moments[m - 1] - vacuum_moment(m));
        }
    }
    let mut matrix = DMatrix::zeros(rows.len(), labels.len());
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            matrix[(i, j)] += v;
        }
    }
    Ok(MomentSystem { matrix, rhs: DVector::from_vec(rhs), labels })
}

/// Least-squares solution of a [`MomentSystem`].
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSolution {
    pub labels: Vec<MomentLabel>,
    pub values: Vec<f64>,
    pub residual: f64,
    pub condition: f64,
}

impl MomentSolution {
    pub fn get(&self, label: &MomentLabel) -> Option<f64> {
        self.labels.iter().position(|l| l == label).map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MomentLabel, f64)> {
        self.labels.iter().zip(self.values.iter().copied())
    }
}

pub fn solve_moment_system(sys: &MomentSystem) -> Result<MomentSolution> {
    let out = lstsq(&sys.matrix, &sys.rhs, RANK_TOL);
    if out.rank < sys.labels.len() {
        return Err(Error::RankDeficient(
            out.null_columns.iter().map(|&j| sys.labels[j].to_string()).collect(),
        ));
    }
    let residual = (&sys.matrix * &out.solution - &sys.rhs).norm();
    Ok(MomentSolution {
        labels: sys.labels.clone(),
        values: out.solution.iter().copied().collect(),
        residual,
        condition: out.condition,
    })
}

fn quadrature_name(n: usize, idx: usize) -> String {
    if idx < n {
        format!("Q{}", idx + 1)
    } else {
        format!("P{}", idx - n + 1)
    }
}

/// Mean vector and covariance matrix from first and second mixed moments.
///
/// `⟨Q_θ⟩ = cos θ ⟨Q⟩ + sin θ ⟨P⟩` and
/// `⟨Q_{θ_a} Q_{θ_b}⟩` expands into symmetrized second moments `⟨{x_i, x_j}⟩/2`;
/// both are solved in the least-squares sense and `V = M − μμᵀ`.
pub fn assemble_covariance(solution: &MomentSolution, n_modes: usize) -> Result<GaussianState> {
    let dir = |theta: f64| (theta.cos(), theta.sin());
    // First moments.
    let mut rows1 = Vec::new();
    let mut rhs1 = Vec::new();
    // Second moments, upper triangle of the 2n×2n symmetric matrix.
    let dim = 2 * n_modes;
    let pair_index = |i: usize, j: usize| {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        a * dim - a * (a + 1) / 2 + b
    };
    let n_pairs = dim * (dim + 1) / 2;
    let mut rows2 = Vec::new();
    let mut rhs2 = Vec::new();
    for (label, value) in solution.iter() {
        if label.powers.len() != n_modes {
            return Err(Error::DimensionMismatch { expected: n_modes, got: label.powers.len() });
        }
        let active: Vec<usize> = (0..n_modes).filter(|&j| label.powers[j] > 0).collect();
        match label.order() {
            1 => {
                let j = active[0];
                let (c, s) = dir(label.theta(j).unwrap_or(0.0));
                let mut row = vec![0.0; dim];
                row[j] = c;
                row[n_modes + j] = s;
                rows1.push(row);
                rhs1.push(value);
            }
            2 => {
                let (a, b) = if active.len() == 1 { (active[0], active[0]) } else { (active[0], active[1]) };
                let (ca, sa) = dir(label.theta(a).unwrap_or(0.0));
                let (cb, sb) = dir(label.theta(b).unwrap_or(0.0));
                let mut row = vec![0.0; n_pairs];
                for (ia, wa) in [(a, ca), (n_modes + a, sa)] {
                    for (ib, wb) in [(b, cb), (n_modes + b, sb)] {
                        row[pair_index(ia, ib)] += wa * wb;
                    }
                }
                rows2.push(row);
                rhs2.push(value);
            }
            _ => {}
        }
    }
    let mut missing = Vec::new();
    let solve = |rows: &[Vec<f64>], rhs: &[f64], ncols: usize| {
        let a = DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]);
        lstsq(&a, &DVector::from_column_slice(rhs), RANK_TOL)
    };
    let mean = if rows1.is_empty() {
        missing.extend((0..dim).map(|i| format!("mean {}", quadrature_name(n_modes, i))));
        DVector::zeros(dim)
    } else {
        let out = solve(&rows1, &rhs1, dim);
        missing.extend(out.null_columns.iter().map(|&i| format!("mean {}", quadrature_name(n_modes, i))));
        out.solution
    };
    let second = if rows2.is_empty() {
        missing.push("all second moments".into());
        DVector::zeros(n_pairs)
    } else {
        let out = solve(&rows2, &rhs2, n_pairs);
        for i in 0..dim {
            for j in i..dim {
                if out.null_columns.contains(&pair_index(i, j)) {
                    missing.push(format!(
                        "second moment {}·{}",
                        quadrature_name(n_modes, i),
                        quadrature_name(n_modes, j)
                    ));
                }
            }
        }
        out.solution
    };
    if !missing.is_empty() {
        return Err(Error::InsufficientCoverage(missing));
    }
    let cov = DMatrix::from_fn(dim, dim, |i, j| second[pair_index(i, j)] - mean[i] * mean[j]);
    GaussianState::new(mean, cov)
}
