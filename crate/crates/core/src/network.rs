//! Mechanical network Hamiltonian and its normal-mode decomposition.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gaussian::GaussianState;
use crate::linalg::{max_abs, max_abs_c, min_sym_eigenvalue, sym_apply, symplectic_form, to_complex};

/// Bare frequencies and couplings of `H_0 = Σ ω_n b_n†b_n + Σ_{n<m} J_nm (b_n b_m† + h.c.)
/// + Σ_{n<m} K_nm (b_n b_m + h.c.)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    omega: Vec<f64>,
    j: DMatrix<f64>,
    k: DMatrix<f64>,
    probe_index: usize,
}

impl NetworkSpec {
    pub fn new(omega: Vec<f64>, j: DMatrix<f64>, k: DMatrix<f64>, probe_index: usize) -> Result<Self> {
        let n = omega.len();
        if n == 0 {
            return Err(Error::InvalidNetwork("no modes".into()));
        }
        if let Some(w) = omega.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidNetwork(format!("bare frequency {w} must be positive")));
        }
        for (name, m) in [("J", &j), ("K", &k)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::InvalidNetwork(format!("{name} must be {n}x{n}")));
            }
            if max_abs(&(m - m.transpose())) > 1e-12 {
                return Err(Error::InvalidNetwork(format!("{name} must be symmetric")));
            }
            if m.diagonal().iter().any(|d| *d != 0.0) {
                return Err(Error::InvalidNetwork(format!("{name} must have zero diagonal")));
            }
        }
        if probe_index >= n {
            return Err(Error::InvalidNetwork(format!("probe index {probe_index} out of range")));
        }
        Ok(Self { omega, j, k, probe_index })
    }

    pub fn uncoupled(omega: Vec<f64>) -> Result<Self> {
        let n = omega.len();
        Self::new(omega, DMatrix::zeros(n, n), DMatrix::zeros(n, n), 0)
    }

    /// Two identical oscillators with a single beam-splitter and squeezing link.
    pub fn symmetric_pair(omega: f64, j: f64, k: f64) -> Result<Self> {
        let off = |x: f64| DMatrix::from_row_slice(2, 2, &[0.0, x, x, 0.0]);
        Self::new(vec![omega, omega], off(j), off(k), 0)
    }

    pub fn n_modes(&self) -> usize {
        self.omega.len()
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn beam_splitter(&self) -> &DMatrix<f64> {
        &self.j
    }

    pub fn squeezing(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn probe_index(&self) -> usize {
        self.probe_index
    }
}

/// Real symmetric `M` with `H_0 = ½ xᵀ M x + const` in the ordering
/// `(Q_1..Q_n, P_1..P_n)`.
///
/// `b_n†b_m + b_n b_m† = Q_nQ_m + P_nP_m` and `b_n b_m + b_n†b_m† = Q_nQ_m − P_nP_m`,
/// so the QQ block is `diag(ω) + J + K`, the PP block `diag(ω) + J − K`.
pub fn build_hamiltonian_form(spec: &NetworkSpec) -> Result<DMatrix<f64>> {
    let n = spec.n_modes();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for a in 0..n {
        for b in 0..n {
            let diag = if a == b { spec.omega[a] } else { 0.0 };
            m[(a, b)] = diag + spec.j[(a, b)] + spec.k[(a, b)];
            m[(n + a, n + b)] = diag + spec.j[(a, b)] - spec.k[(a, b)];
        }
    }
    let min_eigenvalue = min_sym_eigenvalue(&m);
    if min_eigenvalue <= 0.0 {
        return Err(Error::UnstableNetwork { min_eigenvalue });
    }
    Ok(m)
}

/// Normal-mode decomposition `d = S1 b + S2 b†` with eigenfrequencies `ν`
/// and probe couplings `G_n = (S1 − S2)*_{n,probe}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalModeBasis {
    s1: DMatrix<Complex64>,
    s2: DMatrix<Complex64>,
    nu: Vec<f64>,
    g_vec: Vec<Complex64>,
}

impl NormalModeBasis {
    /// A lone oscillator of frequency `omega_m` probed directly (`G = 1`).
    pub fn single_mode(omega_m: f64) -> Self {
        Self {
            s1: DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0)),
            s2: DMatrix::from_element(1, 1, Complex64::new(0.0, 0.0)),
            nu: vec![omega_m],
            g_vec: vec![Complex64::new(1.0, 0.0)],
        }
    }

    pub fn n_modes(&self) -> usize {
        self.nu.len()
    }

    pub fn s1(&self) -> &DMatrix<Complex64> {
        &self.s1
    }

    pub fn s2(&self) -> &DMatrix<Complex64> {
        &self.s2
    }

    /// Eigenfrequencies, ascending.
    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn nu_min(&self) -> f64 {
        self.nu[0]
    }

    pub fn g_vec(&self) -> &[Complex64] {
        &self.g_vec
    }

    /// The Bogoliubov matrix `[[S1, S2], [S2*, S1*]]`.
    pub fn bogoliubov(&self) -> DMatrix<Complex64> {
        let n = self.n_modes();
        let mut m = DMatrix::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&self.s1);
        m.view_mut((0, n), (n, n)).copy_from(&self.s2);
        m.view_mut((n, 0), (n, n)).copy_from(&self.s2.map(|z| z.conj()));
        m.view_mut((n, n), (n, n)).copy_from(&self.s1.map(|z| z.conj()));
        m
    }

    /// Max-entry residual of `S K S† − K` with `K = diag(I, −I)`.
    pub fn symplectic_residual(&self) -> f64 {
        let n = self.n_modes();
        let s = self.bogoliubov();
        let mut k = DMatrix::<Complex64>::identity(2 * n, 2 * n);
        for i in n..2 * n {
            k[(i, i)] = Complex64::new(-1.0, 0.0);
        }
        max_abs_c(&(&s * &k * s.adjoint() - k))
    }

    /// Real symplectic map from local to normal-mode quadratures, `y = T x`.
    pub fn to_normal(&self) -> DMatrix<f64> {
        let n = self.n_modes();
        let sum = &self.s1 + &self.s2;
        let diff = &self.s1 - &self.s2;
        let mut t = DMatrix::zeros(2 * n, 2 * n);
        for a in 0..n {
            for b in 0..n {
                t[(a, b)] = sum[(a, b)].re;
                t[(a, n + b)] = -diff[(a, b)].im;
                t[(n + a, b)] = sum[(a, b)].im;
                t[(n + a, n + b)] = diff[(a, b)].re;
            }
        }
        t
    }

    /// Inverse of [`Self::to_normal`], `x = S y`, via `S = −Ω Tᵀ Ω`.
    pub fn to_local(&self) -> DMatrix<f64> {
        let omega = symplectic_form(self.n_modes());
        -(&omega * self.to_normal().transpose() * &omega)
    }

    /// Builds the basis from blocks `S1`, `S2` and frequencies, computing `G`.
    fn from_blocks(s1: DMatrix<Complex64>, s2: DMatrix<Complex64>, nu: Vec<f64>, probe: usize) -> Self {
        let g_vec = (0..nu.len()).map(|n| (s1[(n, probe)] - s2[(n, probe)]).conj()).collect();
        Self { s1, s2, nu, g_vec }
    }
}

/// Williamson decomposition of the network's positive-definite quadrature form.
///
/// With `K = M^{1/2} Ω M^{1/2}` the Hermitian matrix `iK` has eigenvalues `±ν_j`;
/// the positive-branch eigenvectors `u_j = (a_j + i b_j)/√2` give an orthogonal
/// `O = [a, −b]` with `Oᵀ K O = Ω diag(ν, ν)`, and `x = M^{−1/2} O diag(ν,ν)^{1/2} y`
/// is symplectic and diagonalizes `M`.
pub fn williamson_diagonalize(spec: &NetworkSpec) -> Result<NormalModeBasis> {
    let m = build_hamiltonian_form(spec)?;
    let n = spec.n_modes();
    let m_half = sym_apply(&m, f64::sqrt);
    let omega = symplectic_form(n);
    let kmat = &m_half * &omega * &m_half;
    let herm = to_complex(&kmat) * Complex64::new(0.0, 1.0);
    let eig = SymmetricEigen::new(herm);

    let mut positive: Vec<(f64, usize)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > 0.0)
        .map(|(i, v)| (*v, i))
        .collect();
    positive.sort_by(|a, b| a.0.total_cmp(&b.0));
    if positive.len() != n {
        return Err(Error::UnstableNetwork { min_eigenvalue: 0.0 });
    }

    let mut o = DMatrix::<f64>::zeros(2 * n, 2 * n);
    let mut nu = Vec::with_capacity(n);
    for (col, &(value, idx)) in positive.iter().enumerate() {
        let u = eig.eigenvectors.column(idx);
        for r in 0..2 * n {
            o[(r, col)] = std::f64::consts::SQRT_2 * u[r].re;
            o[(r, n + col)] = -std::f64::consts::SQRT_2 * u[r].im;
        }
        nu.push(value);
    }
    let scale = DVector::from_iterator(2 * n, nu.iter().chain(nu.iter()).map(|v| v.sqrt()));
    // T = diag(ν,ν)^{-1/2} Oᵀ M^{1/2}
    let mut t = o.transpose() * &m_half;
    for r in 0..2 * n {
        t.row_mut(r).unscale_mut(scale[r]);
    }

    let mut s1 = DMatrix::<Complex64>::zeros(n, n);
    let mut s2 = DMatrix::<Complex64>::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let (qq, qp, pq, pp) = (t[(a, b)], t[(a, n + b)], t[(n + a, b)], t[(n + a, n + b)]);
            s1[(a, b)] = Complex64::new(0.5 * (qq + pp), 0.5 * (pq - qp));
            s2[(a, b)] = Complex64::new(0.5 * (qq - pp), 0.5 * (pq + qp));
        }
    }

    // Phase convention: G_n real and non-negative; modes invisible to the
    // probe get their largest S1 entry real and positive instead.
    let probe = spec.probe_index();
    for a in 0..n {
        let g = (s1[(a, probe)] - s2[(a, probe)]).conj();
        let phase = if g.norm() > 1e-12 {
            g.arg()
        } else {
            let (_, pivot) = (0..n).fold((0.0, 0), |(best, bi), b| {
                let v = s1[(a, b)].norm();
                if v > best + 1e-12 { (v, b) } else { (best, bi) }
            });
            -s1[(a, pivot)].arg()
        };
        let rot = Complex64::from_polar(1.0, phase);
        for b in 0..n {
            s1[(a, b)] *= rot;
            s2[(a, b)] *= rot;
        }
    }
    Ok(NormalModeBasis::from_blocks(s1, s2, nu, probe))
}

/// Outcome of the probe-visibility (A1) and spectral-gap (A2) checks.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub a1_ok: bool,
    pub g_magnitudes: Vec<f64>,
    pub a2_ok: bool,
    pub min_gap: f64,
    pub tol_g: f64,
    pub tol_gap: f64,
}

pub const DEFAULT_TOL_G: f64 = 1e-8;

/// Default gap tolerance `1e−6 · min(ν)`.
pub fn default_tol_gap(basis: &NormalModeBasis) -> f64 {
    1e-6 * basis.nu_min()
}

pub fn validate_assumptions(basis: &NormalModeBasis, tol_g: f64, tol_gap: f64) -> AssumptionReport {
    let g_magnitudes: Vec<f64> = basis.g_vec().iter().map(|g| g.norm()).collect();
    let a1_ok = g_magnitudes.iter().all(|&g| g > tol_g);
    let nu = basis.nu();
    let mut min_gap = f64::INFINITY;
    for a in 0..nu.len() {
        for b in a + 1..nu.len() {
            min_gap = min_gap.min((nu[a] - nu[b]).abs());
        }
    }
    AssumptionReport {
        a1_ok,
        g_magnitudes,
        a2_ok: min_gap > tol_gap,
        min_gap,
        tol_g,
        tol_gap,
    }
}

/// Re-expresses a normal-mode state in the local `b_1..b_N` quadratures.
pub fn normal_to_local(state: &GaussianState, basis: &NormalModeBasis) -> Result<GaussianState> {
    check_dim(state, basis)?;
    Ok(state.transformed(&basis.to_local()))
}

/// Expresses a local-mode state in the normal-mode quadratures.
pub fn local_to_normal(state: &GaussianState, basis: &NormalModeBasis) -> Result<GaussianState> {
    check_dim(state, basis)?;
    Ok(state.transformed(&basis.to_normal()))
}

fn check_dim(state: &GaussianState, basis: &NormalModeBasis) -> Result<()> {
    if state.n_modes() != basis.n_modes() {
        return Err(Error::DimensionMismatch {
            expected: basis.n_modes(),
            got: state.n_modes(),
        });
    }
    Ok(())
}
