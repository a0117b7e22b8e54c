use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid network specification: {0}")]
    InvalidNetwork(String),

    #[error("unstable network: Hamiltonian form not positive definite (min eigenvalue {min_eigenvalue:e})")]
    UnstableNetwork { min_eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("loss parameter epsilon = {0} outside [0, 1)")]
    InvalidLoss(f64),

    #[error("free frequency {omega} collides with the normal-mode spectrum")]
    FrequencyCollision { omega: f64 },

    #[error("R matrix ill-conditioned (condition number {condition:e}); try a different interaction time")]
    IllConditioned { condition: f64 },

    #[error("no h satisfies the zero quadratic-phase constraint over the phase grid; try other |beta| or tau")]
    NoZeroPsiRoot,

    #[error("single-mode profile infeasible at tau = {tau}; try a longer interaction time")]
    SynthesisInfeasible { tau: f64 },

    #[error("synthesized profile failed verification: {0}")]
    VerificationFailed(String),

    #[error("truncation leakage: population {population:e} in the top levels of subsystem {subsystem}; increase Fock dimensions")]
    TruncationLeakage { subsystem: usize, population: f64 },

    #[error("moment order {0} exceeds the supported maximum of 8")]
    OrderTooHigh(usize),

    #[error("empty sample set")]
    EmptySamples,

    #[error("rank-deficient moment system; unconstrained unknowns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),

    #[error("insufficient quadrature coverage; unconstrained entries: {}", .0.join(", "))]
    InsufficientCoverage(Vec<String>),

    #[error("unphysical Gaussian state: min eigenvalue of V + i\u{3a9}/2 is {0:e}")]
    Unphysical(f64),

    #[error("prefactor magnitude {0:e} below threshold; characteristic function not recoverable")]
    VanishingPrefactor(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
