//! Closed forms for the oscillatory integrals that appear in every
//! displacement and quadratic-phase evaluation.
//!
//! `exp_integral(a, τ) = ∫₀^τ e^{ias} ds` and
//! `double_exp_integral(a, b, τ) = ∫₀^τ e^{iat} ∫₀^t e^{ibs} ds dt`.
//! The double integral is τ² times the second divided difference of the
//! exponential at the nodes `(0, iaτ, i(a+b)τ)`; coincident nodes are the
//! degenerate cases `a ≈ 0`, `b ≈ 0`, `a + b ≈ 0` and `a ≈ b ≈ 0`.

use num_complex::Complex64;

/// Below this phase magnitude `exp_integral` switches to its Taylor series.
pub const SERIES_THRESHOLD: f64 = 1e-6;

/// Node spread below which the divided difference is summed as a series.
const CLUSTER_SPREAD: f64 = 0.5;
const CLUSTER_TERMS: usize = 26;

/// `(e^{iθ} − 1)/(iθ)`, evaluated without cancellation.
pub(crate) fn phi1(theta: f64) -> Complex64 {
    if theta.abs() < SERIES_THRESHOLD {
        let t2 = theta * theta;
        Complex64::new(1.0 - t2 / 6.0, 0.5 * theta - theta * t2 / 24.0)
    } else {
        let s = (0.5 * theta).sin();
        // e^{iθ} − 1 = −2 sin²(θ/2) + i sin θ
        let num = Complex64::new(-2.0 * s * s, theta.sin());
        Complex64::new(num.im / theta, -num.re / theta)
    }
}

/// `∫₀^τ e^{ias} ds`.
pub fn exp_integral(a: f64, tau: f64) -> Complex64 {
    tau * phi1(a * tau)
}

/// `∫₀^τ e^{iat} ∫₀^t e^{ibs} ds dt`.
pub fn double_exp_integral(a: f64, b: f64, tau: f64) -> Complex64 {
    if tau == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    tau * tau * divided_difference2([0.0, a * tau, (a + b) * tau])
}

/// First divided difference of `z ↦ e^{z}` at `iu`, `iv`.
fn dd1(u: f64, v: f64) -> Complex64 {
    Complex64::from_polar(1.0, u) * phi1(v - u)
}

/// Second divided difference of `z ↦ e^{z}` at the imaginary nodes `iθ_k`.
fn divided_difference2(theta: [f64; 3]) -> Complex64 {
    // Pick the most separated pair as the outer nodes.
    let pairs = [(0usize, 1usize, 2usize), (0, 2, 1), (1, 2, 0)];
    let (p, q, r) = pairs
        .iter()
        .copied()
        .max_by(|x, y| {
            let dx = (theta[x.0] - theta[x.1]).abs();
            let dy = (theta[y.0] - theta[y.1]).abs();
            dx.total_cmp(&dy)
        })
        .unwrap();
    let spread = (theta[p] - theta[q]).abs();
    if spread >= CLUSTER_SPREAD {
        let (tp, tq, tr) = (theta[p], theta[q], theta[r]);
        (dd1(tr, tq) - dd1(tp, tr)) / Complex64::new(0.0, tq - tp)
    } else {
        clustered(theta)
    }
}

/// Series form for nearly coincident nodes:
/// `e^{ic} Σ_k h_k(y)/(k+2)!` with `y = i(θ − c)` and `h_k` the complete
/// homogeneous symmetric polynomials.
fn clustered(theta: [f64; 3]) -> Complex64 {
    let c = (theta[0] + theta[1] + theta[2]) / 3.0;
    let y: Vec<Complex64> = theta.iter().map(|t| Complex64::new(0.0, t - c)).collect();
    let powers: Vec<Vec<Complex64>> = y
        .iter()
        .map(|&yi| {
            let mut p = Vec::with_capacity(CLUSTER_TERMS);
            let mut acc = Complex64::new(1.0, 0.0);
            for _ in 0..CLUSTER_TERMS {
                p.push(acc);
                acc *= yi;
            }
            p
        })
        .collect();
    let mut sum = Complex64::new(0.0, 0.0);
    let mut fact = 2.0; // (k+2)!
    for k in 0..CLUSTER_TERMS {
        let mut h = Complex64::new(0.0, 0.0);
        for i in 0..=k {
            for j in 0..=(k - i) {
                h += powers[0][i] * powers[1][j] * powers[2][k - i - j];
            }
        }
        sum += h / fact;
        fact *= (k + 3) as f64;
    }
    Complex64::from_polar(1.0, c) * sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::GaussLegendre;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn quad_single(a: f64, tau: f64) -> Complex64 {
        let gl = GaussLegendre::new(20);
        gl.integrate_panels(0.0, tau, 64, |s| Complex64::from_polar(1.0, a * s))
    }

    fn quad_double(a: f64, b: f64, tau: f64) -> Complex64 {
        let gl = GaussLegendre::new(16);
        let panels = 8 + (a.abs().max(b.abs()) * tau) as usize;
        gl.integrate_panels(0.0, tau, panels, |t| {
            let inner = gl.integrate_panels(0.0, t, panels, |s| Complex64::from_polar(1.0, b * s));
            Complex64::from_polar(1.0, a * t) * inner
        })
    }

    #[test]
    fn exp_integral_degenerate_and_full_period() {
        assert_eq!(exp_integral(0.0, 2.5), Complex64::new(2.5, 0.0));
        assert!(exp_integral(1.0, 2.0 * PI).norm() < 1e-15);
    }

    #[test]
    fn exp_integral_matches_quadrature() {
        let exact = exp_integral(0.37, 1.9);
        assert!((exact - quad_single(0.37, 1.9)).norm() < 1e-12);
    }

    #[test]
    fn exp_integral_continuous_across_series_switch() {
        // Both branches evaluated at the same phase just below and above the switch.
        let closed = |t: f64| Complex64::new(t.sin() / t, 2.0 * (0.5 * t).sin().powi(2) / t);
        for theta in [SERIES_THRESHOLD * 0.999, SERIES_THRESHOLD * 1.001] {
            assert!((phi1(theta) - closed(theta)).norm() < 1e-12);
            assert!((phi1(-theta) - closed(-theta)).norm() < 1e-12);
        }
        let tau = 3.0;
        let below = exp_integral((SERIES_THRESHOLD * 0.999) / tau, tau);
        let above = exp_integral((SERIES_THRESHOLD * 1.001) / tau, tau);
        // The true change over the gap is about τ·Δθ/2.
        assert!((below - above).norm() < tau * SERIES_THRESHOLD * 0.002);
    }

    #[test]
    fn double_integral_degenerate_values() {
        let tau = 1.7;
        assert!((double_exp_integral(0.0, 0.0, tau) - tau * tau / 2.0).norm() < 1e-14);
        let d = double_exp_integral(1.0, -1.0, 2.0 * PI);
        assert!((d - quad_double(1.0, -1.0, 2.0 * PI)).norm() < 1e-11);
    }

    #[test]
    fn double_integral_branches_agree_with_quadrature() {
        for &(a, b, tau) in &[
            (0.0, 0.8, 2.0),
            (0.8, 0.0, 2.0),
            (0.8, -0.8, 2.0),
            (1e-9, 1e-9, 3.0),
            (0.2, 0.05, 1.0),
            (2.3, -2.3 + 1e-7, 4.0),
            (-3.0, 1.1, 5.5),
        ] {
            let err = (double_exp_integral(a, b, tau) - quad_double(a, b, tau)).norm();
            assert!(err < 1e-10, "a={a} b={b} tau={tau} err={err:e}");
        }
    }

    #[test]
    fn double_integral_continuous_across_cluster_switch() {
        let tau = 1.0;
        let lo = double_exp_integral(0.2, CLUSTER_SPREAD * 0.9999 - 0.2, tau);
        let hi = double_exp_integral(0.2, CLUSTER_SPREAD * 1.0001 - 0.2, tau);
        let mid = quad_double(0.2, CLUSTER_SPREAD - 0.2, tau);
        assert!((lo - mid).norm() < 1e-4 && (hi - mid).norm() < 1e-4);
        assert!((lo - quad_double(0.2, CLUSTER_SPREAD * 0.9999 - 0.2, tau)).norm() < 1e-13);
        assert!((hi - quad_double(0.2, CLUSTER_SPREAD * 1.0001 - 0.2, tau)).norm() < 1e-13);
    }

    #[test]
    fn double_integral_random_sweep_against_quadrature() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let a = rng.random_range(-4.0..4.0);
            let b = rng.random_range(-4.0..4.0);
            let tau = rng.random_range(0.0..4.0);
            worst = worst.max((double_exp_integral(a, b, tau) - quad_double(a, b, tau)).norm());
        }
        assert!(worst <= 1e-10, "worst deviation {worst:e}");
    }

    proptest! {
        #[test]
        fn exp_integral_conjugate_symmetry(a in -20.0f64..20.0, tau in 0.0f64..10.0) {
            let lhs = exp_integral(-a, tau);
            let rhs = exp_integral(a, tau).conj();
            prop_assert!((lhs - rhs).norm() <= 1e-13 * (1.0 + tau));
        }

        #[test]
        fn double_integral_inner_outer_identity(a in -5.0f64..5.0, b in -5.0f64..5.0, tau in 0.01f64..6.0) {
            // D(a,b) + D(b,a) = E(a)E(b) (the two triangles tile the square)
            let lhs = double_exp_integral(a, b, tau) + double_exp_integral(b, a, tau);
            let rhs = exp_integral(a, tau) * exp_integral(b, tau);
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + tau * tau));
        }
    }
}
