//! Dormand–Prince 5(4) integrator for complex linear systems.

use num_complex::Complex64;

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Integrates `y' = f(t, y)` from `t0` to `t1`, writing the derivative into the
/// third argument of `f`.
pub fn dopri5<F>(mut y: Vec<Complex64>, t0: f64, t1: f64, tol: Tolerances, mut f: F) -> Vec<Complex64>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    let n = y.len();
    let mut k: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); n]; 7];
    let mut stage = vec![Complex64::new(0.0, 0.0); n];
    let mut y5 = vec![Complex64::new(0.0, 0.0); n];
    let span = t1 - t0;
    let mut t = t0;
    let mut h = span / 100.0;
    f(t, &y, &mut k[0]);
    while t < t1 {
        if t + h > t1 {
            h = t1 - t;
        }
        for s in 1..7 {
            for i in 0..n {
                let mut acc = y[i];
                for (j, a) in A[s][..s].iter().enumerate() {
                    if *a != 0.0 {
                        acc += k[j][i] * (h * a);
                    }
                }
                stage[i] = acc;
            }
            f(t + C[s] * h, &stage, &mut k[s]);
            if s == 6 {
                y5.copy_from_slice(&stage);
            }
        }
        let mut err = 0.0f64;
        for i in 0..n {
            let mut e = Complex64::new(0.0, 0.0);
            for s in 0..7 {
                e += k[s][i] * (A[6].get(s).copied().unwrap_or(0.0) - B4[s]);
            }
            let scale = tol.atol + tol.rtol * y[i].norm().max(y5[i].norm());
            err = err.max((e * h).norm() / scale);
        }
        if err <= 1.0 {
            t += h;
            y.copy_from_slice(&y5);
            k.swap(0, 6);
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h.abs() < 1e-14 * span.abs().max(1.0) {
            h = 1e-14 * span.abs().max(1.0);
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_rotation() {
        // y' = -i ω y
        let omega = 3.7;
        let tol = Tolerances { rtol: 1e-11, atol: 1e-13 };
        let y = dopri5(vec![Complex64::new(1.0, 0.0)], 0.0, 5.0, tol, |_, y, dy| {
            dy[0] = Complex64::new(0.0, -omega) * y[0];
        });
        let exact = Complex64::from_polar(1.0, -omega * 5.0);
        assert!((y[0] - exact).norm() < 1e-9);
    }

    #[test]
    fn time_dependent_forcing() {
        // y' = cos t, y(0)=0 -> sin t
        let tol = Tolerances { rtol: 1e-11, atol: 1e-13 };
        let y = dopri5(vec![Complex64::new(0.0, 0.0)], 0.0, 2.0, tol, |t, _, dy| {
            dy[0] = Complex64::new(t.cos(), 0.0);
        });
        assert!((y[0].re - 2.0f64.sin()).abs() < 1e-10);
    }
}
