//! Recovers the quadrature distribution from the distribution of the rescaled
//! readout `Q_r = Q_θ − P/(√2|β|)`, whose noise kernel is a Gaussian of
//! variance `1/(4|β|²)`.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Histogram density on equally spaced bin centres.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub centers: Vec<f64>,
    pub density: Vec<f64>,
}

impl Histogram {
    pub fn new(centers: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        if centers.len() != density.len() {
            return Err(Error::DimensionMismatch { expected: centers.len(), got: density.len() });
        }
        if centers.len() < 4 {
            return Err(Error::InvalidArgument("histogram needs at least four bins".into()));
        }
        let h = centers[1] - centers[0];
        if !(h > 0.0) || centers.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h.max(1.0)) {
            return Err(Error::InvalidArgument("bin centres must be equally spaced".into()));
        }
        Ok(Self { centers, density })
    }

    /// Normalized histogram of `samples` over `[lo, hi]` with `bins` bins.
    pub fn from_samples(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptySamples);
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0.0; bins];
        for &x in samples {
            let i = ((x - lo) / width).floor();
            if i >= 0.0 && (i as usize) < bins {
                counts[i as usize] += 1.0;
            }
        }
        let norm = samples.len() as f64 * width;
        let centers = (0..bins).map(|i| lo + (i as f64 + 0.5) * width).collect();
        Self::new(centers, counts.into_iter().map(|c| c / norm).collect())
    }

    /// Density evaluated on a uniform grid.
    pub fn from_fn(lo: f64, hi: f64, bins: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let width = (hi - lo) / bins as f64;
        let centers: Vec<f64> = (0..bins).map(|i| lo + (i as f64 + 0.5) * width).collect();
        let density = centers.iter().map(|&x| f(x)).collect();
        Self::new(centers, density)
    }

    pub fn bin_width(&self) -> f64 {
        self.centers[1] - self.centers[0]
    }

    pub fn integral(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width()
    }

    pub fn mean(&self) -> f64 {
        self.centers.iter().zip(&self.density).map(|(x, p)| x * p).sum::<f64>() * self.bin_width() / self.integral()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.centers.iter().zip(&self.density).map(|(x, p)| (x - m).powi(2) * p).sum::<f64>() * self.bin_width()
            / self.integral()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deconvolution {
    pub estimate: Histogram,
    /// Set when the kernel suppresses almost every resolvable frequency, so
    /// the estimate carries little more than the mean.
    pub warning: Option<String>,
}

/// Default Tikhonov weight relative to the unit kernel peak.
pub const DEFAULT_REGULARIZATION: f64 = 1e-8;

/// Fewest frequency bins the regularized inverse must pass before the result
/// is flagged as flat.
const MIN_PASSED_BINS: usize = 3;

/// Wiener-style division `Ĥ K / (K² + λ)` on a zero-padded grid.
pub fn deconvolve_distribution(hist: &Histogram, beta_mag: f64, regularization: f64) -> Result<Deconvolution> {
    if !(beta_mag > 0.0) {
        return Err(Error::InvalidArgument("β magnitude must be positive".into()));
    }
    let n = hist.density.len();
    let len = (2 * n).next_power_of_two();
    let dx = hist.bin_width();
    let sigma2 = 1.0 / (4.0 * beta_mag * beta_mag);

    let mut buf: Vec<Complex64> = hist.density.iter().map(|&p| Complex64::new(p, 0.0)).collect();
    buf.resize(len, Complex64::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);

    let mut passed = 0;
    for (i, v) in buf.iter_mut().enumerate() {
        let freq = if i <= len / 2 { i as f64 } else { i as f64 - len as f64 };
        let k = 2.0 * std::f64::consts::PI * freq / (len as f64 * dx);
        let kernel = (-0.5 * sigma2 * k * k).exp();
        if kernel * kernel > regularization {
            passed += 1;
        }
        *v *= kernel / (kernel * kernel + regularization);
    }
    planner.plan_fft_inverse(len).process(&mut buf);

    let mut density: Vec<f64> = buf[..n].iter().map(|z| z.re / len as f64).collect();
    let total: f64 = density.iter().sum::<f64>() * dx;
    if !(total.abs() > 0.0) {
        return Err(Error::InvalidArgument("histogram has zero mass".into()));
    }
    density.iter_mut().for_each(|p| *p /= total);
    let warning = (passed < MIN_PASSED_BINS).then(|| {
        format!("kernel width {:.3e} leaves only {passed} frequency bins above the regularization floor", sigma2.sqrt())
    });
    Ok(Deconvolution {
        estimate: Histogram::new(hist.centers.clone(), density)?,
        warning,
    })
}

/// Density of `Q_r` for a Gaussian `Q_θ` of the given mean and variance.
pub fn gaussian_density(mean: f64, var: f64) -> impl Fn(f64) -> f64 {
    move |x| (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}
