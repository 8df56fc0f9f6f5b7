//! Objective metrics and experiment preparation.

use ndarray::{ArrayView2, Axis, Zip};

use crate::error::{Error, Result};
use crate::spectral::MagnitudeSpectrum;
use crate::waveform::Waveform;

/// Magnitudes below this are raised to it before taking logs.
pub const LSD_FLOOR: f64 = 1e-8;

/// Residual-to-target energy ratios at or below this (about 280 dB) are
/// indistinguishable from rounding and reported as `+inf`.
pub const SI_SDR_EXACT_RATIO: f64 = 1e-28;

/// Log-spectral distance in dB: mean over frames of the RMS over bins of
/// `20·log10(X̂/X)`.
pub fn lsd(reference: &MagnitudeSpectrum, estimate: &MagnitudeSpectrum) -> Result<f64> {
    lsd_with_floor(reference.view(), estimate.view(), LSD_FLOOR)
}

pub fn lsd_with_floor(reference: ArrayView2<f64>, estimate: ArrayView2<f64>, floor: f64) -> Result<f64> {
    if reference.shape() != estimate.shape() {
        return Err(Error::shape("lsd inputs", reference.shape(), estimate.shape()));
    }
    if !(floor > 0.0) {
        return Err(Error::InvalidArgument(format!("lsd floor must be positive, got {floor}")));
    }
    let (frames, bins) = reference.dim();
    if frames == 0 || bins == 0 {
        return Err(Error::InvalidArgument("lsd of an empty spectrum".into()));
    }
    let mut total = 0.0;
    for (r, e) in reference.axis_iter(Axis(0)).zip(estimate.axis_iter(Axis(0))) {
        let sq = Zip::from(&r).and(&e).fold(0.0, |acc, &x, &y| {
            let d = 20.0 * (y.max(floor) / x.max(floor)).log10();
            acc + d * d
        });
        total += (sq / bins as f64).sqrt();
    }
    Ok(total / frames as f64)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scale-invariant signal-to-distortion ratio in dB; `+inf` when the estimate
/// is a positive or negative multiple of the reference.
pub fn si_sdr(reference: &Waveform, estimate: &Waveform) -> Result<f64> {
    let (x, y) = (reference.samples(), estimate.samples());
    if x.len() != y.len() {
        return Err(Error::shape("si-sdr inputs", &[x.len()], &[y.len()]));
    }
    let ref_energy = dot(x, x);
    if ref_energy == 0.0 {
        return Err(Error::ZeroEnergy("reference"));
    }
    let alpha = dot(y, x) / ref_energy;
    let target_energy = alpha * alpha * ref_energy;
    let residual: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let e = yi - alpha * xi;
            e * e
        })
        .sum();
    if residual <= target_energy * SI_SDR_EXACT_RATIO {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (target_energy / residual).log10())
}

/// `clean + g·noise` with `g` chosen so the clean-to-scaled-noise energy ratio
/// is `snr_db`. Short noise is tiled, long noise is cropped from the start.
pub fn mix_at_snr(clean: &Waveform, noise: &Waveform, snr_db: f64) -> Result<Waveform> {
    if !snr_db.is_finite() {
        return Err(Error::InvalidArgument(format!("snr must be finite, got {snr_db}")));
    }
    if noise.is_empty() {
        return Err(Error::ZeroEnergy("noise"));
    }
    let fitted: Vec<f64> = noise.samples().iter().copied().cycle().take(clean.len()).collect();
    let clean_energy = clean.energy();
    let noise_energy = dot(&fitted, &fitted);
    if clean_energy == 0.0 {
        return Err(Error::ZeroEnergy("clean"));
    }
    if noise_energy == 0.0 {
        return Err(Error::ZeroEnergy("noise"));
    }
    let g = (clean_energy / (noise_energy * 10f64.powf(snr_db / 10.0))).sqrt();
    let mixed = clean.samples().iter().zip(&fitted).map(|(c, n)| c + g * n).collect();
    Waveform::new(mixed, clean.sample_rate())
}

/// Natural cubic spline through `(knots[i], values[i])` with strictly increasing knots.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    /// Second derivatives at the knots.
    curvature: Vec<f64>,
}

impl CubicSpline {
    pub fn natural(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let n = knots.len();
        if n != values.len() || n < 2 {
            return Err(Error::InvalidArgument(format!(
                "spline needs at least two matching knots and values, got {n} and {}",
                values.len()
            )));
        }
        if knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("spline knots must increase strictly".into()));
        }
        let mut curvature = vec![0.0; n];
        if n > 2 {
            // tridiagonal system for interior second derivatives, Thomas algorithm
            let m = n - 2;
            let mut diag = vec![0.0; m];
            let mut upper = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            for i in 0..m {
                let h0 = knots[i + 1] - knots[i];
                let h1 = knots[i + 2] - knots[i + 1];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0 * ((values[i + 2] - values[i + 1]) / h1 - (values[i + 1] - values[i]) / h0);
            }
            for i in 1..m {
                let lower = knots[i + 1] - knots[i];
                let w = lower / diag[i - 1];
                diag[i] -= w * upper[i - 1];
                rhs[i] -= w * rhs[i - 1];
            }
            curvature[m] = rhs[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                curvature[i + 1] = (rhs[i] - upper[i] * curvature[i + 2]) / diag[i];
            }
        }
        Ok(Self { knots, values, curvature })
    }

    /// Evaluates the spline; outside the knot range the end segments are extended.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.knots.len();
        let i = match self.knots.partition_point(|&k| k <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let h = x1 - x0;
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        let (m0, m1) = (self.curvature[i], self.curvature[i + 1]);
        a * self.values[i]
            + b * self.values[i + 1]
            + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0
    }
}

/// Keeps every `factor`-th sample and spline-interpolates back to the original
/// length and rate.
pub fn prepare_narrowband(w: &Waveform, factor: usize) -> Result<Waveform> {
    if factor != 2 && factor != 4 {
        return Err(Error::UnsupportedFactor(factor));
    }
    let len = w.len();
    if len < 2 * factor {
        return Err(Error::InputTooShort { len, min: 2 * factor - 1 });
    }
    let knots: Vec<f64> = (0..len).step_by(factor).map(|i| i as f64).collect();
    let values: Vec<f64> = w.samples().iter().step_by(factor).copied().collect();
    let spline = CubicSpline::natural(knots, values)?;
    let out = (0..len).map(|i| spline.eval(i as f64)).collect();
    Waveform::new(out, w.sample_rate())
}
