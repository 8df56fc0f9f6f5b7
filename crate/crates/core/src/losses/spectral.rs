//! Spectrum-domain training objectives with analytic gradients.
//!
//! Every expectation is the arithmetic mean over all grid cells; the L1 norms
//! of the phase terms are mean absolute values.

use ndarray::{s, Array2, ArrayView2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::phase::{anti_wrap, anti_wrap_slope, first_difference, DiffAxis};
use crate::spectral::{ComplexSpectrum, Stft, StftConfig};

fn same_shape(what: &'static str, a: &[usize], b: &[usize]) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::shape(what, a, b))
    }
}

fn mean_of(a: &Array2<f64>) -> f64 {
    a.sum() / a.len() as f64
}

/// Mean squared error between compressed magnitudes; gradient is w.r.t. `pred_c`.
pub fn loss_magnitude(
    target_c: ArrayView2<f64>,
    pred_c: ArrayView2<f64>,
) -> Result<(f64, Array2<f64>)> {
    same_shape("magnitude loss", target_c.shape(), pred_c.shape())?;
    let n = target_c.len() as f64;
    let diff = &target_c - &pred_c;
    let value = diff.iter().map(|d| d * d).sum::<f64>() / n;
    let grad = diff.mapv(|d| -2.0 * d / n);
    Ok((value, grad))
}

/// The three anti-wrapped phase terms and the gradient of their sum.
#[derive(Debug, Clone)]
pub struct PhaseLoss {
    pub ip: f64,
    pub gd: f64,
    pub iaf: f64,
    /// Gradient of `ip + gd + iaf` w.r.t. the predicted phase.
    pub grad: Array2<f64>,
}

impl PhaseLoss {
    pub fn total(&self) -> f64 {
        self.ip + self.gd + self.iaf
    }
}

pub fn loss_phase(target: ArrayView2<f64>, pred: ArrayView2<f64>) -> Result<PhaseLoss> {
    same_shape("phase loss", target.shape(), pred.shape())?;
    let (frames, bins) = target.dim();
    if frames < 2 || bins < 2 {
        return Err(Error::InvalidArgument(format!(
            "phase loss needs at least 2 frames and 2 bins, got {frames}x{bins}"
        )));
    }
    let err = &target - &pred;
    let gd_diff = first_difference(err.view(), DiffAxis::Frequency)?;
    let iaf_diff = first_difference(err.view(), DiffAxis::Time)?;

    let ip = mean_of(&err.mapv(anti_wrap));
    let gd = mean_of(&gd_diff.mapv(anti_wrap));
    let iaf = mean_of(&iaf_diff.mapv(anti_wrap));

    // d(err)/d(pred) = -1, so every slope enters with a minus sign.
    let mut grad = err.mapv(|e| -anti_wrap_slope(e) / err.len() as f64);

    // GD cell (t, f) depends on err[t, f + 1] - err[t, f].
    let gd_slope = gd_diff.mapv(|d| anti_wrap_slope(d) / gd_diff.len() as f64);
    {
        let mut right = grad.slice_mut(s![.., 1..]);
        right -= &gd_slope;
    }
    {
        let mut left = grad.slice_mut(s![.., ..bins - 1]);
        left += &gd_slope;
    }

    let iaf_slope = iaf_diff.mapv(|d| anti_wrap_slope(d) / iaf_diff.len() as f64);
    {
        let mut later = grad.slice_mut(s![1.., ..]);
        later -= &iaf_slope;
    }
    {
        let mut earlier = grad.slice_mut(s![..frames - 1, ..]);
        earlier += &iaf_slope;
    }

    Ok(PhaseLoss { ip, gd, iaf, grad })
}

#[derive(Debug, Clone)]
pub struct ComplexLoss {
    pub value: f64,
    pub grad_mag: Array2<f64>,
    pub grad_phase: Array2<f64>,
}

/// Mean squared error of real parts plus that of imaginary parts between the
/// target and `m · e^{jp}`.
pub fn loss_complex(
    target: ArrayView2<Complex64>,
    pred_mag: ArrayView2<f64>,
    pred_phase: ArrayView2<f64>,
) -> Result<ComplexLoss> {
    same_shape("complex loss", target.shape(), pred_mag.shape())?;
    same_shape("complex loss", target.shape(), pred_phase.shape())?;
    let n = target.len() as f64;
    let mut value = 0.0;
    let mut grad_mag = Array2::zeros(target.dim());
    let mut grad_phase = Array2::zeros(target.dim());
    ndarray::Zip::from(&mut grad_mag)
        .and(&mut grad_phase)
        .and(&target)
        .and(&pred_mag)
        .and(&pred_phase)
        .for_each(|gm, gp, x, &m, &p| {
            let (sin, cos) = p.sin_cos();
            let dr = x.re - m * cos;
            let di = x.im - m * sin;
            value += dr * dr + di * di;
            *gm = -2.0 / n * (dr * cos + di * sin);
            *gp = -2.0 / n * (di * m * cos - dr * m * sin);
        });
    Ok(ComplexLoss {
        value: value / n,
        grad_mag,
        grad_phase,
    })
}

/// Squared distance between `m · e^{jp}` and its consistency projection.
///
/// Value only: the gradient would need the adjoint of the projection.
pub fn loss_consistency(
    pred_mag: ArrayView2<f64>,
    pred_phase: ArrayView2<f64>,
    cfg: &StftConfig,
) -> Result<f64> {
    let engine = Stft::new(cfg)?;
    let spec = ComplexSpectrum::from_polar(pred_mag, pred_phase)?;
    consistency_with(&engine, &spec)
}

pub(crate) fn consistency_with(engine: &Stft, spec: &ComplexSpectrum) -> Result<f64> {
    let bins = engine.config().n_bins();
    if spec.bins() != bins {
        return Err(Error::shape("consistency loss bins", &[bins], &[spec.bins()]));
    }
    let projected = engine.project(spec)?;
    same_shape(
        "consistency projection",
        spec.values().shape(),
        projected.values().shape(),
    )?;
    let residual = spec - &projected;
    Ok(residual.values().iter().map(|c| c.norm_sqr()).sum::<f64>() / spec.values().len() as f64)
}
