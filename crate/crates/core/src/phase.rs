//! Phase wrapping and phase-derivative operators.

use std::f64::consts::{PI, TAU};

use ndarray::{s, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::spectral::PhaseSpectrum;

/// Distance from `t` to the nearest multiple of 2π, in `[0, π]`.
///
/// `round` breaks ties away from zero; ties only occur at odd multiples of π,
/// where either choice yields π.
#[inline]
pub fn anti_wrap(t: f64) -> f64 {
    (t - TAU * (t / TAU).round()).abs().min(PI)
}

/// Subgradient of [`anti_wrap`]: ±1 on the linear pieces, 0 at the kinks.
#[inline]
pub fn anti_wrap_slope(t: f64) -> f64 {
    let r = t - TAU * (t / TAU).round();
    if r == 0.0 || r.abs() >= PI {
        0.0
    } else {
        r.signum()
    }
}

/// Distance from `t` to the nearest point where [`anti_wrap`] is not differentiable.
pub fn kink_distance(t: f64) -> f64 {
    let r = anti_wrap(t);
    r.min(PI - r)
}

pub fn anti_wrap_grid(t: ArrayView2<f64>) -> Array2<f64> {
    t.mapv(anti_wrap)
}

#[inline]
pub fn wrap_angle(t: f64) -> f64 {
    let r = t - TAU * (t / TAU).round();
    if r <= -PI {
        r + TAU
    } else if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Maps angles into `(-π, π]` without changing them modulo 2π.
pub fn wrap_to_principal(t: ArrayView2<f64>) -> Array2<f64> {
    t.mapv(wrap_angle)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffAxis {
    /// Across bins within a frame: group delay.
    Frequency,
    /// Across frames within a bin: instantaneous angular frequency.
    Time,
}

/// First difference of a phase grid along one axis; that axis shrinks by one.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseDiffSpectrum {
    pub axis: DiffAxis,
    pub values: Array2<f64>,
}

/// `out[i] = grid[i + 1] - grid[i]` along `axis`, with no boundary padding.
pub fn first_difference(grid: ArrayView2<f64>, axis: DiffAxis) -> Result<Array2<f64>> {
    let (t, f) = grid.dim();
    match axis {
        DiffAxis::Frequency => {
            if f < 2 {
                return Err(Error::InvalidArgument(format!(
                    "frequency difference needs at least 2 bins, got {f}"
                )));
            }
            Ok(&grid.slice(s![.., 1..]) - &grid.slice(s![.., ..f - 1]))
        }
        DiffAxis::Time => {
            if t < 2 {
                return Err(Error::InvalidArgument(format!(
                    "time difference needs at least 2 frames, got {t}"
                )));
            }
            Ok(&grid.slice(s![1.., ..]) - &grid.slice(s![..t - 1, ..]))
        }
    }
}

pub fn diff_freq(p: &PhaseSpectrum) -> Result<PhaseDiffSpectrum> {
    Ok(PhaseDiffSpectrum {
        axis: DiffAxis::Frequency,
        values: first_difference(p.view(), DiffAxis::Frequency)?,
    })
}

pub fn diff_time(p: &PhaseSpectrum) -> Result<PhaseDiffSpectrum> {
    Ok(PhaseDiffSpectrum {
        axis: DiffAxis::Time,
        values: first_difference(p.view(), DiffAxis::Time)?,
    })
}

/// Magnitude-weighted mean anti-wrapped phase error, in degrees within `[0, 180]`.
pub fn phase_distance(
    target_mag: ArrayView2<f64>,
    target_phase: ArrayView2<f64>,
    estimate_phase: ArrayView2<f64>,
) -> Result<f64> {
    let dim = target_mag.shape();
    for other in [target_phase.shape(), estimate_phase.shape()] {
        if other != dim {
            return Err(Error::shape("phase distance inputs", dim, other));
        }
    }
    let total: f64 = target_mag.sum();
    if total <= 0.0 {
        return Err(Error::UndefinedWeights);
    }
    let weighted: f64 = ndarray::Zip::from(&target_mag)
        .and(&target_phase)
        .and(&estimate_phase)
        .fold(0.0, |acc, &m, &p, &q| acc + m / total * anti_wrap(p - q));
    Ok(weighted * 180.0 / PI)
}
