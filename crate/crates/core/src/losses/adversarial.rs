//! Metric-discriminator objectives.
//!
//! The discriminator itself is injected: anything that maps a
//! (reference, estimate) pair to a normalized quality score.

use crate::error::{Error, Result};
use crate::waveform::Waveform;

pub trait Discriminator {
    fn score(&self, reference: &Waveform, estimate: &Waveform) -> f64;
}

/// Wraps a quality function and clamps its output to `[0, 1]`.
pub struct QualityOracle<F>(pub F);

impl<F> Discriminator for QualityOracle<F>
where
    F: Fn(&Waveform, &Waveform) -> f64,
{
    fn score(&self, reference: &Waveform, estimate: &Waveform) -> f64 {
        let q = (self.0)(reference, estimate);
        if q.is_nan() {
            0.0
        } else {
            q.clamp(0.0, 1.0)
        }
    }
}

/// Returns one fixed score for every pair.
#[derive(Debug, Clone, Copy)]
pub struct ConstantDiscriminator(pub f64);

impl Discriminator for ConstantDiscriminator {
    fn score(&self, _: &Waveform, _: &Waveform) -> f64 {
        self.0
    }
}

/// Maps a raw PESQ score from `[-0.5, 4.5]` linearly onto `[0, 1]`.
pub fn normalize_pesq(pesq: f64) -> f64 {
    ((pesq + 0.5) / 5.0).clamp(0.0, 1.0)
}

/// `(D(x, x) - 1)² + (D(x, x̂) - Q)²`.
pub fn loss_discriminator<D: Discriminator + ?Sized>(
    d: &D,
    clean: &Waveform,
    estimate: &Waveform,
    quality: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&quality) {
        return Err(Error::QualityOutOfRange(quality));
    }
    let real = d.score(clean, clean) - 1.0;
    let fake = d.score(clean, estimate) - quality;
    Ok(real * real + fake * fake)
}

/// `(D(x, x̂) - 1)²`.
pub fn loss_metric<D: Discriminator + ?Sized>(d: &D, clean: &Waveform, estimate: &Waveform) -> f64 {
    let gap = d.score(clean, estimate) - 1.0;
    gap * gap
}
