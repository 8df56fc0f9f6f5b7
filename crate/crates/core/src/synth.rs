//! Deterministic fixture signals.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::waveform::{Waveform, SAMPLE_RATE};

pub const TONE_HZ: f64 = 440.0;
pub const AMPLITUDE: f64 = 0.5;
pub const NOISE_STD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    Tone,
    /// Linear chirp from 0 Hz to Nyquist.
    Sweep,
    /// White Gaussian noise.
    Noise,
}

fn sample_count(seconds: f64) -> Result<usize> {
    if !(seconds.is_finite() && seconds > 0.0) {
        return Err(Error::InvalidArgument(format!("duration must be positive, got {seconds}")));
    }
    Ok((seconds * SAMPLE_RATE as f64).round() as usize)
}

/// Instantaneous frequency of the sweep at time `t` for a sweep of `duration` seconds.
pub fn sweep_frequency(t: f64, duration: f64) -> f64 {
    SAMPLE_RATE as f64 / 2.0 * t / duration
}

pub fn synthesize(kind: SignalKind, seconds: f64, seed: u64) -> Result<Waveform> {
    let n = sample_count(seconds)?;
    let fs = SAMPLE_RATE as f64;
    let samples: Vec<f64> = match kind {
        SignalKind::Tone => (0..n)
            .map(|i| AMPLITUDE * (2.0 * PI * TONE_HZ * i as f64 / fs).sin())
            .collect(),
        SignalKind::Sweep => {
            let rate = fs / 2.0 / seconds;
            (0..n)
                .map(|i| {
                    let t = i as f64 / fs;
                    AMPLITUDE * (PI * rate * t * t).sin()
                })
                .collect()
        }
        SignalKind::Noise => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal = Normal::new(0.0, NOISE_STD).expect("positive deviation");
            (0..n).map(|_| normal.sample(&mut rng)).collect()
        }
    };
    Waveform::new(samples, SAMPLE_RATE)
}
