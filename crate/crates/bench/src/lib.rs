//! Fixtures shared by the benchmarks.

use mpsenet::synth::{synthesize, SignalKind};
use mpsenet::{PhaseSpectrum, Stft, StftConfig, Waveform};
use mpsenet::spectral::mag_phase;

/// Seeded white noise of `seconds` length.
pub fn noise(seconds: f64, seed: u64) -> Waveform {
    synthesize(SignalKind::Noise, seconds, seed).expect("positive duration")
}

/// Phase spectra of two unrelated noise clips with matching shape.
pub fn phase_pair(seconds: f64) -> (PhaseSpectrum, PhaseSpectrum) {
    let stft = Stft::new(&StftConfig::default()).expect("default config is valid");
    let phase = |seed| mag_phase(&stft.analyze(noise(seconds, seed).samples()).unwrap()).1;
    (phase(1), phase(2))
}
