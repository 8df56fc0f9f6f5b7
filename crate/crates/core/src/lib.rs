//! Parallel magnitude and phase speech enhancement: STFT front end,
//! anti-wrapping phase losses, the inference graph and evaluation metrics.

pub mod analysis;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod nn;
pub mod phase;
pub mod spectral;
pub mod sweep;
pub mod synth;
pub mod verify;
pub mod wav;
pub mod waveform;

pub use analysis::{analyze_pair, AnalysisReport};
pub use error::{Error, Result};
pub use losses::{LossReport, LossWeights};
pub use metrics::{lsd, mix_at_snr, prepare_narrowband, si_sdr};
pub use nn::{
    enhance_with, init_random, load_weights, save_weights, Enhanced, FeatureMap, ModelConfig,
    MpSeNet, TaskHead, WeightError, WeightStore,
};
pub use phase::{anti_wrap, phase_distance, PhaseDiffSpectrum};
pub use spectral::{ComplexSpectrum, MagnitudeSpectrum, PhaseSpectrum, Stft, StftConfig};
pub use sweep::{SnrSweepSpec, SweepRow};
pub use waveform::{Waveform, SAMPLE_RATE};
