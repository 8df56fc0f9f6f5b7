//! Waveform ⇄ time–frequency conversion.
//!
//! Frames are centered by default: the signal is reflect-padded by `n_fft / 2`
//! on both sides, so a signal of `L` samples yields `L / hop + 1` frames. The
//! inverse transform overlap-adds windowed frames and divides by the summed
//! squared window, which reconstructs any analysed signal exactly.
//!
//! All arithmetic here is double precision.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Axis};
use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{Error, Result};
use crate::waveform::Waveform;

const COLA_TOLERANCE: f64 = 1e-10;
/// Overlap-add envelope values below this are treated as uncovered samples.
const ENVELOPE_FLOOR: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    /// Periodic Hann, `0.5 - 0.5 cos(2πn / N)`.
    Hann,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StftConfig {
    pub n_fft: usize,
    pub win_length: usize,
    pub hop_length: usize,
    pub window: WindowKind,
    pub center: bool,
    /// Power-law exponent applied to magnitudes before the network.
    pub compression: f64,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            n_fft: 400,
            win_length: 400,
            hop_length: 100,
            window: WindowKind::Hann,
            center: true,
            compression: 0.3,
        }
    }
}

impl StftConfig {
    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Analysis window of length `n_fft`; a shorter window is centered and zero padded.
    pub fn window(&self) -> Vec<f64> {
        let n = self.win_length;
        let core = (0..n).map(|i| match self.window {
            WindowKind::Hann => 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos(),
        });
        let left = (self.n_fft - n) / 2;
        let mut w = vec![0.0; self.n_fft];
        for (slot, v) in w[left..left + n].iter_mut().zip(core) {
            *slot = v;
        }
        w
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_fft < 2 || self.hop_length == 0 {
            return bad(format!(
                "n_fft ({}) must be >= 2 and hop_length ({}) > 0",
                self.n_fft, self.hop_length
            ));
        }
        if !(self.hop_length <= self.win_length && self.win_length <= self.n_fft) {
            return bad(format!(
                "need hop_length <= win_length <= n_fft, got {} / {} / {}",
                self.hop_length, self.win_length, self.n_fft
            ));
        }
        if !(self.compression > 0.0 && self.compression <= 1.0) {
            return bad(format!("compression factor {} outside (0, 1]", self.compression));
        }
        let w = self.window();
        let n = self.win_length;
        let left = (self.n_fft - n) / 2;
        let core = &w[left..left + n];
        // periodic symmetry: w[i] == w[N - i]
        if core.iter().any(|&v| v < 0.0)
            || (1..n).any(|i| (core[i] - core[n - i]).abs() > 1e-12)
        {
            return bad("window must be non-negative and symmetric".into());
        }
        let envelope: Vec<f64> = (0..self.hop_length)
            .map(|phase| {
                w.iter()
                    .skip(phase)
                    .step_by(self.hop_length)
                    .map(|v| v * v)
                    .sum()
            })
            .collect();
        let max = envelope.iter().cloned().fold(f64::MIN, f64::max);
        let min = envelope.iter().cloned().fold(f64::MAX, f64::min);
        if max <= 0.0 || (max - min) / max > COLA_TOLERANCE {
            return bad(format!(
                "squared window does not overlap-add to a constant at hop {}",
                self.hop_length
            ));
        }
        Ok(())
    }

    /// Number of frames produced for a signal of `len` samples.
    pub fn n_frames(&self, len: usize) -> usize {
        if self.center {
            len / self.hop_length + 1
        } else if len < self.n_fft {
            0
        } else {
            (len - self.n_fft) / self.hop_length + 1
        }
    }

    /// Signal length whose analysis gives exactly `frames` frames with no
    /// trailing partial hop.
    pub fn natural_length(&self, frames: usize) -> usize {
        let span = frames.saturating_sub(1) * self.hop_length;
        if self.center {
            span
        } else {
            span + self.n_fft
        }
    }

    /// Constant ratio between two-sided spectral energy and signal energy for
    /// samples covered by the full overlap-add envelope.
    pub fn energy_gain(&self) -> f64 {
        let sq: f64 = self.window().iter().map(|v| v * v).sum();
        self.n_fft as f64 * sq / self.hop_length as f64
    }

    fn min_len(&self) -> usize {
        if self.center {
            self.n_fft / 2 + 1
        } else {
            self.n_fft
        }
    }
}

/// `T × F` complex grid, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum(Array2<Complex64>);

/// `T × F` non-negative grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeSpectrum(Array2<f64>);

/// `T × F` grid of principal-value angles in `(-π, π]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpectrum(Array2<f64>);

impl ComplexSpectrum {
    pub fn new(values: Array2<Complex64>) -> Self {
        Self(values)
    }

    pub fn zeros(frames: usize, bins: usize) -> Self {
        Self(Array2::zeros((frames, bins)))
    }

    /// Builds `m · e^{jp}` elementwise.
    pub fn from_polar(magnitude: ArrayView2<f64>, phase: ArrayView2<f64>) -> Result<Self> {
        if magnitude.dim() != phase.dim() {
            return Err(Error::shape(
                "magnitude/phase",
                &magnitude.shape().to_vec(),
                phase.shape(),
            ));
        }
        let mut out = Array2::zeros(magnitude.dim());
        ndarray::Zip::from(&mut out)
            .and(&magnitude)
            .and(&phase)
            .for_each(|o, &m, &p| *o = Complex64::from_polar(m, p));
        Ok(Self(out))
    }

    pub fn frames(&self) -> usize {
        self.0.nrows()
    }

    pub fn bins(&self) -> usize {
        self.0.ncols()
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.0
    }

    pub fn view(&self) -> ArrayView2<'_, Complex64> {
        self.0.view()
    }

    pub fn into_values(self) -> Array2<Complex64> {
        self.0
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Energy of the implied two-sided spectrum (interior bins counted twice).
    pub fn two_sided_energy(&self, n_fft: usize) -> f64 {
        let nyquist = if n_fft % 2 == 0 { Some(n_fft / 2) } else { None };
        self.0
            .axis_iter(Axis(0))
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(k, c)| {
                        let weight = if k == 0 || Some(k) == nyquist { 1.0 } else { 2.0 };
                        weight * c.norm_sqr()
                    })
                    .sum::<f64>()
            })
            .sum()
    }
}

impl std::ops::Sub for &ComplexSpectrum {
    type Output = ComplexSpectrum;

    fn sub(self, rhs: Self) -> ComplexSpectrum {
        ComplexSpectrum(&self.0 - &rhs.0)
    }
}

impl MagnitudeSpectrum {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if let Some(((frame, bin), &value)) = values
            .indexed_iter()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            if !value.is_finite() {
                return Err(Error::NonFinite("magnitude spectrum"));
            }
            return Err(Error::NegativeMagnitude { frame, bin, value });
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.0
    }

    pub fn dim(&self) -> (usize, usize) {
        self.0.dim()
    }

    pub fn compress(&self, c: f64) -> Result<Self> {
        Ok(Self(compress(self.view(), c)?))
    }

    pub fn decompress(&self, c: f64) -> Result<Self> {
        Ok(Self(decompress(self.view(), c)?))
    }
}

impl PhaseSpectrum {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("phase spectrum"));
        }
        if let Some(v) = values.iter().find(|&&v| !(v > -PI && v <= PI)) {
            return Err(Error::InvalidArgument(format!(
                "phase {v} outside (-pi, pi]"
            )));
        }
        Ok(Self(values))
    }

    /// Wraps arbitrary angles into the principal range.
    pub fn from_angles(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("phase spectrum"));
        }
        Ok(Self(crate::phase::wrap_to_principal(values.view())))
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.0
    }

    pub fn dim(&self) -> (usize, usize) {
        self.0.dim()
    }
}

/// Reusable analysis/synthesis engine for one configuration.
pub struct Stft {
    cfg: StftConfig,
    window: Vec<f64>,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
}

impl std::fmt::Debug for Stft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Stft").field("cfg", &self.cfg).finish()
    }
}

impl Stft {
    pub fn new(cfg: &StftConfig) -> Result<Self> {
        cfg.validate()?;
        let mut planner = RealFftPlanner::<f64>::new();
        Ok(Self {
            window: cfg.window(),
            forward: planner.plan_fft_forward(cfg.n_fft),
            inverse: planner.plan_fft_inverse(cfg.n_fft),
            cfg: cfg.clone(),
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    pub fn analyze(&self, samples: &[f64]) -> Result<ComplexSpectrum> {
        let cfg = &self.cfg;
        if samples.len() < cfg.min_len() {
            return Err(Error::InputTooShort {
                len: samples.len(),
                min: cfg.min_len() - 1,
            });
        }
        let padded;
        let signal: &[f64] = if cfg.center {
            padded = reflect_pad(samples, cfg.n_fft / 2);
            &padded
        } else {
            samples
        };
        Ok(self.frames_of(signal))
    }

    /// Windowed DFT of every hop-spaced frame of `signal`, no padding.
    fn frames_of(&self, signal: &[f64]) -> ComplexSpectrum {
        let cfg = &self.cfg;
        let frames = (signal.len() - cfg.n_fft) / cfg.hop_length + 1;
        let bins = cfg.n_bins();
        let mut out = Array2::zeros((frames, bins));
        let mut frame = self.forward.make_input_vec();
        let mut spectrum = self.forward.make_output_vec();
        let mut scratch = self.forward.make_scratch_vec();
        for (t, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
            let start = t * cfg.hop_length;
            for ((dst, &x), &w) in frame
                .iter_mut()
                .zip(&signal[start..start + cfg.n_fft])
                .zip(&self.window)
            {
                *dst = x * w;
            }
            self.forward
                .process_with_scratch(&mut frame, &mut spectrum, &mut scratch)
                .expect("buffer sizes come from the plan");
            for (dst, &v) in row.iter_mut().zip(&spectrum) {
                *dst = v;
            }
        }
        ComplexSpectrum(out)
    }

    pub fn synthesize(&self, spec: &ComplexSpectrum, out_len: usize) -> Result<Vec<f64>> {
        let cfg = &self.cfg;
        if spec.bins() != cfg.n_bins() {
            return Err(Error::shape(
                "spectrum bins",
                &[cfg.n_bins()],
                &[spec.bins()],
            ));
        }
        let frames = spec.frames();
        if frames == 0 {
            return Ok(vec![0.0; out_len]);
        }
        let acc = self.overlap_add(spec);
        let offset = if cfg.center { cfg.n_fft / 2 } else { 0 };
        let mut out: Vec<f64> = acc.into_iter().skip(offset).take(out_len).collect();
        out.resize(out_len, 0.0);
        Ok(out)
    }

    /// Least-squares frame-domain signal, before any centering crop.
    fn overlap_add(&self, spec: &ComplexSpectrum) -> Vec<f64> {
        let cfg = &self.cfg;
        let frames = spec.frames();
        let total = cfg.n_fft + cfg.hop_length * (frames - 1);
        let mut acc = vec![0.0; total];
        let mut envelope = vec![0.0; total];
        let mut bins = self.inverse.make_input_vec();
        let mut frame = self.inverse.make_output_vec();
        let mut scratch = self.inverse.make_scratch_vec();
        let scale = 1.0 / cfg.n_fft as f64;
        let last = bins.len() - 1;
        for (t, row) in spec.0.axis_iter(Axis(0)).enumerate() {
            for (dst, &v) in bins.iter_mut().zip(row.iter()) {
                *dst = v;
            }
            // a real frame has purely real DC and Nyquist bins
            bins[0].im = 0.0;
            if cfg.n_fft % 2 == 0 {
                bins[last].im = 0.0;
            }
            self.inverse
                .process_with_scratch(&mut bins, &mut frame, &mut scratch)
                .expect("imaginary DC/Nyquist parts are cleared");
            let start = t * cfg.hop_length;
            for (n, (&x, &w)) in frame.iter().zip(&self.window).enumerate() {
                acc[start + n] += x * scale * w;
                envelope[start + n] += w * w;
            }
        }
        for (a, &e) in acc.iter_mut().zip(&envelope) {
            if e > ENVELOPE_FLOOR {
                *a /= e;
            } else {
                *a = 0.0;
            }
        }
        acc
    }

    /// `STFT(iSTFT(S))` taken over the full framed extent, so the STFT of any
    /// waveform is a fixed point.
    pub fn project(&self, spec: &ComplexSpectrum) -> Result<ComplexSpectrum> {
        if spec.bins() != self.cfg.n_bins() {
            return Err(Error::shape("spectrum bins", &[self.cfg.n_bins()], &[spec.bins()]));
        }
        if spec.frames() == 0 {
            return Ok(spec.clone());
        }
        Ok(self.frames_of(&self.overlap_add(spec)))
    }
}

fn reflect_pad(x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len();
    debug_assert!(pad < n);
    let mut out = Vec::with_capacity(n + 2 * pad);
    out.extend((1..=pad).rev().map(|i| x[i]));
    out.extend_from_slice(x);
    out.extend((1..=pad).map(|i| x[n - 1 - i]));
    out
}

pub fn stft(w: &Waveform, cfg: &StftConfig) -> Result<ComplexSpectrum> {
    if w.is_empty() {
        return Err(Error::InputTooShort { len: 0, min: 0 });
    }
    Stft::new(cfg)?.analyze(w.samples())
}

pub fn istft(
    spec: &ComplexSpectrum,
    cfg: &StftConfig,
    out_len: usize,
    sample_rate: u32,
) -> Result<Waveform> {
    Waveform::new(Stft::new(cfg)?.synthesize(spec, out_len)?, sample_rate)
}

pub fn consistency_project(spec: &ComplexSpectrum, cfg: &StftConfig) -> Result<ComplexSpectrum> {
    Stft::new(cfg)?.project(spec)
}

/// Splits a spectrum into magnitude and principal phase; the angle of zero is zero.
pub fn mag_phase(spec: &ComplexSpectrum) -> (MagnitudeSpectrum, PhaseSpectrum) {
    let mag = spec.0.mapv(|c| c.norm());
    let phase = spec.0.mapv(|c| {
        if c.re == 0.0 && c.im == 0.0 {
            0.0
        } else {
            let a = c.im.atan2(c.re);
            // atan2 returns -π for (-x, -0.0)
            if a <= -PI {
                PI
            } else {
                a
            }
        }
    });
    (MagnitudeSpectrum(mag), PhaseSpectrum(phase))
}

fn power_law(m: ArrayView2<f64>, exponent: f64) -> Result<Array2<f64>> {
    if let Some(((frame, bin), &value)) = m.indexed_iter().find(|(_, v)| **v < 0.0) {
        return Err(Error::NegativeMagnitude { frame, bin, value });
    }
    Ok(m.mapv(|v| v.powf(exponent)))
}

fn check_compression(c: f64) -> Result<()> {
    if c > 0.0 && c <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "compression factor {c} outside (0, 1]"
        )))
    }
}

/// Elementwise `M^c`.
pub fn compress(m: ArrayView2<f64>, c: f64) -> Result<Array2<f64>> {
    check_compression(c)?;
    power_law(m, c)
}

/// Elementwise `M^(1/c)`.
pub fn decompress(m: ArrayView2<f64>, c: f64) -> Result<Array2<f64>> {
    check_compression(c)?;
    power_law(m, 1.0 / c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = b.iter().map(|y| y * y).sum();
        (num / den).sqrt()
    }

    /// Direct DFT of one windowed frame, independent of the FFT path.
    fn dft_frame(frame: &[f64], bins: usize) -> Vec<Complex64> {
        let n = frame.len() as f64;
        (0..bins)
            .map(|k| {
                frame
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| {
                        Complex64::from_polar(x, -2.0 * PI * k as f64 * i as f64 / n)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn default_config_is_valid() {
        let cfg = StftConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.n_bins(), 201);
        assert!((cfg.energy_gain() - 600.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_configs() {
        let base = StftConfig::default();
        let cases = [
            StftConfig { hop_length: 500, ..base.clone() },
            StftConfig { win_length: 512, ..base.clone() },
            StftConfig { compression: 0.0, ..base.clone() },
            StftConfig { compression: 1.5, ..base.clone() },
            // squared Hann is not COLA at 50% overlap
            StftConfig { hop_length: 200, ..base.clone() },
        ];
        for cfg in cases {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn frame_counts() {
        let cfg = StftConfig::default();
        let zero = Waveform::zeros(32000, 16000).unwrap();
        let spec = stft(&zero, &cfg).unwrap();
        assert_eq!((spec.frames(), spec.bins()), (321, 201));
        assert!(spec.values().iter().all(|c| c.norm() == 0.0));

        let spec = stft(&Waveform::new(noise(16000, 1), 16000).unwrap(), &cfg).unwrap();
        assert_eq!(spec.frames(), 16000 / 100 + 1);
        for len in [201, 399, 1600, 1601, 12345] {
            assert_eq!(cfg.n_frames(len), len / 100 + 1);
        }
    }

    #[test]
    fn too_short_input() {
        let cfg = StftConfig::default();
        let err = stft(&Waveform::new(vec![0.1; 200], 16000).unwrap(), &cfg).unwrap_err();
        assert!(err.to_string().contains("input too short"));
        assert!(stft(&Waveform::zeros(0, 16000).unwrap(), &cfg).is_err());
        assert!(stft(&Waveform::zeros(201, 16000).unwrap(), &cfg).is_ok());
    }

    #[test]
    fn matches_direct_dft_on_interior_frame() {
        let cfg = StftConfig::default();
        let samples: Vec<f64> = (0..16000)
            .map(|i| (2.0 * PI * 400.0 * i as f64 / 16000.0).cos())
            .collect();
        let spec = Stft::new(&cfg).unwrap().analyze(&samples).unwrap();
        let t = 40;
        // frame t covers original samples [t*hop - n_fft/2, t*hop + n_fft/2)
        let start = t * 100 - 200;
        let window = cfg.window();
        let frame: Vec<f64> = samples[start..start + 400]
            .iter()
            .zip(&window)
            .map(|(x, w)| x * w)
            .collect();
        let oracle = dft_frame(&frame, 201);
        let row = spec.values().row(t);
        for (a, b) in row.iter().zip(&oracle) {
            assert!((a - b).norm() < 1e-9);
        }
        let mags: Vec<f64> = row.iter().map(|c| c.norm()).collect();
        let peak = mags
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(peak, 10);
        let far = mags[15..].iter().cloned().fold(0.0, f64::max);
        assert!(20.0 * (mags[10] / far).log10() >= 40.0);
    }

    #[test]
    fn roundtrip_and_zero() {
        let cfg = StftConfig::default();
        let engine = Stft::new(&cfg).unwrap();
        let x = noise(32000, 7);
        let y = engine.synthesize(&engine.analyze(&x).unwrap(), x.len()).unwrap();
        assert!(rel_err(&y, &x) < 1e-10);

        let zero = ComplexSpectrum::zeros(20, 201);
        assert!(engine.synthesize(&zero, 1900).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn roundtrip_uncentered() {
        let cfg = StftConfig {
            center: false,
            ..StftConfig::default()
        };
        let engine = Stft::new(&cfg).unwrap();
        let x = noise(4000, 3);
        let y = engine.synthesize(&engine.analyze(&x).unwrap(), x.len()).unwrap();
        // samples in the first and last partial hops have nonzero envelope too
        assert!(rel_err(&y[1..], &x[1..]) < 1e-10);
    }

    #[test]
    fn single_frame_inverse_matches_windowed_segment() {
        let cfg = StftConfig {
            center: false,
            ..StftConfig::default()
        };
        let engine = Stft::new(&cfg).unwrap();
        let window = cfg.window();
        let seg: Vec<f64> = (0..400)
            .map(|i| (2.0 * PI * 7.0 * i as f64 / 400.0).cos())
            .collect();
        let windowed: Vec<f64> = seg.iter().zip(&window).map(|(x, w)| x * w).collect();
        let spec = ComplexSpectrum::new(
            Array2::from_shape_vec((1, 201), dft_frame(&windowed, 201)).unwrap(),
        );
        let out = engine.synthesize(&spec, 400).unwrap();
        // a lone frame is divided by w², giving the segment back where w > 0;
        // re-applying the window recovers the windowed cosine everywhere
        for i in 0..400 {
            assert!((out[i] * window[i] * window[i] - windowed[i] * window[i]).abs() < 1e-10);
            if window[i] > 1e-3 {
                assert!((out[i] - seg[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn synthesize_checks_bins() {
        let engine = Stft::new(&StftConfig::default()).unwrap();
        assert!(engine.synthesize(&ComplexSpectrum::zeros(4, 200), 100).is_err());
    }

    #[test]
    fn synthesize_pads_output() {
        let engine = Stft::new(&StftConfig::default()).unwrap();
        let x = noise(1000, 9);
        let spec = engine.analyze(&x).unwrap();
        let y = engine.synthesize(&spec, 1500).unwrap();
        assert_eq!(y.len(), 1500);
        assert!(y[1200..].iter().all(|&v| v == 0.0));
        assert!(y[1100..1200].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn projection_fixed_points_and_idempotence() {
        let cfg = StftConfig::default();
        let engine = Stft::new(&cfg).unwrap();
        for len in [4000, 4037, 1999] {
            let s = engine.analyze(&noise(len, 11)).unwrap();
            let p = engine.project(&s).unwrap();
            assert!((&p - &s).frobenius_norm() / s.frobenius_norm() < 1e-10, "len {len}");
        }

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let random = ComplexSpectrum::new(Array2::from_shape_fn((41, 201), |_| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        }));
        let once = engine.project(&random).unwrap();
        let twice = engine.project(&once).unwrap();
        assert!((&twice - &once).frobenius_norm() / once.frobenius_norm() < 1e-9);

        let zero = ComplexSpectrum::zeros(41, 201);
        assert_eq!(engine.project(&zero).unwrap(), zero);
    }

    #[test]
    fn mag_phase_conventions() {
        let spec = ComplexSpectrum::new(array![[
            Complex64::new(0.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(3.0, 4.0),
            Complex64::new(-1.0, -0.0)
        ]]);
        let (m, p) = mag_phase(&spec);
        assert_eq!(m.values().row(0).to_vec(), vec![0.0, 1.0, 5.0, 1.0]);
        assert_eq!(p.values()[[0, 0]], 0.0);
        assert_eq!(p.values()[[0, 1]], PI);
        // atan2(4, 3) to 20 digits: 0.92729521800161223243
        assert!((p.values()[[0, 2]] - 0.927_295_218_001_612_2).abs() < 1e-15);
        assert_eq!(p.values()[[0, 3]], PI);
    }

    #[test]
    fn compression_values() {
        let m = array![[0.0, 1.0, 100.0]];
        let c = compress(m.view(), 0.3).unwrap();
        assert_eq!(c[[0, 0]], 0.0);
        assert_eq!(c[[0, 1]], 1.0);
        // 100^0.3 = 10^0.6 = 3.98107170553497250770
        assert!((c[[0, 2]] - 3.981_071_705_534_972_5).abs() < 1e-14);
        let back = decompress(c.view(), 0.3).unwrap();
        assert!((back[[0, 2]] - 100.0).abs() / 100.0 < 1e-12);
        assert!((decompress(array![[3.98107]].view(), 0.3).unwrap()[[0, 0]] - 100.0).abs() < 1e-3);
        assert_eq!(compress(m.view(), 1.0).unwrap(), m);
        assert!(matches!(
            compress(array![[1.0, -0.5]].view(), 0.3),
            Err(Error::NegativeMagnitude { bin: 1, .. })
        ));
        assert!(compress(m.view(), 0.0).is_err());
    }

    #[test]
    fn typed_spectra_validate() {
        assert!(MagnitudeSpectrum::new(array![[1.0, -1.0]]).is_err());
        assert!(MagnitudeSpectrum::new(array![[1.0, f64::NAN]]).is_err());
        assert!(PhaseSpectrum::new(array![[-PI]]).is_err());
        assert!(PhaseSpectrum::new(array![[PI]]).is_ok());
        let wrapped = PhaseSpectrum::from_angles(array![[3.0 * PI / 2.0]]).unwrap();
        assert!((wrapped.values()[[0, 0]] + PI / 2.0).abs() < 1e-12);
    }
}
