use ndarray::{s, Array2, Array4, ArrayView2};

use crate::error::{Error, Result};
use crate::nn::blocks::{encoder, mask_decoder, phase_decoder};
use crate::nn::config::ModelConfig;
use crate::nn::tensor::FeatureMap;
use crate::nn::transformer::{tf_transformer_block, TransformerWeights};
use crate::nn::weights::WeightStore;
use crate::spectral::{mag_phase, ComplexSpectrum, PhaseSpectrum, Stft};
use crate::waveform::Waveform;

/// Network outputs for one utterance, in the compressed-magnitude domain.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkOutput {
    pub mask: Array2<f64>,
    /// `mask ⊙ Ym^c`.
    pub magnitude_c: Array2<f64>,
    pub phase: PhaseSpectrum,
}

/// Result of running the full waveform pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Enhanced {
    pub waveform: Waveform,
    /// Compressed magnitude of the loudness-normalised estimate, after clamping at zero.
    pub magnitude_c: Array2<f64>,
    pub phase: PhaseSpectrum,
}

#[derive(Debug, Clone)]
pub struct MpSeNet {
    cfg: ModelConfig,
    weights: WeightStore,
}

/// `atan2` with the origin mapped to 0 and `-π` mapped to `π`.
fn principal_angle(im: f64, re: f64) -> f64 {
    if im == 0.0 && re == 0.0 {
        return 0.0;
    }
    let a = im.atan2(re);
    if a <= -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        a
    }
}

impl MpSeNet {
    pub fn new(cfg: ModelConfig, weights: WeightStore) -> Result<Self> {
        weights.check_against(&cfg)?;
        Ok(Self { cfg, weights })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn weights(&self) -> &WeightStore {
        &self.weights
    }

    /// Runs the network on a batch of `(Ym^c, Yp)` pairs of identical shape `(T, F)`.
    pub fn predict(&self, inputs: &[(ArrayView2<f64>, ArrayView2<f64>)]) -> Result<Vec<NetworkOutput>> {
        let Some(first) = inputs.first() else {
            return Ok(Vec::new());
        };
        let (t, f) = first.0.dim();
        if f != self.cfg.freq_bins {
            return Err(Error::shape("network input", &[t, self.cfg.freq_bins], &[t, f]));
        }
        for (m, p) in inputs {
            if m.dim() != (t, f) || p.dim() != (t, f) {
                return Err(Error::shape("network input", &[t, f], m.shape()));
            }
        }
        let b = inputs.len();
        let mut x = Array4::<f32>::zeros((b, 2, t, f));
        for (i, (m, p)) in inputs.iter().enumerate() {
            x.slice_mut(s![i, 0, .., ..]).assign(&m.mapv(|v| v as f32));
            x.slice_mut(s![i, 1, .., ..]).assign(&p.mapv(|v| v as f32));
        }
        let x = FeatureMap::new(x)?;

        let mut h = encoder(&x, &self.weights, &self.cfg)?;
        for n in 0..self.cfg.n_blocks {
            let tw = TransformerWeights::from_store(&self.weights, &format!("blocks.{n}.time"))?;
            let fw = TransformerWeights::from_store(&self.weights, &format!("blocks.{n}.freq"))?;
            h = tf_transformer_block(&h, &tw, &fw, self.cfg.n_heads)?;
        }
        let mask = mask_decoder(&h, &self.weights, &self.cfg)?;
        let (re, im) = phase_decoder(&h, &self.weights, &self.cfg)?;

        inputs
            .iter()
            .enumerate()
            .map(|(i, (m, _))| {
                let mask_i = mask.data().slice(s![i, 0, .., ..]).mapv(|v| v as f64);
                let magnitude_c = &mask_i * m;
                let re_i = re.data().slice(s![i, 0, .., ..]);
                let im_i = im.data().slice(s![i, 0, .., ..]);
                let phase = Array2::from_shape_fn((t, f), |ix| {
                    principal_angle(im_i[ix] as f64, re_i[ix] as f64)
                });
                Ok(NetworkOutput {
                    mask: mask_i,
                    magnitude_c,
                    phase: PhaseSpectrum::new(phase)?,
                })
            })
            .collect()
    }

    /// Enhances one waveform.
    pub fn forward(&self, noisy: &Waveform, stft: &Stft) -> Result<Enhanced> {
        let mut out = self.forward_batch(std::slice::from_ref(noisy), stft)?;
        Ok(out.remove(0))
    }

    /// Enhances equal-length waveforms in a single network pass.
    pub fn forward_batch(&self, noisy: &[Waveform], stft: &Stft) -> Result<Vec<Enhanced>> {
        enhance_batch_with(noisy, stft, |items| {
            let views: Vec<_> = items.iter().map(|(m, p)| (m.view(), p.view())).collect();
            Ok(self
                .predict(&views)?
                .into_iter()
                .map(|o| (o.magnitude_c, o.phase))
                .collect())
        })
    }
}

/// The waveform pipeline around an arbitrary spectral estimator: loudness
/// normalisation, analysis, compression, `net`, decompression, synthesis to
/// the input length and de-normalisation.
pub fn enhance_with<F>(noisy: &Waveform, stft: &Stft, net: F) -> Result<Enhanced>
where
    F: FnOnce(&Array2<f64>, &PhaseSpectrum) -> Result<(Array2<f64>, PhaseSpectrum)>,
{
    let mut out = enhance_batch_with(std::slice::from_ref(noisy), stft, |items| {
        let (m, p) = &items[0];
        Ok(vec![net(m, p)?])
    })?;
    Ok(out.remove(0))
}

pub fn enhance_batch_with<F>(noisy: &[Waveform], stft: &Stft, net: F) -> Result<Vec<Enhanced>>
where
    F: FnOnce(&[(Array2<f64>, PhaseSpectrum)]) -> Result<Vec<(Array2<f64>, PhaseSpectrum)>>,
{
    let Some(first) = noisy.first() else {
        return Ok(Vec::new());
    };
    if let Some(w) = noisy.iter().find(|w| w.len() != first.len()) {
        return Err(Error::shape("batch waveform", &[first.len()], &[w.len()]));
    }
    let c = stft.config().compression;
    let mut gains = Vec::with_capacity(noisy.len());
    let mut items = Vec::with_capacity(noisy.len());
    for w in noisy {
        let rms = w.rms();
        let gain = if rms > 0.0 { 1.0 / rms } else { 1.0 };
        let scaled: Vec<f64> = w.samples().iter().map(|v| v * gain).collect();
        let (mag, phase) = mag_phase(&stft.analyze(&scaled)?);
        items.push((mag.compress(c)?.into_values(), phase));
        gains.push(gain);
    }
    let estimates = net(&items)?;
    if estimates.len() != items.len() {
        return Err(Error::shape("estimator output", &[items.len()], &[estimates.len()]));
    }
    estimates
        .into_iter()
        .zip(gains)
        .zip(noisy)
        .zip(&items)
        .map(|(((est, gain), w), (ym, _))| {
            let (mag_c, phase) = est;
            if mag_c.dim() != ym.dim() || phase.dim() != ym.dim() {
                return Err(Error::shape("estimator output", ym.shape(), mag_c.shape()));
            }
            if mag_c.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("estimated magnitude"));
            }
            let magnitude_c = mag_c.mapv(|v| v.max(0.0));
            let mag = crate::spectral::decompress(magnitude_c.view(), c)?;
            let spec = ComplexSpectrum::from_polar(mag.view(), phase.view())?;
            let samples = stft
                .synthesize(&spec, w.len())?
                .into_iter()
                .map(|v| v / gain)
                .collect();
            Ok(Enhanced {
                waveform: Waveform::new(samples, w.sample_rate())?,
                magnitude_c,
                phase,
            })
        })
        .collect()
}
