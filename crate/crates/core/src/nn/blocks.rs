//! Encoder and decoder stages.

use ndarray::{ArrayView1, ArrayView4};

use crate::error::Result;
use crate::nn::config::{ModelConfig, TaskHead};
use crate::nn::layers::{
    conv2d, crop_freq, instance_norm, lsigmoid, pixel_shuffle_freq, prelu, ConvGeometry,
};
use crate::nn::tensor::FeatureMap;
use crate::nn::weights::WeightStore;

#[derive(Debug, Clone, Copy)]
pub struct ConvBlockWeights<'a> {
    pub conv_weight: ArrayView4<'a, f32>,
    pub conv_bias: ArrayView1<'a, f32>,
    pub norm_weight: ArrayView1<'a, f32>,
    pub norm_bias: ArrayView1<'a, f32>,
    pub slope: ArrayView1<'a, f32>,
}

impl<'a> ConvBlockWeights<'a> {
    pub fn from_store(store: &'a WeightStore, prefix: &str) -> Result<Self> {
        Ok(Self {
            conv_weight: store.view4(&format!("{prefix}.conv.weight"))?,
            conv_bias: store.view1(&format!("{prefix}.conv.bias"))?,
            norm_weight: store.view1(&format!("{prefix}.norm.weight"))?,
            norm_bias: store.view1(&format!("{prefix}.norm.bias"))?,
            slope: store.view1(&format!("{prefix}.act.slope"))?,
        })
    }
}

/// Convolution, instance norm, PReLU.
pub fn conv_block(x: &FeatureMap, w: &ConvBlockWeights<'_>, geom: ConvGeometry) -> Result<FeatureMap> {
    let y = conv2d(x, w.conv_weight, w.conv_bias, geom)?;
    let y = instance_norm(&y, w.norm_weight, w.norm_bias)?;
    prelu(&y, w.slope)
}

fn dense_geometry(dilation: usize) -> ConvGeometry {
    ConvGeometry {
        stride: (1, 1),
        dilation: (dilation, 1),
        padding: (dilation, 1),
    }
}

/// Densely connected 3×3 stages; stage `i` sees the input and every earlier
/// stage's output and is dilated by `dilations[i]` along time.
pub fn dilated_densenet(
    x: &FeatureMap,
    stages: &[ConvBlockWeights<'_>],
    dilations: &[usize],
) -> Result<FeatureMap> {
    assert_eq!(stages.len(), dilations.len(), "one dilation per stage");
    let mut skip = x.clone();
    let mut out = x.clone();
    for (i, (w, &d)) in stages.iter().zip(dilations).enumerate() {
        out = conv_block(&skip, w, dense_geometry(d))?;
        if i + 1 < stages.len() {
            skip = FeatureMap::concat_channels(&[&skip, &out])?;
        }
    }
    Ok(out)
}

fn dense_weights<'a>(store: &'a WeightStore, prefix: &str, n: usize) -> Result<Vec<ConvBlockWeights<'a>>> {
    (0..n)
        .map(|i| ConvBlockWeights::from_store(store, &format!("{prefix}.{i}")))
        .collect()
}

const FREQ_KERNEL: ConvGeometry = ConvGeometry {
    stride: (1, 1),
    dilation: (1, 1),
    padding: (0, 1),
};

/// `(B, 2, T, F)` → `(B, C, T, F/2 + 1)`.
pub fn encoder(x: &FeatureMap, store: &WeightStore, cfg: &ModelConfig) -> Result<FeatureMap> {
    let input = ConvBlockWeights::from_store(store, "encoder.input")?;
    let y = conv_block(x, &input, FREQ_KERNEL)?;
    let dense = dense_weights(store, "encoder.dense", cfg.dense_dilations.len())?;
    let y = dilated_densenet(&y, &dense, &cfg.dense_dilations)?;
    let reduce = ConvBlockWeights::from_store(store, "encoder.reduce")?;
    conv_block(&y, &reduce, ConvGeometry { stride: (1, 2), ..FREQ_KERNEL })
}

/// Dense block, then sub-pixel upsampling back to `F` bins with norm and PReLU.
fn decoder_trunk(x: &FeatureMap, store: &WeightStore, cfg: &ModelConfig, prefix: &str) -> Result<FeatureMap> {
    let dense = dense_weights(store, &format!("{prefix}.dense"), cfg.dense_dilations.len())?;
    let y = dilated_densenet(x, &dense, &cfg.dense_dilations)?;
    let up = ConvBlockWeights::from_store(store, &format!("{prefix}.upsample"))?;
    let y = conv2d(&y, up.conv_weight, up.conv_bias, FREQ_KERNEL)?;
    let y = crop_freq(&pixel_shuffle_freq(&y, 2)?, cfg.freq_bins)?;
    let y = instance_norm(&y, up.norm_weight, up.norm_bias)?;
    prelu(&y, up.slope)
}

/// Mask `(B, 1, T, F)`, before it multiplies the compressed noisy magnitude.
pub fn mask_decoder(x: &FeatureMap, store: &WeightStore, cfg: &ModelConfig) -> Result<FeatureMap> {
    let y = decoder_trunk(x, store, cfg, "mask_decoder")?;
    let y = conv2d(
        &y,
        store.view4("mask_decoder.head.weight")?,
        store.view1("mask_decoder.head.bias")?,
        ConvGeometry::default(),
    )?;
    match cfg.task_head {
        TaskHead::BoundedMask => lsigmoid(&y, store.view1("mask_decoder.lsigmoid.alpha")?, cfg.beta),
        TaskHead::UnboundedMask => prelu(&y, store.view1("mask_decoder.activation.slope")?),
    }
}

/// Pseudo-real and pseudo-imaginary parts, each `(B, 1, T, F)`.
pub fn phase_decoder(
    x: &FeatureMap,
    store: &WeightStore,
    cfg: &ModelConfig,
) -> Result<(FeatureMap, FeatureMap)> {
    let y = decoder_trunk(x, store, cfg, "phase_decoder")?;
    let head = |name: &str| -> Result<FeatureMap> {
        conv2d(
            &y,
            store.view4(&format!("phase_decoder.{name}.weight"))?,
            store.view1(&format!("phase_decoder.{name}.bias"))?,
            ConvGeometry::default(),
        )
    };
    Ok((head("real")?, head("imag")?))
}
