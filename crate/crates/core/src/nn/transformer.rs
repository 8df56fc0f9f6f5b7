//! Pre-norm transformer layers with a bidirectional-GRU feed-forward, and the
//! two-stage time/frequency block built from them.

use ndarray::{Array3, ArrayView1, ArrayView2, ArrayView3};

use crate::error::{Error, Result};
use crate::nn::attention::{mhsa, AttentionWeights};
use crate::nn::layers::{layer_norm, linear};
use crate::nn::recurrent::{bigru, GruWeights};
use crate::nn::tensor::FeatureMap;
use crate::nn::weights::WeightStore;

#[derive(Debug, Clone, Copy)]
pub struct TransformerWeights<'a> {
    pub norm1_weight: ArrayView1<'a, f32>,
    pub norm1_bias: ArrayView1<'a, f32>,
    pub attn: AttentionWeights<'a>,
    pub norm2_weight: ArrayView1<'a, f32>,
    pub norm2_bias: ArrayView1<'a, f32>,
    pub gru_forward: GruWeights<'a>,
    pub gru_backward: GruWeights<'a>,
    /// `(D, 2D)`
    pub ffn_weight: ArrayView2<'a, f32>,
    pub ffn_bias: ArrayView1<'a, f32>,
}

impl<'a> TransformerWeights<'a> {
    pub fn from_store(store: &'a WeightStore, prefix: &str) -> Result<Self> {
        let v1 = |name: &str| store.view1(&format!("{prefix}.{name}"));
        let v2 = |name: &str| store.view2(&format!("{prefix}.{name}"));
        let gru = |dir: &str| -> Result<GruWeights<'a>> {
            Ok(GruWeights {
                w_ih: store.view2(&format!("{prefix}.gru.{dir}.weight_ih"))?,
                w_hh: store.view2(&format!("{prefix}.gru.{dir}.weight_hh"))?,
                b_ih: store.view1(&format!("{prefix}.gru.{dir}.bias_ih"))?,
                b_hh: store.view1(&format!("{prefix}.gru.{dir}.bias_hh"))?,
            })
        };
        Ok(Self {
            norm1_weight: v1("norm1.weight")?,
            norm1_bias: v1("norm1.bias")?,
            attn: AttentionWeights {
                in_proj_weight: v2("attn.in_proj.weight")?,
                in_proj_bias: v1("attn.in_proj.bias")?,
                out_proj_weight: v2("attn.out_proj.weight")?,
                out_proj_bias: v1("attn.out_proj.bias")?,
            },
            norm2_weight: v1("norm2.weight")?,
            norm2_bias: v1("norm2.bias")?,
            gru_forward: gru("forward")?,
            gru_backward: gru("backward")?,
            ffn_weight: v2("ffn.weight")?,
            ffn_bias: v1("ffn.bias")?,
        })
    }
}

fn flatten(x: ArrayView3<f32>) -> ndarray::Array2<f32> {
    let (n, l, d) = x.dim();
    x.as_standard_layout()
        .into_owned()
        .into_shape_with_order((n * l, d))
        .expect("standard layout")
}

/// `y1 = x + MHSA(LN(x))`, `y = y1 + W·ReLU(BiGRU(LN(y1)))` over `(N, L, D)`.
pub fn transformer_layer(
    x: ArrayView3<f32>,
    w: &TransformerWeights<'_>,
    heads: usize,
) -> Result<Array3<f32>> {
    let (n, l, d) = x.dim();
    if w.ffn_weight.dim() != (d, 2 * d) {
        return Err(Error::shape("ffn weight", &[d, 2 * d], w.ffn_weight.shape()));
    }
    let flat = flatten(x);
    let normed = layer_norm(flat.view(), w.norm1_weight, w.norm1_bias)?
        .into_shape_with_order((n, l, d))
        .expect("same element count");
    let y1 = mhsa(normed.view(), w.attn, heads)? + x;

    let normed = layer_norm(flatten(y1.view()).view(), w.norm2_weight, w.norm2_bias)?
        .into_shape_with_order((n, l, d))
        .expect("same element count");
    let mut rec = bigru(normed.view(), w.gru_forward, w.gru_backward)?;
    rec.mapv_inplace(|v| v.max(0.0));
    let ffn = linear(flatten(rec.view()).view(), w.ffn_weight, w.ffn_bias)?
        .into_shape_with_order((n, l, d))
        .expect("same element count");
    Ok(y1 + ffn)
}

/// Time-axis layer over every frequency bin, then frequency-axis layer over every frame.
pub fn tf_transformer_block(
    x: &FeatureMap,
    time: &TransformerWeights<'_>,
    freq: &TransformerWeights<'_>,
    heads: usize,
) -> Result<FeatureMap> {
    let (b, _, t, f) = x.dim();
    let seq = transformer_layer(x.to_time_sequences().view(), time, heads)?;
    let mid = FeatureMap::from_time_sequences(seq, b, f);
    let seq = transformer_layer(mid.to_freq_sequences().view(), freq, heads)?;
    Ok(FeatureMap::from_freq_sequences(seq, b, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::config::ModelConfig;
    use crate::nn::weights::init_random;
    use ndarray::{s, Array4, Axis};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_map(rng: &mut ChaCha8Rng, shape: (usize, usize, usize, usize)) -> FeatureMap {
        FeatureMap::new(Array4::from_shape_fn(shape, |_| rng.random_range(-1.0f32..1.0))).unwrap()
    }

    #[test]
    fn preserves_shape_and_sequence_independence() {
        let cfg = ModelConfig::small(8, 1, 2);
        let store = init_random(&cfg, 1).unwrap();
        let w = TransformerWeights::from_store(&store, "blocks.0.time").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Array3::from_shape_fn((3, 5, 8), |_| rng.random_range(-1.0f32..1.0));
        let y = transformer_layer(x.view(), &w, 2).unwrap();
        assert_eq!(y.dim(), (3, 5, 8));
        let alone = transformer_layer(x.slice(s![1..2, .., ..]), &w, 2).unwrap();
        for (a, b) in alone.index_axis(Axis(0), 0).iter().zip(y.index_axis(Axis(0), 1)) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_branches_are_identity() {
        let cfg = ModelConfig::small(4, 1, 2);
        let mut store = init_random(&cfg, 1).unwrap();
        for name in ["attn.out_proj.weight", "attn.out_proj.bias", "ffn.weight", "ffn.bias"] {
            let t = store.get_mut(&format!("blocks.0.time.{name}")).unwrap();
            t.data.iter_mut().for_each(|v| *v = 0.0);
        }
        let w = TransformerWeights::from_store(&store, "blocks.0.time").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Array3::from_shape_fn((2, 3, 4), |_| rng.random_range(-1.0f32..1.0));
        assert_eq!(transformer_layer(x.view(), &w, 2).unwrap(), x);
    }

    #[test]
    fn block_keeps_feature_map_shape() {
        let cfg = ModelConfig::small(8, 1, 4);
        let store = init_random(&cfg, 5).unwrap();
        let tw = TransformerWeights::from_store(&store, "blocks.0.time").unwrap();
        let fw = TransformerWeights::from_store(&store, "blocks.0.freq").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_map(&mut rng, (2, 8, 3, 6));
        let y = tf_transformer_block(&x, &tw, &fw, 4).unwrap();
        assert_eq!(y.dim(), x.dim());
        assert!(y.is_finite());
    }
}
