//! Multi-head scaled dot-product self-attention, without positional encoding.

use ndarray::{s, Array2, Array3, Array4, ArrayView1, ArrayView2, ArrayView3, Axis};

use crate::error::{Error, Result};
use crate::nn::layers::linear;

#[derive(Debug, Clone, Copy)]
pub struct AttentionWeights<'a> {
    /// Stacked query, key and value projections, `(3D, D)`.
    pub in_proj_weight: ArrayView2<'a, f32>,
    pub in_proj_bias: ArrayView1<'a, f32>,
    pub out_proj_weight: ArrayView2<'a, f32>,
    pub out_proj_bias: ArrayView1<'a, f32>,
}

fn softmax_rows(scores: &mut Array2<f32>) {
    for mut row in scores.axis_iter_mut(Axis(0)) {
        let max = row.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

fn run(
    x: ArrayView3<f32>,
    w: AttentionWeights<'_>,
    heads: usize,
    mut probs: Option<&mut Array4<f32>>,
) -> Result<Array3<f32>> {
    let (n, len, d) = x.dim();
    if heads == 0 || d % heads != 0 {
        return Err(Error::InvalidArgument(format!(
            "model dim {d} not divisible by {heads} heads"
        )));
    }
    if w.in_proj_weight.dim() != (3 * d, d) || w.out_proj_weight.dim() != (d, d) {
        return Err(Error::shape("attention weights", &[3 * d, d], w.in_proj_weight.shape()));
    }
    let dh = d / heads;
    let scale = 1.0 / (dh as f32).sqrt();
    let flat = x
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((n * len, d))
        .expect("standard layout");
    let qkv = linear(flat.view(), w.in_proj_weight, w.in_proj_bias)?;

    let mut mixed = Array2::<f32>::zeros((n * len, d));
    for seq in 0..n {
        let rows = seq * len..(seq + 1) * len;
        let block = qkv.slice(s![rows.clone(), ..]);
        for head in 0..heads {
            let cols = head * dh..(head + 1) * dh;
            let q = block.slice(s![.., cols.clone()]);
            let k = block.slice(s![.., d + cols.start..d + cols.end]);
            let v = block.slice(s![.., 2 * d + cols.start..2 * d + cols.end]);
            let mut scores = q.dot(&k.t()) * scale;
            softmax_rows(&mut scores);
            mixed
                .slice_mut(s![rows.clone(), cols])
                .assign(&scores.dot(&v));
            if let Some(p) = probs.as_deref_mut() {
                p.slice_mut(s![seq, head, .., ..]).assign(&scores);
            }
        }
    }
    let out = linear(mixed.view(), w.out_proj_weight, w.out_proj_bias)?;
    Ok(out
        .into_shape_with_order((n, len, d))
        .expect("row count is n * len"))
}

/// Self-attention over each of the `N` sequences in `(N, L, D)`.
pub fn mhsa(x: ArrayView3<f32>, w: AttentionWeights<'_>, heads: usize) -> Result<Array3<f32>> {
    run(x, w, heads, None)
}

/// Attention probabilities `(N, heads, L, L)`; each row sums to one.
pub fn attention_probs(
    x: ArrayView3<f32>,
    w: AttentionWeights<'_>,
    heads: usize,
) -> Result<Array4<f32>> {
    let (n, len, _) = x.dim();
    let mut probs = Array4::zeros((n, heads, len, len));
    run(x, w, heads, Some(&mut probs))?;
    Ok(probs)
}
